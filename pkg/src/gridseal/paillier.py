"""Additive homomorphic encryption for meter readings.

Key generation, encryption, decryption and ciphertext addition for the
cryptosystem used between meters and the substation terminal unit: the
modulus N is a product of two primes, encryption computes g^m * r^N mod N^2,
and multiplying two ciphertexts decrypts to the sum of their plaintexts.

The generator defaults to g = N + 1, which always has order divisible by N
and enables the fast encryption path (1 + mN) * r^N mod N^2. Decryption uses
the cached inverse mu = L(g^lambda mod N^2)^-1 mod N where L(u) = (u - 1) / N.

All values are immutable after construction and every operation takes its
randomness source explicitly, so keys and ciphertexts can be shared freely
across threads.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .primes import generate_prime, is_probable_prime
from .wire import decode_uint, encode_uint

try:  # optional fast path; big-integer modexp dominates every operation here
    from gmpy2 import powmod as _powmod
except ImportError:  # pragma: no cover
    _powmod = pow

MIN_KEY_BITS = 16
DEFAULT_KEY_BITS = 2048

_ENCRYPT_R_ATTEMPTS = 128


class MalformedCiphertextError(ValueError):
    """Raised when a ciphertext fails the L-function domain check during decryption."""


@dataclass(frozen=True)
class PaillierPublicKey:
    """Public half of an aggregation keypair.

    Attributes:
        modulus: N, the product of two distinct primes.
        generator: g in Z_{N^2}^*, order a multiple of N (N + 1 by default).
    """

    modulus: int
    generator: int

    def __post_init__(self):
        if self.modulus <= 1:
            raise ValueError("modulus must exceed 1")
        n_sq = self.modulus * self.modulus
        if not 1 < self.generator < n_sq:
            raise ValueError("generator out of range for Z_{N^2}")

    @property
    def modulus_squared(self) -> int:
        return self.modulus * self.modulus

    @property
    def bit_length(self) -> int:
        return self.modulus.bit_length()

    def to_bytes(self) -> bytes:
        return encode_uint(self.modulus) + encode_uint(self.generator)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierPublicKey":
        modulus, off = decode_uint(data, 0)
        generator, off = decode_uint(data, off)
        if off != len(data):
            raise ValueError("trailing bytes after public key")
        return cls(modulus, generator)


@dataclass(frozen=True)
class PaillierSecretKey:
    """Secret half: lambda(N) = lcm(q1-1, q2-1) plus the cached L-inverse mu.

    The generating primes are kept in memory for inspection and a potential
    CRT fast path but never serialized.
    """

    lam: int
    mu: int
    q1: int | None = None
    q2: int | None = None

    def to_bytes(self) -> bytes:
        return encode_uint(self.lam) + encode_uint(self.mu)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierSecretKey":
        lam, off = decode_uint(data, 0)
        mu, off = decode_uint(data, off)
        if off != len(data):
            raise ValueError("trailing bytes after secret key")
        return cls(lam, mu)


@dataclass(frozen=True)
class PaillierCiphertext:
    """A blinded residue c in Z_{N^2}^*, tagged with its modulus for domain checks."""

    value: int
    modulus: int

    def __post_init__(self):
        n_sq = self.modulus * self.modulus
        if not 0 < self.value < n_sq:
            raise ValueError("ciphertext value out of range")
        if math.gcd(self.value, n_sq) != 1:
            raise ValueError("ciphertext not invertible modulo N^2")

    def to_bytes(self) -> bytes:
        return encode_uint(self.value)

    @classmethod
    def from_bytes(cls, data: bytes, pk: PaillierPublicKey) -> "PaillierCiphertext":
        value, off = decode_uint(data, 0)
        if off != len(data):
            raise ValueError("trailing bytes after ciphertext")
        return cls(value, pk.modulus)


def _build_keys(q1: int, q2: int) -> tuple[PaillierPublicKey, PaillierSecretKey]:
    modulus = q1 * q2
    lam = math.lcm(q1 - 1, q2 - 1)
    if math.gcd(lam, modulus) != 1:
        raise ValueError("lambda(N) shares a factor with N; L-denominator not invertible")
    generator = modulus + 1
    n_sq = modulus * modulus
    denom = (int(_powmod(generator, lam, n_sq)) - 1) // modulus
    mu = pow(denom, -1, modulus)
    return (
        PaillierPublicKey(modulus, generator),
        PaillierSecretKey(lam, mu, q1, q2),
    )


def paillier_keygen(
    bit_length: int = DEFAULT_KEY_BITS,
    rng: random.Random | None = None,
    q1: int | None = None,
    q2: int | None = None,
) -> tuple[PaillierPublicKey, PaillierSecretKey]:
    """Generate an aggregation keypair.

    Args:
        bit_length: target size of N, at least 16 bits (2048 by default).
        rng: randomness source; the system CSPRNG when omitted.
        q1, q2: test hook injecting both primes for deterministic desk-scale
            vectors. Injected values are validated, never retried.

    Returns:
        (public key, secret key) with N = q1*q2, g = N + 1.
    """
    if (q1 is None) != (q2 is None):
        raise ValueError("inject both primes or neither")
    if q1 is not None and q2 is not None:
        if not (is_probable_prime(q1) and is_probable_prime(q2)):
            raise ValueError("injected factors must be prime")
        if q1 == q2:
            raise ValueError("injected factors must be distinct")
        return _build_keys(q1, q2)

    if bit_length < MIN_KEY_BITS:
        raise ValueError(f"bit_length must be at least {MIN_KEY_BITS}")
    rng = rng if rng is not None else random.SystemRandom()
    half = bit_length // 2
    for _ in range(64):
        p = generate_prime(half, rng)
        q = generate_prime(bit_length - half, rng)
        if p == q:
            continue
        try:
            return _build_keys(p, q)
        except ValueError:
            continue
    raise RuntimeError("prime generation exceeded retry budget for a usable keypair")


def paillier_encrypt(
    pk: PaillierPublicKey,
    message: int,
    rng: random.Random | None = None,
    r: int | None = None,
) -> PaillierCiphertext:
    """Encrypt a message in Z_N.

    The blinding factor r is drawn from Z_N^* (retrying until coprime with N)
    unless supplied explicitly for pinned test vectors. Repeated encryption of
    the same message yields distinct ciphertexts.
    """
    n = pk.modulus
    if not 0 <= message < n:
        raise ValueError("message out of range for Z_N")
    n_sq = pk.modulus_squared
    if r is not None:
        if not 0 < r < n or math.gcd(r, n) != 1:
            raise ValueError("supplied blinding factor not in Z_N^*")
    else:
        rng = rng if rng is not None else random.SystemRandom()
        for _ in range(_ENCRYPT_R_ATTEMPTS):
            candidate = rng.randrange(1, n)
            if math.gcd(candidate, n) == 1:
                r = candidate
                break
        else:
            raise RuntimeError("randomness source exhausted drawing a unit modulo N")
    if pk.generator == n + 1:
        g_to_m = (1 + message * n) % n_sq
    else:
        g_to_m = int(_powmod(pk.generator, message, n_sq))
    value = g_to_m * int(_powmod(r, n, n_sq)) % n_sq
    return PaillierCiphertext(value, n)


def paillier_decrypt(
    sk: PaillierSecretKey,
    pk: PaillierPublicKey,
    ciphertext: PaillierCiphertext,
) -> int:
    """Recover the plaintext; exact for every message in Z_N.

    Raises:
        ValueError: ciphertext bound to a different modulus.
        MalformedCiphertextError: c^lambda mod N^2 falls outside the
            L-function domain {u < N^2 | u = 1 mod N}.
    """
    n = pk.modulus
    if ciphertext.modulus != n:
        raise ValueError("ciphertext was produced under a different modulus")
    n_sq = pk.modulus_squared
    u = int(_powmod(ciphertext.value, sk.lam, n_sq))
    if u % n != 1:
        raise MalformedCiphertextError("ciphertext escapes the L-function domain")
    return (u - 1) // n * sk.mu % n


def paillier_add(
    pk: PaillierPublicKey,
    c1: PaillierCiphertext,
    c2: PaillierCiphertext,
) -> PaillierCiphertext:
    """Multiply ciphertexts modulo N^2; decrypts to (m1 + m2) mod N."""
    if c1.modulus != pk.modulus or c2.modulus != pk.modulus:
        raise ValueError("ciphertext modulus mismatch")
    return PaillierCiphertext(c1.value * c2.value % pk.modulus_squared, pk.modulus)

# TODO: optional CRT decryption fast path keyed on the retained factors.
