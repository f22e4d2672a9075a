"""Symmetric bilinear group abstraction with a swappable backend.

A context bundles a prime-order group pair (G, G_T), the pairing map, a
hash-to-group function and two operation meters: one for pairings, one for
scalar multiplications (group exponentiations). Element products, inversions
and hashing are group-law plumbing and stay off the meters; a fused
multi-exponentiation is metered as a single scalar multiplication, the usual
cost model for shared-squaring evaluation.

The bundled "reference" backend tracks discrete logs openly: a G element is
the formal power g^a with a stored, and e(g^a, g^b) = gt^(ab). It satisfies
every algebraic axiom exactly at any prime order, which makes the protocol
layers testable at desk scale; it offers no cryptographic hardness. Curve
providers can register real backends against the same interface.
"""

from __future__ import annotations

import hashlib
import random
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

from .primes import generate_prime, is_probable_prime
from .wire import decode_blob, encode_blob

# 160-bit default order, matching the curve size the cost-model defaults assume.
DEFAULT_Q_160 = 1096126227998177188652763624537212264741949407257

_HASHES = {"sha256": hashlib.sha256, "sha1": hashlib.sha1}


class BackendMismatchError(ValueError):
    """Raised when elements from different backends (or group orders) are mixed."""


@dataclass(frozen=True)
class Scalar:
    """An element of Z_q with exact field arithmetic."""

    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            object.__setattr__(self, "value", self.value % self.q)

    def _peer(self, other: "Scalar") -> None:
        if self.q != other.q:
            raise ValueError("scalar field mismatch")

    def __add__(self, other: "Scalar") -> "Scalar":
        self._peer(other)
        return Scalar((self.value + other.value) % self.q, self.q)

    def __sub__(self, other: "Scalar") -> "Scalar":
        self._peer(other)
        return Scalar((self.value - other.value) % self.q, self.q)

    def __mul__(self, other: "Scalar") -> "Scalar":
        self._peer(other)
        return Scalar(self.value * other.value % self.q, self.q)

    def __neg__(self) -> "Scalar":
        return Scalar(-self.value % self.q, self.q)

    def inverse(self) -> "Scalar":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse in Z_q")
        return Scalar(pow(self.value, -1, self.q), self.q)


@dataclass(frozen=True)
class GroupElementG:
    backend: str
    data: object


@dataclass(frozen=True)
class GroupElementGT:
    backend: str
    data: object


class PairingBackend(ABC):
    """The six group operations plus pairing, hashing and element codecs.

    `ident` must be unique per (backend family, group order) so elements from
    incompatible instances never interoperate; `wire_id` is the single byte
    prefixed to serialized elements.
    """

    ident: str
    wire_id: int
    q: int

    @abstractmethod
    def generator(self) -> GroupElementG: ...

    @abstractmethod
    def identity_g(self) -> GroupElementG: ...

    @abstractmethod
    def identity_gt(self) -> GroupElementGT: ...

    @abstractmethod
    def g_mul(self, a: GroupElementG, b: GroupElementG) -> GroupElementG: ...

    @abstractmethod
    def g_inv(self, a: GroupElementG) -> GroupElementG: ...

    @abstractmethod
    def g_exp(self, base: GroupElementG, k: int) -> GroupElementG: ...

    @abstractmethod
    def gt_mul(self, a: GroupElementGT, b: GroupElementGT) -> GroupElementGT: ...

    @abstractmethod
    def gt_inv(self, a: GroupElementGT) -> GroupElementGT: ...

    @abstractmethod
    def gt_exp(self, base: GroupElementGT, k: int) -> GroupElementGT: ...

    @abstractmethod
    def pair(self, p: GroupElementG, q: GroupElementG) -> GroupElementGT: ...

    @abstractmethod
    def hash_to_g(self, data: bytes, hash_name: str) -> GroupElementG: ...

    @abstractmethod
    def element_bytes(self, element: GroupElementG | GroupElementGT) -> bytes: ...

    @abstractmethod
    def element_g_from_bytes(self, body: bytes) -> GroupElementG: ...

    @abstractmethod
    def element_gt_from_bytes(self, body: bytes) -> GroupElementGT: ...

    def g_mulexp(self, pairs: Iterable[tuple[GroupElementG, int]]) -> GroupElementG:
        """Product of powers, the fused-evaluation form; backends may override."""
        acc = self.identity_g()
        for base, k in pairs:
            acc = self.g_mul(acc, self.g_exp(base, k))
        return acc

    def gt_mulexp(self, pairs: Iterable[tuple[GroupElementGT, int]]) -> GroupElementGT:
        acc = self.identity_gt()
        for base, k in pairs:
            acc = self.gt_mul(acc, self.gt_exp(base, k))
        return acc


class ReferenceBackend(PairingBackend):
    """Exponent-tracked discrete-log group; algebraically exact, cryptographically void."""

    wire_id = 0x01

    def __init__(self, q: int):
        self.q = q
        self.ident = f"reference:{q}"

    def _check_g(self, *elements: GroupElementG) -> None:
        for e in elements:
            if not isinstance(e, GroupElementG) or e.backend != self.ident:
                raise BackendMismatchError("G element from a different backend")

    def _check_gt(self, *elements: GroupElementGT) -> None:
        for e in elements:
            if not isinstance(e, GroupElementGT) or e.backend != self.ident:
                raise BackendMismatchError("G_T element from a different backend")

    def generator(self) -> GroupElementG:
        return GroupElementG(self.ident, 1)

    def identity_g(self) -> GroupElementG:
        return GroupElementG(self.ident, 0)

    def identity_gt(self) -> GroupElementGT:
        return GroupElementGT(self.ident, 0)

    def g_mul(self, a, b):
        self._check_g(a, b)
        return GroupElementG(self.ident, (a.data + b.data) % self.q)

    def g_inv(self, a):
        self._check_g(a)
        return GroupElementG(self.ident, -a.data % self.q)

    def g_exp(self, base, k):
        self._check_g(base)
        return GroupElementG(self.ident, base.data * (k % self.q) % self.q)

    def gt_mul(self, a, b):
        self._check_gt(a, b)
        return GroupElementGT(self.ident, (a.data + b.data) % self.q)

    def gt_inv(self, a):
        self._check_gt(a)
        return GroupElementGT(self.ident, -a.data % self.q)

    def gt_exp(self, base, k):
        self._check_gt(base)
        return GroupElementGT(self.ident, base.data * (k % self.q) % self.q)

    def pair(self, p, q):
        self._check_g(p, q)
        return GroupElementGT(self.ident, p.data * q.data % self.q)

    def hash_to_g(self, data: bytes, hash_name: str) -> GroupElementG:
        digest = _HASHES[hash_name](data).digest()
        return GroupElementG(self.ident, int.from_bytes(digest, "big") % self.q)

    def element_bytes(self, element):
        if isinstance(element, GroupElementG):
            self._check_g(element)
        else:
            self._check_gt(element)
        value: int = element.data
        return value.to_bytes((self.q.bit_length() + 7) // 8, "big")

    def element_g_from_bytes(self, body: bytes) -> GroupElementG:
        return GroupElementG(self.ident, int.from_bytes(body, "big") % self.q)

    def element_gt_from_bytes(self, body: bytes) -> GroupElementGT:
        return GroupElementGT(self.ident, int.from_bytes(body, "big") % self.q)


_BACKENDS: dict[str, tuple[int, Callable[[int], PairingBackend]]] = {
    "reference": (ReferenceBackend.wire_id, ReferenceBackend),
}


def register_backend(name: str, wire_id: int, factory: Callable[[int], PairingBackend]) -> None:
    """Register a curve provider under `name`; factory takes the group order q."""
    if name in _BACKENDS:
        raise ValueError(f"backend {name!r} already registered")
    if any(wid == wire_id for wid, _ in _BACKENDS.values()):
        raise ValueError(f"wire id {wire_id:#x} already taken")
    _BACKENDS[name] = (wire_id, factory)


class CounterSnapshot(NamedTuple):
    pairings: int
    scalar_muls: int


class _CounterWindow:
    """Captures meter deltas across a with-block."""

    def __init__(self, ctx: "PairingContext"):
        self._ctx = ctx
        self.pairings = 0
        self.scalar_muls = 0

    def __enter__(self) -> "_CounterWindow":
        self._start = self._ctx.counters
        return self

    def __exit__(self, *exc) -> None:
        end = self._ctx.counters
        self.pairings = end.pairings - self._start.pairings
        self.scalar_muls = end.scalar_muls - self._start.scalar_muls


class PairingContext:
    """A configured group pair with meters; create through ctx_new()."""

    def __init__(self, backend: PairingBackend, hash_name: str = "sha256"):
        if hash_name not in _HASHES:
            raise ValueError(f"unsupported hash {hash_name!r}")
        self.backend = backend
        self.hash_name = hash_name
        self.q = backend.q
        self.g = backend.generator()
        self._lock = threading.Lock()
        self._pairings = 0
        self._scalar_muls = 0

    # -- meters ------------------------------------------------------------

    @property
    def counters(self) -> CounterSnapshot:
        with self._lock:
            return CounterSnapshot(self._pairings, self._scalar_muls)

    def reset_counters(self) -> None:
        with self._lock:
            self._pairings = 0
            self._scalar_muls = 0

    def measure(self) -> _CounterWindow:
        return _CounterWindow(self)

    def _count_mul(self) -> None:
        with self._lock:
            self._scalar_muls += 1

    def _count_pairing(self) -> None:
        with self._lock:
            self._pairings += 1

    # -- metered operations (exponentiations and pairings) ------------------

    def g_exp(self, base: GroupElementG, k: int | Scalar) -> GroupElementG:
        self._count_mul()
        return self.backend.g_exp(base, self._as_int(k))

    def gt_exp(self, base: GroupElementGT, k: int | Scalar) -> GroupElementGT:
        self._count_mul()
        return self.backend.gt_exp(base, self._as_int(k))

    def g_mulexp(self, pairs: Iterable[tuple[GroupElementG, int | Scalar]]) -> GroupElementG:
        self._count_mul()
        return self.backend.g_mulexp([(b, self._as_int(k)) for b, k in pairs])

    def gt_mulexp(self, pairs: Iterable[tuple[GroupElementGT, int | Scalar]]) -> GroupElementGT:
        self._count_mul()
        return self.backend.gt_mulexp([(b, self._as_int(k)) for b, k in pairs])

    def pair(self, p: GroupElementG, q: GroupElementG) -> GroupElementGT:
        self._count_pairing()
        return self.backend.pair(p, q)

    # -- unmetered group-law plumbing ---------------------------------------

    def g_mul(self, a: GroupElementG, b: GroupElementG) -> GroupElementG:
        return self.backend.g_mul(a, b)

    def g_inv(self, a: GroupElementG) -> GroupElementG:
        return self.backend.g_inv(a)

    def gt_mul(self, a: GroupElementGT, b: GroupElementGT) -> GroupElementGT:
        return self.backend.gt_mul(a, b)

    def gt_inv(self, a: GroupElementGT) -> GroupElementGT:
        return self.backend.gt_inv(a)

    def identity_g(self) -> GroupElementG:
        return self.backend.identity_g()

    def identity_gt(self) -> GroupElementGT:
        return self.backend.identity_gt()

    def hash_to_g(self, data: bytes | str) -> GroupElementG:
        if isinstance(data, str):
            data = data.encode("utf-8")
        return self.backend.hash_to_g(data, self.hash_name)

    # -- scalars -------------------------------------------------------------

    def scalar(self, value: int) -> Scalar:
        return Scalar(value % self.q, self.q)

    def rand_scalar(self, rng: random.Random) -> Scalar:
        return Scalar(rng.randrange(self.q), self.q)

    def _as_int(self, k: int | Scalar) -> int:
        if isinstance(k, Scalar):
            if k.q != self.q:
                raise ValueError("scalar from a different field")
            return k.value
        return k % self.q

    @property
    def q_bits(self) -> int:
        return self.q.bit_length()

    # -- serialization --------------------------------------------------------

    def element_to_bytes(self, element: GroupElementG | GroupElementGT) -> bytes:
        return bytes([self.backend.wire_id]) + encode_blob(self.backend.element_bytes(element))

    def _element_from_bytes(self, data: bytes, offset: int, group_t: bool):
        if offset >= len(data):
            raise ValueError("truncated element")
        if data[offset] != self.backend.wire_id:
            raise ValueError("element from an unknown backend")
        body, offset = decode_blob(data, offset + 1)
        if group_t:
            return self.backend.element_gt_from_bytes(body), offset
        return self.backend.element_g_from_bytes(body), offset

    def element_g_from_bytes(self, data: bytes, offset: int = 0) -> tuple[GroupElementG, int]:
        return self._element_from_bytes(data, offset, group_t=False)

    def element_gt_from_bytes(self, data: bytes, offset: int = 0) -> tuple[GroupElementGT, int]:
        return self._element_from_bytes(data, offset, group_t=True)


def _self_test(backend: PairingBackend, rng: random.Random) -> None:
    """Bilinearity and non-degeneracy spot checks; runs off the meters."""
    g = backend.generator()
    gt = backend.pair(g, g)
    if gt == backend.identity_gt():
        raise ValueError("degenerate pairing: e(g, g) is the identity")
    for _ in range(4):
        a = rng.randrange(1, backend.q)
        b = rng.randrange(1, backend.q)
        left = backend.pair(backend.g_exp(g, a), backend.g_exp(g, b))
        if left != backend.gt_exp(gt, a * b % backend.q):
            raise ValueError("bilinearity self-test failed")
        if left != backend.pair(backend.g_exp(g, b), backend.g_exp(g, a)):
            raise ValueError("pairing symmetry self-test failed")


def ctx_new(
    backend: str = "reference",
    q: int | None = None,
    q_bits: int | None = None,
    rng: random.Random | None = None,
    hash_name: str = "sha256",
    self_test: bool = True,
) -> PairingContext:
    """Build a pairing context.

    Exactly one of `q` (explicit prime order) or `q_bits` (order size, prime
    drawn from `rng`) may be given; the pinned 160-bit default is used
    otherwise. Composite orders and unknown backends are rejected.
    """
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if q is not None and q_bits is not None:
        raise ValueError("give q or q_bits, not both")
    rng = rng if rng is not None else random.Random(0x5EED)
    if q is None:
        q = DEFAULT_Q_160 if q_bits is None else generate_prime(q_bits, rng)
    if not is_probable_prime(q):
        raise ValueError("group order must be prime")
    _, factory = _BACKENDS[backend]
    instance = factory(q)
    if self_test:
        _self_test(instance, rng)
    return PairingContext(instance, hash_name=hash_name)
