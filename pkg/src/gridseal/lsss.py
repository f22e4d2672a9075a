"""Boolean access policies: parsing, matrix compilation, reconstruction solving.

A policy is a monotone formula over attribute identifiers (AND binds tighter
than OR, both left-associative, no negation). Compilation turns its binary
tree into a share-generating matrix whose rows map to leaf attributes through
pi; a set of rows is authorized exactly when (1, 0, ..., 0) lies in their
span over Z_q.

Two column layouts are offered:

* "fresh" (default): every AND gate claims a new column. This is the standard
  construction and the one with the exact guarantee that row-span membership
  of (1, 0, ..., 0) coincides with boolean satisfaction; the matrix has
  1 + #AND columns.
* "shared": AND gates extend their parent's vector in place, so sibling AND
  branches reuse columns. This reproduces the compact conformance layout,
  but with parallel AND branches under an OR it can authorize sets the
  formula rejects ((a & b) | (c & d) lets {a, d} through). Use it only to
  interoperate with material in that layout.

Matrix entries stay in {-1, 0, 1}; arithmetic maps -1 to q - 1 when a field
is chosen. Everything in this module is pure.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .wire import decode_short_str, decode_uint, encode_short_str, encode_uint


class PolicySyntaxError(ValueError):
    """Parse failure; `position` is the character offset in the source text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


@dataclass(frozen=True)
class Leaf:
    attribute: str


@dataclass(frozen=True)
class Gate:
    op: str  # "AND" | "OR"
    left: "AccessTree"
    right: "AccessTree"


AccessTree = Union[Leaf, Gate]

_TOKEN_RE = re.compile(r"\s*(?:(?P<lparen>\()|(?P<rparen>\))|(?P<amp>&)|(?P<bar>\|)"
                       r"|(?P<bang>!|~)|(?P<ident>[A-Za-z0-9_][A-Za-z0-9_.:\-]*))")

_KEYWORDS = {"and": "AND", "or": "OR", "not": "NOT"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise PolicySyntaxError(f"unexpected character {stripped[0]!r}",
                                    len(text) - len(stripped))
        kind = match.lastgroup
        value = match.group(kind)
        at = match.start(kind)
        if kind == "ident":
            keyword = _KEYWORDS.get(value.lower())
            if keyword == "NOT":
                raise PolicySyntaxError("negation is not supported in monotone policies", at)
            if keyword:
                tokens.append((keyword, value, at))
            else:
                tokens.append(("IDENT", value, at))
        elif kind == "amp":
            tokens.append(("AND", value, at))
        elif kind == "bar":
            tokens.append(("OR", value, at))
        elif kind == "bang":
            raise PolicySyntaxError("negation is not supported in monotone policies", at)
        else:
            tokens.append((kind.upper(), value, at))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], length: int):
        self.tokens = tokens
        self.i = 0
        self.length = length

    def _eof_position(self) -> int:
        return self.tokens[-1][2] if self.tokens else 0

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def advance(self) -> tuple[str, str, int]:
        token = self.peek()
        if token is None:
            raise PolicySyntaxError("unexpected end of policy", self._eof_position())
        self.i += 1
        return token

    def parse(self) -> AccessTree:
        tree = self.parse_or()
        extra = self.peek()
        if extra is not None:
            raise PolicySyntaxError(f"unexpected {extra[1]!r}", extra[2])
        return tree

    def parse_or(self) -> AccessTree:
        node = self.parse_and()
        while (tok := self.peek()) is not None and tok[0] == "OR":
            self.advance()
            node = Gate("OR", node, self.parse_and())
        return node

    def parse_and(self) -> AccessTree:
        node = self.parse_atom()
        while (tok := self.peek()) is not None and tok[0] == "AND":
            self.advance()
            node = Gate("AND", node, self.parse_atom())
        return node

    def parse_atom(self) -> AccessTree:
        token = self.peek()
        if token is None:
            raise PolicySyntaxError("expected an attribute or '('", self._eof_position())
        kind, value, at = token
        if kind == "IDENT":
            self.advance()
            return Leaf(value)
        if kind == "LPAREN":
            self.advance()
            node = self.parse_or()
            closing = self.peek()
            if closing is None or closing[0] != "RPAREN":
                raise PolicySyntaxError("missing ')'",
                                        closing[2] if closing else self._eof_position())
            self.advance()
            return node
        raise PolicySyntaxError(f"unexpected {value!r}", at)


def parse_policy(text: str) -> AccessTree:
    """Parse a policy expression; n-ary chains binarize left-associatively."""
    tokens = _tokenize(text)
    if not tokens:
        raise PolicySyntaxError("empty policy", 0)
    return _Parser(tokens, len(text)).parse()


def policy_text(tree: AccessTree) -> str:
    """Render a tree with minimal parentheses; reparses to an identical tree."""
    # An OR under an AND needs parens; a right child of equal precedence needs
    # them too, since the grammar is left-associative.
    def render_child(node: AccessTree, parent_op: str, is_right: bool) -> str:
        if isinstance(node, Leaf):
            return node.attribute
        needs = (parent_op == "AND" and node.op == "OR") or (is_right and node.op == parent_op)
        text = render_child(node.left, node.op, False) + (" & " if node.op == "AND" else " | ") \
            + render_child(node.right, node.op, True)
        return f"({text})" if needs else text

    if isinstance(tree, Leaf):
        return tree.attribute
    return render_child(tree.left, tree.op, False) + (" & " if tree.op == "AND" else " | ") \
        + render_child(tree.right, tree.op, True)


def tree_attributes(tree: AccessTree) -> list[str]:
    """Leaf attributes in depth-first order (duplicates preserved)."""
    if isinstance(tree, Leaf):
        return [tree.attribute]
    return tree_attributes(tree.left) + tree_attributes(tree.right)


def evaluate_tree(tree: AccessTree, attributes: Iterable[str]) -> bool:
    """Boolean satisfaction of the formula by an attribute set."""
    held = set(attributes)

    def walk(node: AccessTree) -> bool:
        if isinstance(node, Leaf):
            return node.attribute in held
        if node.op == "AND":
            return walk(node.left) and walk(node.right)
        return walk(node.left) or walk(node.right)

    return walk(tree)


@dataclass(frozen=True)
class LsssProgram:
    """Share-generating matrix plus the row-to-attribute map pi.

    rows[x] is the x-th matrix row with entries in {-1, 0, 1};
    attributes[x] is pi(x+1) in 1-based terms.
    """

    rows: tuple[tuple[int, ...], ...]
    attributes: tuple[str, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.attributes):
            raise ValueError("row/attribute count mismatch")
        if self.rows:
            width = len(self.rows[0])
            if any(len(r) != width for r in self.rows):
                raise ValueError("ragged matrix")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def h(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def rows_for(self, attributes: Iterable[str]) -> list[int]:
        held = set(attributes)
        return [i for i, attr in enumerate(self.attributes) if attr in held]

    def to_bytes(self, q: int) -> bytes:
        """Fixed 4-byte dimensions, length-prefixed row-major entries (in Z_q),
        then the row map as short strings."""
        out = struct.pack(">II", self.n, self.h)
        for row in self.rows:
            for entry in row:
                out += encode_uint(entry % q)
        for attr in self.attributes:
            out += encode_short_str(attr)
        return out

    @classmethod
    def from_bytes(cls, data: bytes, q: int, offset: int = 0) -> tuple["LsssProgram", int]:
        if offset + 8 > len(data):
            raise ValueError("truncated program dimensions")
        n, h = struct.unpack_from(">II", data, offset)
        offset += 8
        rows = []
        for _ in range(n):
            row = []
            for _ in range(h):
                value, offset = decode_uint(data, offset)
                row.append(-1 if value == q - 1 else value)
            rows.append(tuple(row))
        attrs = []
        for _ in range(n):
            attr, offset = decode_short_str(data, offset)
            attrs.append(attr)
        return cls(tuple(rows), tuple(attrs)), offset


def compile_lsss(tree: AccessTree, columns: str = "fresh") -> LsssProgram:
    """Compile an access tree to (R, pi).

    The root starts with vector (1); OR passes the vector to both children;
    AND gives the left child (v | 1) and the right child (0, ..., 0, -1).
    In "fresh" mode each AND appends into its own new column (the sound
    construction, h = 1 + #AND); in "shared" mode an AND extends only its
    parent's vector, reproducing the compact conformance layout. Vectors are
    zero-padded at the end so column 1 carries the secret.
    """
    if columns not in ("fresh", "shared"):
        raise ValueError("columns must be 'fresh' or 'shared'")
    leaves: list[tuple[str, list[int]]] = []

    if columns == "fresh":
        width = 1

        def walk(node: AccessTree, vector: list[int]) -> None:
            nonlocal width
            if isinstance(node, Leaf):
                leaves.append((node.attribute, vector))
                return
            if node.op == "OR":
                walk(node.left, vector)
                walk(node.right, vector)
                return
            padded = vector + [0] * (width - len(vector))
            left = padded + [1]
            right = [0] * width + [-1]
            width += 1
            walk(node.left, left)
            walk(node.right, right)

        walk(tree, [1])
        total = width
    else:
        def walk(node: AccessTree, vector: list[int]) -> None:
            if isinstance(node, Leaf):
                leaves.append((node.attribute, vector))
                return
            if node.op == "OR":
                walk(node.left, vector)
                walk(node.right, vector)
                return
            walk(node.left, vector + [1])
            walk(node.right, [0] * len(vector) + [-1])

        walk(tree, [1])
        total = max(len(v) for _, v in leaves)

    rows = tuple(tuple(v + [0] * (total - len(v))) for _, v in leaves)
    attrs = tuple(attr for attr, _ in leaves)
    return LsssProgram(rows, attrs)


def solve_for_rows(
    program: LsssProgram,
    row_indices: Sequence[int],
    q: int,
) -> Optional[dict[int, int]]:
    """Coefficients k over the given rows with sum(k_x * R_x) = (1, 0, ..., 0) in Z_q.

    Returns only nonzero coefficients, or None when the rows do not span the
    target (absence, not an error). Gaussian elimination on the transposed
    system; free variables pin to zero, so the support is a set of pivot rows.
    """
    indices = list(row_indices)
    if not indices:
        return None
    h = program.h
    n = len(indices)
    # Augmented system A * k = e1 where column j of A is the j-th selected row.
    aug = [[program.rows[indices[j]][r] % q for j in range(n)] + [1 if r == 0 else 0]
           for r in range(h)]
    pivot_row_of_col: dict[int, int] = {}
    rank = 0
    for col in range(n):
        pivot = next((r for r in range(rank, h) if aug[r][col] % q), None)
        if pivot is None:
            continue
        aug[rank], aug[pivot] = aug[pivot], aug[rank]
        inv = pow(aug[rank][col], -1, q)
        aug[rank] = [x * inv % q for x in aug[rank]]
        for r in range(h):
            if r != rank and aug[r][col] % q:
                factor = aug[r][col]
                aug[r] = [(aug[r][k] - factor * aug[rank][k]) % q for k in range(n + 1)]
        pivot_row_of_col[col] = rank
        rank += 1
    for r in range(rank, h):
        if aug[r][n] % q:
            return None  # inconsistent: target outside the span
    solution: dict[int, int] = {}
    for col, r in pivot_row_of_col.items():
        value = aug[r][n] % q
        if value:
            solution[indices[col]] = value
    if not solution:
        return None
    return solution


def solve_reconstruction(
    program: LsssProgram,
    attributes: Iterable[str],
    q: int,
) -> Optional[dict[int, int]]:
    """Reconstruction coefficients over the rows whose attribute is held."""
    return solve_for_rows(program, program.rows_for(attributes), q)


def verify_reconstruction(
    program: LsssProgram,
    coefficients: Mapping[int, int],
    q: int,
) -> bool:
    """Re-substitute: sum(k_x * R_x) must equal (1, 0, ..., 0) exactly in Z_q."""
    total = [0] * program.h
    for index, k in coefficients.items():
        row = program.rows[index]
        for c in range(program.h):
            total[c] = (total[c] + k * row[c]) % q
    return total[0] == 1 % q and all(v == 0 for v in total[1:])
