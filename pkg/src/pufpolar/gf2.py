"""Dense GF(2) matrices stored as one integer bitset per row.

Bit ``c`` of ``rows[r]`` is the entry at (r, c). Vectors are plain integers
whose bit ``k`` is coordinate ``k`` (LSB-first), which is exactly the binary
expansion of a codeword index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 16

# Exponents of a primitive polynomial per degree (x^s + ... + 1).
PRIMITIVE_POLYS = {
    1: (1, 0),
    2: (2, 1, 0),
    3: (3, 1, 0),
    4: (4, 1, 0),
    5: (5, 2, 0),
    6: (6, 1, 0),
    7: (7, 1, 0),
    8: (8, 4, 3, 2, 0),
    9: (9, 4, 0),
    10: (10, 3, 0),
    11: (11, 2, 0),
    12: (12, 6, 4, 1, 0),
    13: (13, 4, 3, 1, 0),
    14: (14, 10, 6, 1, 0),
    15: (15, 1, 0),
    16: (16, 12, 3, 1, 0),
}


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class BitMatrix:
    n_rows: int
    n_cols: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if not (1 <= self.n_rows <= MAX_DIM and 1 <= self.n_cols <= MAX_DIM):
            raise ValueError(f"dimensions {self.n_rows}x{self.n_cols} outside [1, {MAX_DIM}]")
        if len(self.rows) != self.n_rows:
            raise ValueError("row count does not match n_rows")
        limit = 1 << self.n_cols
        if any(r < 0 or r >= limit for r in self.rows):
            raise ValueError("row bitset wider than n_cols")

    @classmethod
    def from_lists(cls, entries: Sequence[Sequence[int]]) -> "BitMatrix":
        n_cols = len(entries[0])
        rows = []
        for row in entries:
            if len(row) != n_cols:
                raise ValueError("ragged matrix")
            rows.append(sum((int(v) & 1) << c for c, v in enumerate(row)))
        return cls(len(entries), n_cols, tuple(rows))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    def to_lists(self) -> list[list[int]]:
        return [[(r >> c) & 1 for c in range(self.n_cols)] for r in self.rows]

    def to_array(self) -> np.ndarray:
        return np.array(self.to_lists(), dtype=np.uint8)

    @property
    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def entry(self, i: int, j: int) -> int:
        return (self.rows[i] >> j) & 1

    def apply(self, x: int) -> int:
        """Matrix-vector product with an LSB-first bit vector packed in an int."""
        out = 0
        for r, row in enumerate(self.rows):
            out |= (bin(row & x).count("1") & 1) << r
        return out

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return mat_mul(self, other)

    def __str__(self):
        return "\n".join("".join(str(v) for v in row) for row in self.to_lists())


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.n_cols != b.n_rows:
        raise ValueError(f"cannot multiply {a.n_rows}x{a.n_cols} by {b.n_rows}x{b.n_cols}")
    rows = []
    for ra in a.rows:
        acc = 0
        k = 0
        while ra:
            if ra & 1:
                acc ^= b.rows[k]
            ra >>= 1
            k += 1
        rows.append(acc)
    return BitMatrix(a.n_rows, b.n_cols, tuple(rows))


def mat_rank(a: BitMatrix) -> int:
    work = list(a.rows)
    rank = 0
    for col in range(a.n_cols):
        bit = 1 << col
        pivot = next((r for r in range(rank, len(work)) if work[r] & bit), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for r in range(len(work)):
            if r != rank and work[r] & bit:
                work[r] ^= work[rank]
        rank += 1
    return rank


def is_invertible(a: BitMatrix) -> bool:
    return a.is_square and mat_rank(a) == a.n_rows


def mat_inverse(a: BitMatrix) -> BitMatrix:
    """Gauss-Jordan inverse; raises SingularMatrixError instead of returning junk."""
    if not a.is_square:
        raise ValueError("only square matrices have inverses")
    n = a.n_rows
    work = list(a.rows)
    inv = [1 << i for i in range(n)]
    for col in range(n):
        bit = 1 << col
        pivot = next((r for r in range(col, n) if work[r] & bit), None)
        if pivot is None:
            raise SingularMatrixError("matrix is singular over GF(2)")
        work[col], work[pivot] = work[pivot], work[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        for r in range(n):
            if r != col and work[r] & bit:
                work[r] ^= work[col]
                inv[r] ^= inv[col]
    return BitMatrix(n, n, tuple(inv))


def mat_power(a: BitMatrix, j: int) -> BitMatrix:
    if not a.is_square:
        raise ValueError("power of a non-square matrix")
    if j < 0:
        return mat_power(mat_inverse(a), -j)
    result = BitMatrix.identity(a.n_rows)
    base = a
    while j:
        if j & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        j >>= 1
    return result


def mat_order(a: BitMatrix) -> int:
    """Smallest j >= 1 with a^j = I.

    The maximal element order in GL(n, 2) is 2^n - 1, so exceeding that many
    iterations means the arithmetic is broken.
    """
    if not is_invertible(a):
        raise SingularMatrixError("order is only defined for invertible matrices")
    ident = BitMatrix.identity(a.n_rows)
    cap = (1 << a.n_rows) - 1
    cur = a
    for j in range(1, cap + 1):
        if cur == ident:
            return j
        cur = mat_mul(cur, a)
    raise RuntimeError(f"order exceeded the GL({a.n_rows}, 2) bound {cap}")


def companion_matrix(exponents: Iterable[int]) -> BitMatrix:
    """Companion matrix of x^s + sum c_k x^k with ones on the subdiagonal."""
    exps = set(exponents)
    s = max(exps)
    rows = []
    for r in range(s):
        row = 0
        if r >= 1:
            row |= 1 << (r - 1)
        if r in exps:
            row |= 1 << (s - 1)
        rows.append(row)
    return BitMatrix(s, s, tuple(rows))


@lru_cache(maxsize=None)
def singer_matrix(s: int) -> BitMatrix:
    """An s x s matrix of maximal multiplicative order 2^s - 1 (a Singer cycle)."""
    if s not in PRIMITIVE_POLYS:
        raise ValueError(f"block size {s} outside [1, {MAX_DIM}]")
    mat = companion_matrix(PRIMITIVE_POLYS[s])
    if mat_order(mat) != (1 << s) - 1:
        raise RuntimeError(f"primitive polynomial table entry for degree {s} is wrong")
    return mat


def random_invertible(s: int, rng: np.random.Generator) -> BitMatrix:
    """Uniform sample from GL(s, 2) by rejection; acceptance rate exceeds 0.288."""
    if s < 1:
        raise ValueError("block size must be positive")
    while True:
        rows = tuple(int(v) for v in rng.integers(0, 1 << s, size=s))
        mat = BitMatrix(s, s, rows)
        if mat_rank(mat) == s:
            return mat


def block_diag(blocks: Sequence[BitMatrix]) -> BitMatrix:
    n = sum(b.n_rows for b in blocks)
    rows = []
    offset = 0
    for b in blocks:
        if not b.is_square:
            raise ValueError("diagonal blocks must be square")
        rows.extend(r << offset for r in b.rows)
        offset += b.n_cols
    return BitMatrix(n, n, tuple(rows))


def is_lower_triangular(a: BitMatrix) -> bool:
    # entry (r, c) with c > r must vanish
    return all(row >> (r + 1) == 0 for r, row in enumerate(a.rows))
