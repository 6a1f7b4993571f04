"""Affine index permutations and the interleaver families built from them.

A permutation ``p`` reorders a vector by ``out[p(i)] = x[i]``. Composition
follows ``(p o q)(i) = p(q(i))``, so applying ``p o q`` equals applying ``q``
first and ``p`` second.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import gf2
from .gf2 import BitMatrix
from .polar import CodeSpec

ARCHITECTURES = ("independent", "cascaded", "recursive")


class Permutation:
    __slots__ = ("table",)

    def __init__(self, table):
        t = np.array(table, dtype=np.int64)
        if t.ndim != 1 or not np.array_equal(np.sort(t), np.arange(t.size)):
            raise ValueError("table is not a bijection on [0, N)")
        t.setflags(write=False)
        self.table = t

    @classmethod
    def identity(cls, N: int) -> "Permutation":
        return cls(np.arange(N))

    @property
    def N(self) -> int:
        return self.table.size

    def __call__(self, i):
        return self.table[i]

    def __len__(self):
        return self.N

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash(self.table.tobytes())

    def __repr__(self):
        head = ", ".join(str(v) for v in self.table[:16])
        return f"Permutation([{head}{', ...' if self.N > 16 else ''}])"

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.table, np.arange(self.N)))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Reorder the last axis so that ``out[..., p(i)] = x[..., i]``."""
        x = np.asarray(x)
        out = np.empty_like(x)
        out[..., self.table] = x
        return out

    def unapply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.table]

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.table)
        inv[self.table] = np.arange(self.N)
        return Permutation(inv)

    def matrix(self) -> np.ndarray:
        """N x N 0/1 matrix P with P x = apply(x)."""
        P = np.zeros((self.N, self.N), dtype=np.uint8)
        P[self.table, np.arange(self.N)] = 1
        return P


def compose(p: Permutation, q: Permutation) -> Permutation:
    if p.N != q.N:
        raise ValueError("cannot compose permutations of different length")
    return Permutation(p.table[q.table])


def perm_power(p: Permutation, j: int) -> Permutation:
    if j < 0:
        raise ValueError("power must be non-negative")
    result = Permutation.identity(p.N)
    base = p
    while j:
        if j & 1:
            result = compose(base, result)
        base = compose(base, base)
        j >>= 1
    return result


def perm_order(p: Permutation) -> int:
    """LCM of the cycle lengths, i.e. the smallest j >= 1 with p^j = id."""
    seen = np.zeros(p.N, dtype=bool)
    order = 1
    for start in range(p.N):
        if seen[start]:
            continue
        length = 0
        i = start
        while not seen[i]:
            seen[i] = True
            i = p.table[i]
            length += 1
        order = math.lcm(order, length)
    return order


@dataclass(frozen=True)
class AffineMap:
    A: BitMatrix
    b: int = 0

    def __post_init__(self):
        if not self.A.is_square:
            raise ValueError("affine map needs a square matrix")
        if not 0 <= self.b < (1 << self.A.n_rows):
            raise ValueError("translation wider than the matrix")


def perm_from_affine(amap: AffineMap, n: int | None = None) -> Permutation:
    n = amap.A.n_rows if n is None else n
    if amap.A.n_rows != n:
        raise ValueError(f"matrix is {amap.A.n_rows}x{amap.A.n_rows}, expected n={n}")
    if not gf2.is_invertible(amap.A):
        raise gf2.SingularMatrixError("affine map with a singular matrix is not a permutation")
    return Permutation([amap.A.apply(i) ^ amap.b for i in range(1 << n)])


def build_bdl_perm(blocks: Sequence[BitMatrix], profile: Sequence[int]) -> Permutation:
    """Permutation of A = diag(blocks); block 0 acts on the least significant bits."""
    if [b.n_rows for b in blocks] != list(profile):
        raise ValueError(f"block sizes {[b.n_rows for b in blocks]} do not match profile {list(profile)}")
    for b in blocks:
        if not gf2.is_invertible(b):
            raise gf2.SingularMatrixError("BDL block is singular")
    return perm_from_affine(AffineMap(gf2.block_diag(blocks)))


def kron_perm(perms: Sequence[Permutation]) -> Permutation:
    """Permutation whose matrix is the Kronecker product of the given ones,
    listed from the most significant index digit down."""
    table = np.zeros(1, dtype=np.int64)
    for p in perms:
        table = (table[:, None] * p.N + p.table[None, :]).ravel()
    return Permutation(table)


def blockwise_expand(sigma: Permutation, b: int) -> Permutation:
    """Move blocks of ``b`` neighbouring positions together according to sigma."""
    if b < 1 or b & (b - 1):
        raise ValueError("block size must be a power of two")
    offs = np.arange(b)
    return Permutation((sigma.table[:, None] * b + offs[None, :]).ravel())


def is_absorbed(amap: AffineMap, profile: Sequence[int] | None = None) -> bool:
    """True for lower-triangular affine maps, which SC decoding absorbs."""
    if profile is not None and sum(profile) != amap.A.n_rows:
        raise ValueError("profile does not match the matrix size")
    return gf2.is_lower_triangular(amap.A)


def first_block_equivariant(code: CodeSpec) -> bool:
    """Whether every size-2^s0 constituent is decoded by an ML leaf."""
    from .decoder import build_tree

    b = 1 << code.block_profile[0]
    return all(leaf.size >= b for leaf in build_tree(code).root.leaves())


# -- ensembles ----------------------------------------------------------------


@dataclass
class EnsembleSpec:
    """Permutation set of a serial AED decoder and how it is wired.

    ``bases`` holds all M members for ``independent`` (identity first), the m
    stage permutations for ``cascaded`` and the single base for ``recursive``.
    ``blocks`` optionally records the BDL blocks each base came from.
    """

    architecture: str
    N: int
    M: int
    bases: list[Permutation]
    blocks: list[list[BitMatrix]] | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.M < 1:
            raise ValueError("ensemble needs at least one member")
        if any(p.N != self.N for p in self.bases):
            raise ValueError("base length differs from N")
        if self.architecture == "independent":
            if len(self.bases) != self.M:
                raise ValueError("independent ensemble must list all M permutations")
            if not self.bases[0].is_identity():
                raise ValueError("member 0 must be the identity")
        elif self.architecture == "cascaded":
            if 1 << len(self.bases) != self.M:
                raise ValueError("cascaded ensemble needs M = 2^(number of stages)")
        else:
            if len(self.bases) != 1:
                raise ValueError("recursive ensemble has exactly one base")
            if self.M > perm_order(self.bases[0]):
                raise ValueError("M exceeds the order of the recursive base")

    def member(self, j: int) -> Permutation:
        if not 0 <= j < self.M:
            raise IndexError(j)
        if self.architecture == "independent":
            return self.bases[j]
        if self.architecture == "recursive":
            return perm_power(self.bases[0], j)
        # stage i is applied first for smaller i, matching the cascade wiring
        p = Permutation.identity(self.N)
        for i, base in enumerate(self.bases):
            if (j >> i) & 1:
                p = compose(base, p)
        return p

    def members(self) -> list[Permutation]:
        if self.architecture == "recursive":
            out = [Permutation.identity(self.N)]
            for _ in range(1, self.M):
                out.append(compose(self.bases[0], out[-1]))
            return out
        return [self.member(j) for j in range(self.M)]

    def tables(self) -> np.ndarray:
        return np.stack([p.table for p in self.members()])

    # realizations as the hardware would route them

    def forward(self, y: np.ndarray) -> Iterator[np.ndarray]:
        """Yield pi_j(y) for j = 0..M-1 via the architecture's own wiring."""
        if self.architecture == "independent":
            for p in self.bases:
                yield p.apply(y)
        elif self.architecture == "cascaded":
            for j in range(self.M):
                v = y
                for i, base in enumerate(self.bases):
                    if (j >> i) & 1:
                        v = base.apply(v)
                yield v
        else:
            v = y
            yield v
            for _ in range(1, self.M):
                v = self.bases[0].apply(v)
                yield v

    def backward(self, j: int, c: np.ndarray) -> np.ndarray:
        """Undo pi_j on a decoded vector."""
        if self.architecture == "independent":
            return self.bases[j].unapply(c)
        if self.architecture == "cascaded":
            for i in reversed(range(len(self.bases))):
                if (j >> i) & 1:
                    c = self.bases[i].unapply(c)
            return c
        # recursive: j passes through the single de-interleaver
        for _ in range(j):
            c = self.bases[0].unapply(c)
        return c

    def to_dict(self) -> dict:
        d = {"architecture": self.architecture, "N": self.N, "M": self.M, "seed": self.seed,
             "bases": [[int(v) for v in p.table] for p in self.bases]}
        if self.blocks is not None:
            d["blocks"] = [[list(b.rows) for b in blks] for blks in self.blocks]
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        bases = [Permutation(t) for t in d["bases"]]
        blocks = None
        if d.get("blocks") is not None:
            blocks = [[BitMatrix(len(rows), len(rows), tuple(rows)) for rows in blks]
                      for blks in d["blocks"]]
            for p, blks in zip(bases, blocks):
                if build_bdl_perm(blks, [b.n_rows for b in blks]) != p:
                    raise ValueError("stored blocks disagree with the stored table")
        return cls(d["architecture"], int(d["N"]), int(d["M"]), bases, blocks, d.get("seed"),
                   d.get("meta", {}))


def save_ensemble(ens: EnsembleSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ens.to_dict()) + "\n")


def load_ensemble(path: str | Path) -> EnsembleSpec:
    return EnsembleSpec.from_dict(json.loads(Path(path).read_text()))


def random_bdl_blocks(profile: Sequence[int], rng: np.random.Generator,
                      first_identity: bool) -> list[BitMatrix]:
    blocks = [gf2.random_invertible(s, rng) for s in profile]
    if first_identity:
        blocks[0] = BitMatrix.identity(profile[0])
    return blocks


def _useful(blocks: Sequence[BitMatrix]) -> bool:
    return not is_absorbed(AffineMap(gf2.block_diag(blocks)))


def singer_blocks(profile: Sequence[int], rng: np.random.Generator | None,
                  first_identity: bool) -> list[BitMatrix]:
    """Singer cycles per block, conjugated by random invertible matrices when an
    rng is given (conjugation keeps the order 2^s - 1)."""
    blocks = []
    for k, s in enumerate(profile):
        if k == 0 and first_identity:
            blocks.append(BitMatrix.identity(s))
            continue
        S = gf2.singer_matrix(s)
        if rng is not None:
            P = gf2.random_invertible(s, rng)
            S = P @ S @ gf2.mat_inverse(P)
        blocks.append(S)
    return blocks


def sample_ensemble(code: CodeSpec, architecture: str, M: int, rng: np.random.Generator,
                    first_identity: bool | None = None, seed: int | None = None,
                    max_tries: int = 1000) -> EnsembleSpec:
    """Random BDL ensemble for the code's block profile.

    Members absorbed by SC (lower-triangular maps) and duplicate permutations
    are resampled.
    """
    profile = list(code.block_profile)
    if first_identity is None:
        first_identity = first_block_equivariant(code)
    N = code.N
    ident = Permutation.identity(N)
    if architecture == "independent":
        members, blocks = [ident], [[BitMatrix.identity(s) for s in profile]]
        seen = {ident}
        tries = 0
        while len(members) < M:
            tries += 1
            if tries > max_tries * M:
                raise RuntimeError("could not find enough distinct permutations")
            blks = random_bdl_blocks(profile, rng, first_identity)
            p = build_bdl_perm(blks, profile)
            if p in seen or not _useful(blks):
                continue
            seen.add(p)
            members.append(p)
            blocks.append(blks)
        return EnsembleSpec("independent", N, M, members, blocks, seed)
    if architecture == "cascaded":
        if M & (M - 1):
            raise ValueError("cascaded ensembles need M to be a power of two")
        m = M.bit_length() - 1
        bases, blocks = [], []
        current = [ident]
        for _ in range(m):
            for _attempt in range(max_tries):
                blks = random_bdl_blocks(profile, rng, first_identity)
                if not _useful(blks):
                    continue
                base = build_bdl_perm(blks, profile)
                extended = current + [compose(base, q) for q in current]
                if len(set(extended)) == len(extended):
                    break
            else:
                raise RuntimeError("could not extend the cascade without collisions")
            bases.append(base)
            blocks.append(blks)
            current = extended
        return EnsembleSpec("cascaded", N, M, bases, blocks, seed)
    if architecture == "recursive":
        blks = singer_blocks(profile, rng, first_identity)
        base = build_bdl_perm(blks, profile)
        order = perm_order(base)
        if M > order:
            raise ValueError(f"M={M} exceeds the recursive base order {order}")
        return EnsembleSpec("recursive", N, M, [base], [blks], seed)
    raise ValueError(f"unknown architecture {architecture!r}")
