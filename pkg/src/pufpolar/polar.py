"""Polar code construction from partial-order generators, encoding, membership."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _successors(i: int, n: int) -> list[int]:
    """Covering moves of the polar partial order on LSB-first index bits."""
    out = []
    for k in range(n):
        if not (i >> k) & 1:
            out.append(i | (1 << k))
        elif k + 1 < n and not (i >> (k + 1)) & 1:
            # move the set bit k one position toward the MSB
            out.append(i + (1 << k))
    return out


def expand_generators(n: int, generators: Iterable[int]) -> list[int]:
    """Upward closure of ``generators`` under the polar partial order."""
    N = 1 << n
    gens = list(generators)
    for g in gens:
        if not 0 <= g < N:
            raise ValueError(f"generator {g} out of range for n={n}")
    closed: set[int] = set()
    work = list(gens)
    while work:
        i = work.pop()
        if i in closed:
            continue
        closed.add(i)
        work.extend(j for j in _successors(i, n) if j not in closed)
    return sorted(closed)


def is_upward_closed(n: int, info_set: Iterable[int]) -> bool:
    members = set(info_set)
    return all(j in members for i in members for j in _successors(i, n))


@dataclass(frozen=True)
class CodeSpec:
    n: int
    info_set: tuple[int, ...]
    block_profile: tuple[int, ...]
    generators: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 1 <= self.n <= 16:
            raise ValueError("length exponent must be in [1, 16]")
        info = tuple(sorted(set(int(i) for i in self.info_set)))
        if len(info) != len(self.info_set):
            raise ValueError("duplicate information indices")
        if info and not (0 <= info[0] and info[-1] < self.N):
            raise ValueError("information index out of range")
        object.__setattr__(self, "info_set", info)
        profile = tuple(int(s) for s in self.block_profile)
        if any(s < 1 for s in profile) or sum(profile) != self.n:
            raise ValueError(f"block profile {profile} does not partition n={self.n}")
        object.__setattr__(self, "block_profile", profile)
        if not is_upward_closed(self.n, info):
            raise ValueError("information set is not closed under the partial order")

    @classmethod
    def from_generators(cls, n: int, generators: Sequence[int],
                        block_profile: Sequence[int] | None = None) -> "CodeSpec":
        info = expand_generators(n, generators)
        return cls(n, tuple(info), tuple(block_profile or (1,) * n), tuple(generators))

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def K(self) -> int:
        return len(self.info_set)

    @property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    @property
    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[list(self.info_set)] = True
        return mask

    def to_dict(self) -> dict:
        d = {"n": self.n, "block_profile": list(self.block_profile)}
        if self.generators is not None:
            d["generators"] = list(self.generators)
        d["info_set"] = list(self.info_set)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        n = int(d["n"])
        profile = d.get("block_profile")
        if "info_set" in d:
            code = cls(n, tuple(d["info_set"]), tuple(profile or (1,) * n),
                       tuple(d["generators"]) if "generators" in d else None)
            if "generators" in d and list(code.info_set) != expand_generators(n, d["generators"]):
                raise ValueError("info_set disagrees with the listed generators")
            return code
        if "generators" in d:
            return cls.from_generators(n, d["generators"], profile)
        raise ValueError("code spec needs 'info_set' or 'generators'")


def load_code(path: str | Path) -> CodeSpec:
    return CodeSpec.from_dict(json.loads(Path(path).read_text()))


def save_code(code: CodeSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(code.to_dict(), indent=2) + "\n")


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x -> x G_N over GF(2) along the last axis (G_N is its own inverse)."""
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    lead = x.shape[:-1]
    d = 1
    while d < N:
        v = x.reshape(*lead, N // (2 * d), 2, d)
        v[..., 0, :] ^= v[..., 1, :]
        d *= 2
    return x


def encode(code: CodeSpec, m: np.ndarray) -> np.ndarray:
    """Encode message(s) of shape (..., K) into codeword(s) of shape (..., N)."""
    m = np.asarray(m, dtype=np.uint8)
    if m.shape[-1] != code.K:
        raise ValueError(f"message length {m.shape[-1]} != K={code.K}")
    u = np.zeros(m.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., list(code.info_set)] = m
    return polar_transform(u)


def extract_message(code: CodeSpec, c: np.ndarray) -> np.ndarray:
    return polar_transform(c)[..., list(code.info_set)]


def is_codeword(code: CodeSpec, c: np.ndarray) -> bool:
    c = np.asarray(c, dtype=np.uint8)
    if c.shape[-1] != code.N:
        raise ValueError(f"vector length {c.shape[-1]} != N={code.N}")
    u = polar_transform(c)
    return not np.any(u[..., ~code.info_mask])
