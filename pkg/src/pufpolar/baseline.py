"""Closed-form BLER of a BCH outer code with an inner repetition code.

The BCH decoder is modeled as bounded-distance: a block fails exactly when
more than ``t`` of its ``n`` symbols arrive in error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _log_binom_pmf(n: int, k: int, p: float) -> float:
    # p strictly inside (0, 1)
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))


def binom_tail(n: int, k0: int, p: float) -> float:
    """P[X >= k0] for X ~ Bin(n, p), summed in the log domain.

    Terms are scaled by the largest one before exponentiation and added with
    ``math.fsum``, so tails far below double-precision epsilon of 1 keep
    their relative accuracy.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    k0 = max(k0, 0)
    if k0 > n:
        return 0.0
    if k0 == 0:
        return 1.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    logs = [_log_binom_pmf(n, k, p) for k in range(k0, n + 1)]
    top = max(logs)
    return math.exp(top) * math.fsum(math.exp(v - top) for v in logs)


def rep_majority_flip(eps: float, r: int) -> float:
    """Bit error rate after majority decoding an r-fold repetition code."""
    if r < 1 or r % 2 == 0:
        raise ValueError("repetition factor must be a positive odd integer")
    return binom_tail(r, (r + 1) // 2, eps)


def bdd_bler(n: int, t: int, p: float) -> float:
    """Block error rate of a t-error-correcting bounded-distance decoder."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return binom_tail(n, t + 1, p)


@dataclass(frozen=True)
class ConcatSpec:
    n_bch: int = 1023
    k_bch: int = 318
    t: int = 91
    r: int = 7

    def __post_init__(self):
        if self.r < 1 or self.r % 2 == 0:
            raise ValueError("repetition factor must be a positive odd integer")
        if not 0 <= 2 * self.t < self.n_bch:
            raise ValueError("t must satisfy 0 <= t < n/2")
        if not 0 < self.k_bch <= self.n_bch:
            raise ValueError("invalid BCH dimension")

    @property
    def cells(self) -> int:
        """PUF cells consumed by one codeword."""
        return self.r * self.n_bch

    def cell_ratio(self, other_cells: int) -> float:
        return self.cells / other_cells


def concat_bler(eps: float, spec: ConcatSpec = ConcatSpec()) -> float:
    return bdd_bler(spec.n_bch, spec.t, rep_majority_flip(eps, spec.r))
