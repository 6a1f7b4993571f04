"""Serial automorphism ensemble decoding and greedy ensemble selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .automorphisms import EnsembleSpec, Permutation, compose, sample_ensemble
from .decoder import DecodeTree, _load_channel, _prepare, _run_program, decode_codewords
from .polar import encode


@dataclass
class AedResult:
    codeword: np.ndarray
    best_index: int
    metrics: np.ndarray
    attempts: int


def correlation(c: np.ndarray, llr: np.ndarray):
    """sum_i (1 - 2 c_i) l_i; larger means more likely on the BSC."""
    return (np.where(np.asarray(c) == 0, 1, -1) * np.asarray(llr)).sum(axis=-1)


def ae_decode(llr, ensemble: EnsembleSpec, tree: DecodeTree, early_exit: bool = False) -> AedResult:
    """Decode one frame with M serial SC attempts on permuted inputs.

    Inputs are routed through the ensemble's own interleaver wiring; the
    candidate with the largest correlation wins, the smallest index on ties.
    """
    llr = np.asarray(llr)
    if llr.shape != (tree.N,):
        raise ValueError(f"expected a single frame of length {tree.N}")
    if ensemble.M < 1:
        raise ValueError("empty ensemble")
    best = None
    metrics = []
    ceiling = np.abs(llr).sum()
    for j, y_perm in enumerate(ensemble.forward(llr)):
        c_perm, _ = decode_codewords(tree, y_perm)
        # the metric is permutation invariant, so score before de-interleaving
        metric = correlation(c_perm, y_perm)
        metrics.append(metric)
        if best is None or metric > metrics[best[0]]:
            best = (j, c_perm)
        if early_exit and metric == ceiling:
            break
    j_best, c_perm = best
    c = ensemble.backward(j_best, c_perm)
    return AedResult(c, j_best, np.array(metrics), len(metrics))


@numba.njit(cache=True)
def _aed_frames(prog, llrs, tables, halve, sat, early_exit, out_c, out_j):
    F, N = llrs.shape
    M = tables.shape[0]
    alpha = np.zeros(2 * N, dtype=llrs.dtype)
    beta = np.zeros((2, 2 * N), dtype=np.uint8)
    y = np.empty(N, dtype=llrs.dtype)
    best_c = np.empty(N, dtype=np.uint8)
    saturations = 0
    for f in range(F):
        ceiling = 0.0
        for i in range(N):
            ceiling += abs(llrs[f, i])
        best_metric = -np.inf
        best_j = 0
        for j in range(M):
            for i in range(N):
                y[tables[j, i]] = llrs[f, i]
            saturations += _load_channel(alpha, y, N, halve, sat)
            saturations += _run_program(prog, alpha, beta)
            metric = 0.0
            for k in range(N):
                if beta[0, N + k]:
                    metric -= y[k]
                else:
                    metric += y[k]
            if metric > best_metric:
                best_metric = metric
                best_j = j
                for i in range(N):
                    best_c[i] = beta[0, N + i]
            if early_exit and metric == ceiling:
                break
        for i in range(N):
            out_c[f, i] = best_c[tables[best_j, i]]
        out_j[f] = best_j
    return saturations


def ae_decode_batch(llrs, tables: np.ndarray, tree: DecodeTree,
                    early_exit: bool = False) -> tuple[np.ndarray, np.ndarray, int]:
    """Frame-batched AED on precomputed permutation tables (M, N).

    Returns (codewords, winning indices, saturation events).
    """
    arr = np.atleast_2d(_prepare(tree, llrs))
    tables = np.ascontiguousarray(tables, dtype=np.int64)
    if tables.ndim != 2 or tables.shape[1] != tree.N or tables.shape[0] < 1:
        raise ValueError("permutation tables must have shape (M, N) with M >= 1")
    out_c = np.empty(arr.shape, dtype=np.uint8)
    out_j = np.empty(arr.shape[0], dtype=np.int64)
    sats = _aed_frames(tree.program, np.ascontiguousarray(arr), tables, int(tree.root.halve),
                       tree.root.sat, early_exit, out_c, out_j)
    return out_c, out_j, int(sats)


@numba.njit(cache=True)
def _coverage(prog, llrs, tables, truths, halve, sat, out):
    F, N = llrs.shape
    P = tables.shape[0]
    alpha = np.zeros(2 * N, dtype=llrs.dtype)
    beta = np.zeros((2, 2 * N), dtype=np.uint8)
    y = np.empty(N, dtype=llrs.dtype)
    for f in range(F):
        for p in range(P):
            for i in range(N):
                y[tables[p, i]] = llrs[f, i]
            _load_channel(alpha, y, N, halve, sat)
            _run_program(prog, alpha, beta)
            ok = True
            for i in range(N):
                if beta[0, N + tables[p, i]] != truths[f, i]:
                    ok = False
                    break
            out[f, p] = ok


def coverage_matrix(llrs, truths, tables: np.ndarray, tree: DecodeTree) -> np.ndarray:
    """Boolean (frames, permutations): whether a single permuted SC attempt
    returns the true codeword."""
    arr = np.atleast_2d(_prepare(tree, llrs))
    truths = np.ascontiguousarray(np.atleast_2d(truths), dtype=np.uint8)
    tables = np.ascontiguousarray(tables, dtype=np.int64)
    out = np.zeros((arr.shape[0], tables.shape[0]), dtype=np.bool_)
    _coverage(tree.program, np.ascontiguousarray(arr), tables, truths, int(tree.root.halve),
              tree.root.sat, out)
    return out


def _greedy_pick(gains: np.ndarray, banned: set[int]) -> int:
    order = np.argsort(-gains, kind="stable")
    for idx in order:
        if int(idx) not in banned:
            return int(idx)
    raise ValueError("pool exhausted")


def greedy_select(pool: Sequence[Permutation], llrs, truths, M: int, tree: DecodeTree,
                  meta: dict | None = None) -> EnsembleSpec:
    """Build an independent ensemble by greedy frame coverage.

    Starting from the identity, repeatedly add the pool permutation that
    corrects the most training frames not yet corrected by a chosen member;
    ties go to the smallest pool index and tables already chosen are skipped.
    """
    N = tree.N
    ident = Permutation.identity(N)
    distinct = [p for p in pool if p != ident]
    if len(set(distinct)) < M - 1:
        raise ValueError(f"pool has {len(set(distinct))} usable permutations, need {M - 1}")
    tables = np.stack([ident.table] + [p.table for p in pool])
    cov = coverage_matrix(llrs, truths, tables, tree)
    covered = cov[:, 0].copy()
    chosen = [ident]
    banned = {i for i, p in enumerate(pool) if p == ident}
    while len(chosen) < M:
        gains = (cov[:, 1:] & ~covered[:, None]).sum(axis=0)
        k = _greedy_pick(gains, banned)
        chosen.append(pool[k])
        covered |= cov[:, 1 + k]
        banned |= {i for i, p in enumerate(pool) if p == pool[k]}
    info = dict(meta or {})
    info.update(selection="greedy", training_frames=int(cov.shape[0]),
                training_covered=int(covered.sum()))
    return EnsembleSpec("independent", N, M, chosen, meta=info)


def greedy_select_cascaded(pool: Sequence[Permutation], llrs, truths, m: int,
                           tree: DecodeTree, meta: dict | None = None) -> EnsembleSpec:
    """Greedy stage-by-stage choice of cascade bases.

    Adding base b to stages generating set S contributes the members b o q for
    q in S; the base whose new members cover most uncovered frames wins.
    """
    N = tree.N
    current = [Permutation.identity(N)]
    covered = coverage_matrix(llrs, truths, current[0].table[None, :], tree)[:, 0]
    bases: list[Permutation] = []
    banned: set[int] = set()
    for _ in range(m):
        gains = np.full(len(pool), -1, dtype=np.int64)
        new_cov = {}
        seen = set(current)
        for k, b in enumerate(pool):
            if k in banned:
                continue
            extended = [compose(b, q) for q in current]
            if seen & set(extended) or len(set(extended)) < len(extended):
                banned.add(k)
                continue
            cov = coverage_matrix(llrs, truths, np.stack([p.table for p in extended]), tree)
            anyc = cov.any(axis=1)
            new_cov[k] = anyc
            gains[k] = int((anyc & ~covered).sum())
        if not new_cov:
            raise ValueError("no pool permutation extends the cascade without collisions")
        k = _greedy_pick(gains, banned)
        bases.append(pool[k])
        banned.add(k)
        covered |= new_cov[k]
        current = current + [compose(pool[k], q) for q in current]
    info = dict(meta or {})
    info.update(selection="greedy", training_frames=int(len(covered)),
                training_covered=int(covered.sum()))
    return EnsembleSpec("cascaded", N, 1 << m, bases, meta=info)


def greedy_select_recursive(pool: Sequence[Permutation], llrs, truths, M: int,
                            tree: DecodeTree, meta: dict | None = None) -> EnsembleSpec:
    """Pick the recursive base whose first M powers cover the most frames."""
    N = tree.N
    best_k, best_gain = None, -1
    for k, b in enumerate(pool):
        ens = EnsembleSpec("recursive", N, M, [b])
        cov = coverage_matrix(llrs, truths, ens.tables(), tree)
        gain = int(cov.any(axis=1).sum())
        if gain > best_gain:
            best_k, best_gain = k, gain
    if best_k is None:
        raise ValueError("empty pool")
    info = dict(meta or {})
    info.update(selection="greedy", training_frames=int(np.atleast_2d(truths).shape[0]),
                training_covered=best_gain)
    return EnsembleSpec("recursive", N, M, [pool[best_k]], meta=info)


def training_set(code, eps: float, frames: int, rng: np.random.Generator):
    """Random codewords through a BSC(eps); returns (LLRs, codewords)."""
    c = encode(code, rng.integers(0, 2, (frames, code.K), dtype=np.uint8))
    e = (rng.random(c.shape) < eps).astype(np.uint8)
    return 1 - 2 * (c ^ e).astype(np.int32), c


def optimize_ensemble(code, tree: DecodeTree, architecture: str, M: int,
                      rng: np.random.Generator, train_eps: float = 0.26,
                      train_frames: int = 100_000, pool_size: int = 256,
                      seed: int | None = None) -> EnsembleSpec:
    """Sample a candidate pool, draw training frames, and run the greedy pick
    matching the architecture."""
    if architecture == "recursive":
        pool = [sample_ensemble(code, "recursive", 1, rng).bases[0] for _ in range(pool_size)]
    else:
        pool = sample_ensemble(code, "independent", pool_size + 1, rng).bases[1:]
    llrs, truths = training_set(code, train_eps, train_frames, rng)
    meta = {"train_eps": train_eps, "pool_size": pool_size}
    if architecture == "independent":
        ens = greedy_select(pool, llrs, truths, M, tree, meta)
    elif architecture == "cascaded":
        if M & (M - 1):
            raise ValueError("cascaded ensembles need M to be a power of two")
        ens = greedy_select_cascaded(pool, llrs, truths, M.bit_length() - 1, tree, meta)
    elif architecture == "recursive":
        ens = greedy_select_recursive(pool, llrs, truths, M, tree, meta)
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    ens.seed = seed
    return ens
