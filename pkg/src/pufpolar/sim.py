"""Seeded Monte Carlo BLER sweeps over the PUF key-storage pipeline.

Every frame draws its noise from its own counter-based seed (master seed,
epsilon index, frame index), and frames are grouped into fixed chunks that
are accumulated strictly in chunk order. The stopping point, and with it the
whole CSV, therefore does not depend on how many workers ran the chunks.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Callable

import numpy as np

from .aed import ae_decode_batch
from .automorphisms import ARCHITECTURES, EnsembleSpec, load_ensemble, sample_ensemble
from .decoder import DecodeTree, make_decoder
from .polar import CodeSpec, encode, load_code

WORKERS_ENV = "PUFPOLAR_WORKERS"
CSV_COLUMNS = ("epsilon", "frames", "errors", "bler", "ci_low", "ci_high", "seconds", "saturations")
_Z95 = NormalDist().inv_cdf(0.975)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


def ci_bounds(errors: int, frames: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if frames < 1 or not 0 <= errors <= frames:
        raise ValueError("need 0 <= errors <= frames and frames >= 1")
    p = errors / frames
    z2 = z * z
    denom = 1 + z2 / frames
    centre = (p + z2 / (2 * frames)) / denom
    half = z * math.sqrt(p * (1 - p) / frames + z2 / (4 * frames * frames)) / denom
    low = 0.0 if errors == 0 else max(0.0, centre - half)
    high = 1.0 if errors == frames else min(1.0, centre + half)
    return low, high


@dataclass
class ExperimentConfig:
    """One BLER sweep.

    ``architecture`` is ``"sc"`` for a single decoder or an ensemble
    architecture; an explicit ``ensemble`` file overrides sampling. By default
    every frame is a fresh enrollment; ``enroll_once`` keeps one device and
    secret per epsilon, and ``all_zero`` fixes both to zero.
    """

    code: str
    epsilons: list[float]
    seed: int
    architecture: str = "sc"
    ensemble: str | None = None
    M: int = 32
    ensemble_seed: int | None = None
    q_max: int | None = 3
    segments: int = 1
    min_errors: int = 100
    max_frames: int = 10_000_000
    chunk_frames: int = 1000
    workers: int | None = None
    output: str | None = None
    all_zero: bool = False
    enroll_once: bool = False
    timing: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.min_errors < 1:
            raise ValueError("min_errors must be at least 1")
        if self.max_frames < 1 or self.chunk_frames < 1:
            raise ValueError("frame budgets must be positive")
        if any(not 0.0 <= e < 0.5 for e in self.epsilons):
            raise ValueError("epsilon values must lie in [0, 0.5)")
        if self.architecture != "sc" and self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.segments < 1:
            raise ValueError("segments must be positive")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        d = json.loads(Path(path).read_text())
        base = Path(path).parent
        for key in ("code", "ensemble", "output"):
            if d.get(key) is not None and not Path(d[key]).is_absolute():
                d[key] = str(base / d[key])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")


@dataclass
class SweepRow:
    epsilon: float
    frames: int
    errors: int
    bler: float
    ci_low: float
    ci_high: float
    seconds: float
    saturations: int

    def cells(self) -> list[str]:
        return [repr(float(self.epsilon)), str(self.frames), str(self.errors),
                f"{self.bler:.6e}", f"{self.ci_low:.6e}", f"{self.ci_high:.6e}",
                f"{self.seconds:.3f}", str(self.saturations)]


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.cells())
    return buf.getvalue()


def read_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
        rows = []
        for rec in reader:
            try:
                rows.append(SweepRow(float(rec["epsilon"]), int(rec["frames"]), int(rec["errors"]),
                                     float(rec["bler"]), float(rec["ci_low"]),
                                     float(rec["ci_high"]), float(rec["seconds"]),
                                     int(rec["saturations"])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed row {rec}") from exc
    return rows


# -- seeding ------------------------------------------------------------------


def frame_seed(seed: int, eps_idx: int, frame_idx: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(eps_idx, 1, frame_idx))


def enrollment_seed(seed: int, eps_idx: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(eps_idx, 0))


# -- simulation context -------------------------------------------------------


@dataclass
class _Context:
    code: CodeSpec
    tree: DecodeTree
    tables: np.ndarray
    segments: int


@dataclass
class _Enrollment:
    secret: np.ndarray    # (segments, K)
    codeword: np.ndarray  # (segments * N,)
    x_star: np.ndarray
    w: np.ndarray


_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _CTX
    _CTX = ctx


def _enroll(ctx: _Context, rng: np.random.Generator | None) -> _Enrollment:
    """Random secret and golden response; all-zero when ``rng`` is None."""
    n_cells = ctx.segments * ctx.code.N
    if rng is None:
        secret = np.zeros((ctx.segments, ctx.code.K), dtype=np.uint8)
        x_star = np.zeros(n_cells, dtype=np.uint8)
    else:
        secret = rng.integers(0, 2, (ctx.segments, ctx.code.K), dtype=np.uint8)
        x_star = rng.integers(0, 2, n_cells, dtype=np.uint8)
    c = encode(ctx.code, secret).reshape(-1)
    return _Enrollment(secret, c, x_star, c ^ x_star)


def _simulate_chunk(eps: float, eps_idx: int, seed: int, start: int, count: int,
                    fixed: _Enrollment | None, all_zero: bool) -> tuple[int, int]:
    """Activate ``count`` frames; returns (frame errors, saturation events).

    Without a ``fixed`` enrollment each frame enrolls a fresh secret and golden
    response from its own seed before the noisy readout.
    """
    ctx = _CTX
    N, S = ctx.code.N, ctx.segments
    y = np.empty((count, S * N), dtype=np.uint8)
    c = np.empty((count, S * N), dtype=np.uint8)
    for k in range(count):
        rng = np.random.default_rng(frame_seed(seed, eps_idx, start + k))
        enr = fixed or _enroll(ctx, None if all_zero else rng)
        e = (rng.random(S * N) < eps).astype(np.uint8)
        y[k] = (enr.x_star ^ e) ^ enr.w
        c[k] = enr.codeword
        if not np.array_equal(y[k], c[k] ^ e):
            raise AssertionError("fuzzy commitment identity y = c xor e violated")
    llr = (1 - 2 * y.astype(np.int32)).reshape(count * S, N)
    c_hat, _, sats = ae_decode_batch(llr, ctx.tables, ctx.tree)
    wrong = np.any(c_hat.reshape(count, S * N) != c, axis=1)
    return int(wrong.sum()), sats


def build_context(cfg: ExperimentConfig) -> tuple[_Context, EnsembleSpec | None]:
    code = load_code(cfg.code)
    tree = make_decoder(code, cfg.q_max)
    ens = None
    if cfg.ensemble is not None:
        ens = load_ensemble(cfg.ensemble)
        if ens.N != code.N:
            raise ValueError("ensemble length does not match the code")
    elif cfg.architecture != "sc":
        rng = np.random.default_rng(cfg.ensemble_seed)
        ens = sample_ensemble(code, cfg.architecture, cfg.M, rng, seed=cfg.ensemble_seed)
    tables = ens.tables() if ens is not None else np.arange(code.N, dtype=np.int64)[None, :]
    return _Context(code, tree, tables, cfg.segments), ens


def run_sweep(cfg: ExperimentConfig,
              progress: Callable[[SweepRow], None] | None = None) -> list[SweepRow]:
    ctx, _ = build_context(cfg)
    workers = cfg.workers or default_workers()
    pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ctx,)) \
        if workers > 1 else None
    if pool is None:
        _init_worker(ctx)
    rows = []
    try:
        for eps_idx, eps in enumerate(cfg.epsilons):
            t0 = time.perf_counter()
            fixed = None
            if cfg.enroll_once:
                rng = np.random.default_rng(enrollment_seed(cfg.seed, eps_idx))
                fixed = _enroll(ctx, None if cfg.all_zero else rng)
            frames, errors, sats = _run_point(pool, workers, cfg, eps, eps_idx, fixed)
            lo, hi = ci_bounds(errors, frames)
            seconds = time.perf_counter() - t0 if cfg.timing else 0.0
            row = SweepRow(eps, frames, errors, errors / frames, lo, hi, seconds, sats)
            rows.append(row)
            if progress is not None:
                progress(row)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    if cfg.output is not None:
        Path(cfg.output).write_text(rows_to_csv(rows))
    return rows


def _run_point(pool, workers: int, cfg: ExperimentConfig, eps: float, eps_idx: int,
               fixed: _Enrollment | None) -> tuple[int, int, int]:
    n_chunks = -(-cfg.max_frames // cfg.chunk_frames)

    def bounds(i: int) -> tuple[int, int]:
        start = i * cfg.chunk_frames
        return start, min(cfg.chunk_frames, cfg.max_frames - start)

    frames = errors = sats = 0
    pending: dict[int, Future] = {}
    nxt = 0
    for i in range(n_chunks):
        if pool is None:
            err, sat = _simulate_chunk(eps, eps_idx, cfg.seed, *bounds(i), fixed, cfg.all_zero)
        else:
            while nxt < n_chunks and len(pending) < 2 * workers:
                pending[nxt] = pool.submit(_simulate_chunk, eps, eps_idx, cfg.seed,
                                           *bounds(nxt), fixed, cfg.all_zero)
                nxt += 1
            err, sat = pending.pop(i).result()
        frames += bounds(i)[1]
        errors += err
        sats += sat
        if errors >= cfg.min_errors:
            break
    for fut in pending.values():
        fut.cancel()
    return frames, errors, sats
