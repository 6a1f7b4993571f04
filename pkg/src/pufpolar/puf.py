"""Fuzzy-commitment key storage on a BSC PUF model.

Enrollment stores ``w = c xor x*``; activation reads ``x = x* xor e`` and
hands ``y = x xor w = c xor e`` to the decoder. Bit 0 maps to LLR +1 throughout.
Long secrets are split over independent code segments that must all decode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aed import ae_decode_batch
from .automorphisms import EnsembleSpec
from .decoder import DecodeTree
from .polar import CodeSpec, encode, extract_message, load_code


@dataclass
class PufDevice:
    """A PUF with a fixed golden response and i.i.d. readout flips.

    ``bias`` is the probability that a golden cell is 1; it only matters for
    debiasing experiments.
    """

    x_star: np.ndarray
    epsilon: float
    bias: float = 0.5

    def __post_init__(self):
        self.x_star = np.asarray(self.x_star, dtype=np.uint8)
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("flip probability must lie in [0, 0.5)")

    @classmethod
    def sample(cls, n_cells: int, epsilon: float, rng: np.random.Generator,
               bias: float = 0.5) -> "PufDevice":
        x_star = (rng.random(n_cells) < bias).astype(np.uint8)
        return cls(x_star, epsilon, bias)

    @property
    def n_cells(self) -> int:
        return self.x_star.size

    def flips(self, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(self.n_cells) < self.epsilon).astype(np.uint8)

    def read(self, rng: np.random.Generator) -> np.ndarray:
        return self.x_star ^ self.flips(rng)


@dataclass(frozen=True)
class SegmentedScheme:
    code: CodeSpec
    segments: int = 1

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("need at least one segment")

    @property
    def n_cells(self) -> int:
        return self.segments * self.code.N

    @property
    def k_total(self) -> int:
        return self.segments * self.code.K

    def split(self, v: np.ndarray, per: int) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.segments * per:
            raise ValueError(f"expected length {self.segments * per}, got {v.shape[-1]}")
        return v.reshape(v.shape[:-1] + (self.segments, per))


@dataclass
class HelperData:
    w: np.ndarray
    segment_length: int
    debias_mask: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {"segment_length": self.segment_length, "w": _to_hex(self.w)}
        if self.debias_mask is not None:
            d["n_pairs"] = int(self.debias_mask.size)
            d["debias_mask"] = _to_hex(self.debias_mask)
        return d

    @classmethod
    def from_dict(cls, d: dict, n_cells: int) -> "HelperData":
        mask = None
        if "debias_mask" in d:
            mask = _from_hex(d["debias_mask"], int(d["n_pairs"])).astype(bool)
        return cls(_from_hex(d["w"], n_cells), int(d["segment_length"]), mask)


def _to_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def _from_hex(text: str, length: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
    if bits.size < length or np.any(bits[length:]):
        raise ValueError("hex string does not encode the expected bit count")
    return bits[:length].copy()


def enroll(device: PufDevice, m: np.ndarray, scheme: SegmentedScheme,
           debias: bool = False) -> HelperData:
    """Encode each segment of the secret and mask it with the golden cells."""
    m = np.asarray(m, dtype=np.uint8)
    if m.shape != (scheme.k_total,):
        raise ValueError(f"secret length {m.size} != {scheme.k_total}")
    c = encode(scheme.code, scheme.split(m, scheme.code.K)).reshape(-1)
    if debias:
        mask, logical = vnpo_enroll(device.x_star, scheme.n_cells)
        return HelperData(c ^ logical, scheme.code.N, mask)
    if device.n_cells != scheme.n_cells:
        raise ValueError(f"device has {device.n_cells} cells, scheme needs {scheme.n_cells}")
    return HelperData(c ^ device.x_star, scheme.code.N)


def vnpo_enroll(raw: np.ndarray, n_needed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Von Neumann pair debiasing.

    Returns a per-pair keep mask and the logical bits (first cell of each kept
    pair). With ``n_needed`` only the first that many kept pairs are marked.
    """
    raw = np.asarray(raw, dtype=np.uint8)
    if raw.size % 2:
        raise ValueError("need an even number of raw cells")
    pairs = raw.reshape(-1, 2)
    keep = pairs[:, 0] != pairs[:, 1]
    if n_needed is not None:
        kept = np.flatnonzero(keep)
        if kept.size < n_needed:
            raise ValueError(f"only {kept.size} pairs survive debiasing, need {n_needed}")
        keep = np.zeros_like(keep)
        keep[kept[:n_needed]] = True
    elif not keep.any():
        raise ValueError("no pairs survive debiasing")
    return keep, pairs[keep, 0].copy()


def vnpo_activate_llr(b1: int, b2: int) -> int:
    """Combined LLR of a kept pair's logical bit, in {-2, 0, +2}."""
    return (1 - 2 * int(b1)) - (1 - 2 * int(b2))


def vnpo_pair_llrs(raw_read: np.ndarray, mask: np.ndarray) -> np.ndarray:
    pairs = np.asarray(raw_read, dtype=np.int32).reshape(-1, 2)[mask]
    return 2 * (pairs[:, 1] - pairs[:, 0])


def channel_llrs(y: np.ndarray) -> np.ndarray:
    return 1 - 2 * np.asarray(y, dtype=np.int32)


@dataclass
class Activation:
    message: np.ndarray
    codewords: np.ndarray
    segment_ok: np.ndarray | None
    saturations: int

    @property
    def success(self) -> bool | None:
        return None if self.segment_ok is None else bool(self.segment_ok.all())


def decode_segments(llrs: np.ndarray, scheme: SegmentedScheme, tree: DecodeTree,
                    ensemble: EnsembleSpec | None = None):
    """Decode the concatenated channel LLRs segment by segment."""
    seg = scheme.split(llrs, scheme.code.N)
    seg = seg.reshape(-1, scheme.code.N)
    tables = ensemble.tables() if ensemble is not None else np.arange(scheme.code.N)[None, :]
    c_hat, _, sats = ae_decode_batch(seg, tables, tree)
    return c_hat.reshape(llrs.shape[:-1] + (-1,)), sats


def activate(device: PufDevice, helper: HelperData, scheme: SegmentedScheme, tree: DecodeTree,
             rng: np.random.Generator, ensemble: EnsembleSpec | None = None,
             secret: np.ndarray | None = None) -> Activation:
    """One noisy readout followed by per-segment decoding.

    When the enrolled ``secret`` is supplied the result carries per-segment
    success flags, and the identity ``y = c xor e`` is checked.
    """
    if helper.debias_mask is None:
        e = device.flips(rng)
        y = (device.x_star ^ e) ^ helper.w
        llr = channel_llrs(y)
        if secret is not None:
            c = encode(scheme.code, scheme.split(secret, scheme.code.K)).reshape(-1)
            if not np.array_equal(y, c ^ e):
                raise AssertionError("fuzzy commitment identity y = c xor e violated")
    else:
        raw = device.read(rng)
        llr = vnpo_pair_llrs(raw, helper.debias_mask) * channel_llrs(helper.w)
    c_hat, sats = decode_segments(llr, scheme, tree, ensemble)
    m_hat = extract_message(scheme.code, scheme.split(c_hat, scheme.code.N)).reshape(-1)
    ok = None
    if secret is not None:
        ok = np.all(scheme.split(m_hat, scheme.code.K) == scheme.split(secret, scheme.code.K),
                    axis=-1)
    return Activation(m_hat, c_hat, ok, sats)


@dataclass
class SchemeConfig:
    """Scheme file: segment count, code and ensemble references, epsilon list."""

    code: str
    segments: int = 1
    ensemble: str | None = None
    epsilons: tuple[float, ...] = ()
    q_max: int | None = 3

    @classmethod
    def load(cls, path: str | Path) -> "SchemeConfig":
        d = json.loads(Path(path).read_text())
        base = Path(path).parent
        cfg = cls(str(base / d["code"]), int(d.get("segments", 1)),
                  str(base / d["ensemble"]) if d.get("ensemble") else None,
                  tuple(float(e) for e in d.get("epsilons", ())), d.get("q_max", 3))
        return cfg

    def scheme(self) -> SegmentedScheme:
        return SegmentedScheme(load_code(self.code), self.segments)
