"""Fast simplified SC decoding with statically planned, non-uniform LLR widths.

The factor tree is pruned at Rate-0, Rate-1, repetition and single-parity-check
nodes. Every edge of the pruned tree carries a planned value set: the channel
edge starts from ``{-1, +1}``, an f-edge inherits its parent's set, and a
g-edge produces ``{+-a + b}``. A g-output whose set is all even is halved
(SC is invariant to scaling), then clipped to ``q_max`` bits.

Decoding itself runs as a flat instruction program through a numba kernel, so
one compiled routine serves every code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numba
import numpy as np

from .polar import CodeSpec, polar_transform


class NodeKind(enum.IntEnum):
    RATE0 = 0
    RATE1 = 1
    REP = 2
    SPC = 3
    BRANCH = 4


@dataclass(frozen=True)
class QuantizedLlr:
    value: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be at least one bit")
        if abs(self.value) > max_magnitude(self.width):
            raise ValueError(f"{self.value} does not fit in {self.width} bits")


def max_magnitude(width: int) -> int:
    # one bit still carries the sign-only set {-1, +1}
    return max(1, (1 << (width - 1)) - 1)


def saturation_bound(q_max: int | None) -> int:
    """Clip magnitude for q_max bits; 0 means unbounded, -1 means sign-only."""
    if q_max is None:
        return 0
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    if q_max == 1:
        return -1
    return (1 << (q_max - 1)) - 1


def _clip(v: int, sat: int) -> int:
    if sat > 0:
        return max(-sat, min(sat, v))
    if sat < 0:
        return 1 if v >= 0 else -1
    return v


def f_op(a: QuantizedLlr, b: QuantizedLlr) -> QuantizedLlr:
    """Min-sum check-node update; never widens the value set."""
    if a.width != b.width:
        raise ValueError("f expects equal input widths")
    sign = (1 if a.value >= 0 else -1) * (1 if b.value >= 0 else -1)
    return QuantizedLlr(sign * min(abs(a.value), abs(b.value)), a.width)


def g_op(a: QuantizedLlr, b: QuantizedLlr, partial_bit: int,
         halve: bool = False, width: int | None = None) -> QuantizedLlr:
    """Variable-node update, then the edge's planned rescale and clip.

    Without a planned ``width`` the output gets one extra bit, which always
    suffices for the sum of two values of the input width.
    """
    if a.width != b.width:
        raise ValueError("g expects equal input widths")
    v = (-a.value if partial_bit else a.value) + b.value
    if halve:
        if v % 2:
            raise ValueError("halving an odd value; the plan is inconsistent")
        v //= 2
    if width is None:
        return QuantizedLlr(v, a.width + 1)
    return QuantizedLlr(_clip(v, saturation_bound(width)), width)


@dataclass
class Node:
    start: int
    size: int
    kind: NodeKind
    left: "Node | None" = None
    right: "Node | None" = None
    # attributes of the edge entering this node
    values: tuple[int, ...] = ()
    width: int = 0
    halve: bool = False
    sat: int = 0

    def walk(self) -> Iterator["Node"]:
        yield self
        if self.kind == NodeKind.BRANCH:
            yield from self.left.walk()
            yield from self.right.walk()

    def leaves(self) -> list["Node"]:
        return [nd for nd in self.walk() if nd.kind != NodeKind.BRANCH]

    def edges(self) -> list["Node"]:
        """Nodes in the order their incoming edges are drawn: root, then
        breadth-first over (f-child, g-child) pairs."""
        out = [self]
        queue = [self]
        while queue:
            nd = queue.pop(0)
            if nd.kind == NodeKind.BRANCH:
                out.extend([nd.left, nd.right])
                queue.extend([nd.left, nd.right])
        return out


@dataclass
class DecodeTree:
    code: CodeSpec
    root: Node
    q_max: int | None = None
    channel_values: tuple[int, ...] = ()
    halving: bool = True
    planned: bool = False
    _program: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.code.N

    @property
    def max_width(self) -> int:
        return max(nd.width for nd in self.root.walk())

    @property
    def program(self) -> np.ndarray:
        if self._program is None:
            self._program = compile_program(self)
        return self._program

    @property
    def channel_halve(self) -> bool:
        return self.root.halve

    def describe(self) -> str:
        """Stable text rendering: one line per node with its incoming edge width."""
        lines = []

        def visit(nd: Node, depth: int, tag: str):
            name = {NodeKind.RATE0: "Rate0", NodeKind.RATE1: "Rate1", NodeKind.REP: "Rep",
                    NodeKind.SPC: "SPC", NodeKind.BRANCH: "node"}[nd.kind]
            extra = " halve" if nd.halve else ""
            lines.append(f"{'  ' * depth}{tag} {name}-{nd.size} [{nd.start},{nd.start + nd.size})"
                         f" width={nd.width}{extra}")
            if nd.kind == NodeKind.BRANCH:
                visit(nd.left, depth + 1, "f")
                visit(nd.right, depth + 1, "g")

        visit(self.root, 0, "y")
        return "\n".join(lines)


def classify(frozen: np.ndarray) -> NodeKind:
    n_frozen = int(frozen.sum())
    size = frozen.size
    if n_frozen == size:
        return NodeKind.RATE0
    if n_frozen == 0:
        return NodeKind.RATE1
    if n_frozen == size - 1 and not frozen[-1]:
        return NodeKind.REP
    if n_frozen == 1 and frozen[0]:
        return NodeKind.SPC
    return NodeKind.BRANCH


def build_tree(code: CodeSpec, prune: bool = True) -> DecodeTree:
    """Split recursively, stopping at the largest special node.

    With ``prune=False`` the recursion runs to single bits, which gives the
    plain bit-by-bit SC schedule.
    """
    frozen = ~code.info_mask

    def split(start: int, size: int) -> Node:
        kind = classify(frozen[start:start + size])
        if size == 1 or (prune and kind != NodeKind.BRANCH):
            return Node(start, size, kind)
        half = size // 2
        return Node(start, size, NodeKind.BRANCH, split(start, half), split(start + half, half))

    return DecodeTree(code, split(0, code.N))


def _sumset(values: np.ndarray) -> np.ndarray:
    # {+-a + b}; with a symmetric set this is the plain sumset V + V
    lo = int(values.min())
    span = int(values.max()) - lo + 1
    ind = np.zeros(span, dtype=np.int64)
    ind[values - lo] = 1
    conv = np.convolve(ind, ind)
    return np.flatnonzero(conv) + 2 * lo


def _finish_edge(values: np.ndarray, halving: bool, sat: int) -> tuple[np.ndarray, bool]:
    halve = halving and bool(np.all(values % 2 == 0)) and bool(np.any(values))
    if halve:
        values = values // 2
    if sat > 0:
        values = np.unique(np.clip(values, -sat, sat))
    elif sat < 0:
        values = np.unique(np.where(values >= 0, 1, -1))
    return values, halve


def _width(values: np.ndarray) -> int:
    return max(1, math.ceil(math.log2(len(values))))


def plan_bitwidths(tree: DecodeTree, q_max: int | None = 3,
                   channel_values=(-1, 1), halving: bool = True) -> DecodeTree:
    """Annotate every edge with its value set and bit width.

    ``q_max=None`` disables clipping; ``halving=False`` disables the
    even-set rescaling (used to check scale invariance).
    """
    sat = saturation_bound(q_max)
    chan = np.unique(np.asarray(channel_values, dtype=np.int64))
    if np.any(chan != -chan[::-1]):
        raise ValueError("channel value set must be symmetric")

    def annotate(nd: Node, values: np.ndarray, halve: bool, edge_sat: int) -> Node:
        out = replace(nd, values=tuple(int(v) for v in values), width=_width(values),
                      halve=halve, sat=edge_sat)
        if nd.kind == NodeKind.BRANCH:
            # f keeps the (symmetric) set unchanged
            out.left = annotate(nd.left, values, False, 0)
            g_vals, g_halve = _finish_edge(_sumset(values), halving, sat)
            out.right = annotate(nd.right, g_vals, g_halve, sat)
        return out

    # the channel edge gets the same rescale/clip treatment as a g-output
    ch_vals, ch_halve = _finish_edge(chan, halving, sat)
    root = annotate(tree.root, ch_vals, ch_halve, sat)
    return DecodeTree(tree.code, root, q_max, tuple(int(v) for v in chan), halving, True)


# -- compiled program ---------------------------------------------------------

OP_F, OP_G, OP_RATE0, OP_RATE1, OP_REP, OP_SPC, OP_COMBINE = range(7)
_LEAF_OP = {NodeKind.RATE0: OP_RATE0, NodeKind.RATE1: OP_RATE1,
            NodeKind.REP: OP_REP, NodeKind.SPC: OP_SPC}


def compile_program(tree: DecodeTree) -> np.ndarray:
    """Flatten the tree into rows of (opcode, size, side, halve, sat).

    A node of size s reads its LLRs from ``alpha[s:2s]`` and writes its bits to
    ``beta[side, s:2s]`` (side 0 for left children and the root).
    """
    rows: list[tuple[int, int, int, int, int]] = []

    def emit(nd: Node, side: int):
        if nd.kind != NodeKind.BRANCH:
            rows.append((_LEAF_OP[nd.kind], nd.size, side, 0, 0))
            return
        rows.append((OP_F, nd.size, 0, 0, 0))
        emit(nd.left, 0)
        rows.append((OP_G, nd.size, 0, int(nd.right.halve), nd.right.sat))
        emit(nd.right, 1)
        rows.append((OP_COMBINE, nd.size, side, 0, 0))

    emit(tree.root, 0)
    return np.array(rows, dtype=np.int64).reshape(-1, 5)


@numba.njit(cache=True)
def _run_program(prog, alpha, beta):
    """Execute a program whose root LLRs already sit in alpha[N:2N].

    Returns the number of clip events. The codeword lands in beta[0, N:2N].
    """
    saturations = 0
    for r in range(prog.shape[0]):
        op = prog[r, 0]
        s = prog[r, 1]
        h = s // 2
        if op == OP_F:
            for i in range(h):
                a = alpha[s + i]
                b = alpha[s + h + i]
                m = min(abs(a), abs(b))
                alpha[h + i] = -m if (a < 0) != (b < 0) else m
        elif op == OP_G:
            for i in range(h):
                a = alpha[s + i]
                alpha[h + i] = alpha[s + h + i] + (-a if beta[0, h + i] else a)
            if prog[r, 3]:
                for i in range(h):
                    alpha[h + i] = alpha[h + i] // 2
            sat = prog[r, 4]
            if sat > 0:
                for i in range(h):
                    v = alpha[h + i]
                    saturations += (v > sat) + (v < -sat)
                    alpha[h + i] = min(max(v, -sat), sat)
            elif sat < 0:
                for i in range(h):
                    v = alpha[h + i]
                    saturations += (v > 1) + (v < -1)
                    alpha[h + i] = 1 if v >= 0 else -1
        elif op == OP_COMBINE:
            side = prog[r, 2]
            for i in range(h):
                rb = beta[1, h + i]
                beta[side, s + i] = beta[0, h + i] ^ rb
                beta[side, s + h + i] = rb
        else:
            side = prog[r, 2]
            if op == OP_RATE0:
                for i in range(s):
                    beta[side, s + i] = 0
            elif op == OP_RATE1:
                for i in range(s):
                    beta[side, s + i] = alpha[s + i] < 0
            elif op == OP_REP:
                # exact sum; only its sign leaves the node
                total = 0.0
                for i in range(s):
                    total += alpha[s + i]
                bit = total < 0
                for i in range(s):
                    beta[side, s + i] = bit
            else:  # OP_SPC
                parity = 0
                worst = 0
                for i in range(s):
                    v = alpha[s + i]
                    bit = v < 0
                    beta[side, s + i] = bit
                    parity ^= bit
                    if abs(v) < abs(alpha[s + worst]):
                        worst = i
                if parity:
                    beta[side, s + worst] ^= 1
    return saturations


@numba.njit(cache=True)
def _load_channel(alpha, llr, N, halve, sat):
    saturations = 0
    for i in range(N):
        v = llr[i]
        if halve:
            v = v // 2
        if sat > 0:
            if v > sat:
                v = sat
                saturations += 1
            elif v < -sat:
                v = -sat
                saturations += 1
        elif sat < 0:
            v = 1 if v >= 0 else -1
        alpha[N + i] = v
    return saturations


@numba.njit(cache=True)
def _decode_frames(prog, llrs, halve, sat, out):
    F, N = llrs.shape
    alpha = np.zeros(2 * N, dtype=llrs.dtype)
    beta = np.zeros((2, 2 * N), dtype=np.uint8)
    saturations = 0
    for f in range(F):
        saturations += _load_channel(alpha, llrs[f], N, halve, sat)
        saturations += _run_program(prog, alpha, beta)
        for i in range(N):
            out[f, i] = beta[0, N + i]
    return saturations


def _prepare(tree: DecodeTree, llr) -> np.ndarray:
    if not tree.planned:
        raise ValueError("plan_bitwidths must run before decoding")
    arr = np.asarray(llr)
    if arr.shape[-1] != tree.N:
        raise ValueError(f"LLR length {arr.shape[-1]} != N={tree.N}")
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.int32)
        bound = max(abs(v) for v in tree.channel_values)
        if np.any(np.abs(arr) > bound):
            raise ValueError("channel LLR outside the planned channel value set")
    else:
        if tree.halving and any(nd.halve for nd in tree.root.walk()):
            raise ValueError("real-valued LLRs need a plan without halving")
        arr = arr.astype(np.float64)
    return arr


def decode_codewords(tree: DecodeTree, llrs) -> tuple[np.ndarray, int]:
    """Decode a batch (F, N) of channel LLRs; returns codewords and clip count."""
    arr = _prepare(tree, llrs)
    squeeze = arr.ndim == 1
    arr = np.atleast_2d(arr)
    out = np.empty(arr.shape, dtype=np.uint8)
    sats = _decode_frames(tree.program, np.ascontiguousarray(arr), int(tree.root.halve),
                          tree.root.sat, out)
    return (out[0] if squeeze else out), int(sats)


def sc_decode(tree: DecodeTree, llr) -> tuple[np.ndarray, np.ndarray]:
    """Decode one frame; returns (codeword estimate, information-bit estimate)."""
    c, _ = decode_codewords(tree, llr)
    return c, polar_transform(c)[list(tree.code.info_set)]


def make_decoder(code: CodeSpec, q_max: int | None = 3, channel_values=(-1, 1),
                 halving: bool = True) -> DecodeTree:
    return plan_bitwidths(build_tree(code), q_max, channel_values, halving)
