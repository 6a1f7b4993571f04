"""Acceptance criteria, each checked at its stated tolerance.

Every test records a single PASS/FAIL line that is printed in the terminal
summary. Monte Carlo points use fixed seeds; the sweeps dominate the runtime.
"""

import numpy as np
import pytest

from conftest import ACCEPTANCE, DATA
from oracles import naive_sc
from pufpolar import gf2, sim
from pufpolar.automorphisms import (AffineMap, build_bdl_perm, kron_perm, perm_from_affine,
                                    random_bdl_blocks, sample_ensemble)
from pufpolar.baseline import ConcatSpec, concat_bler
from pufpolar.decoder import decode_codewords, make_decoder
from pufpolar.polar import CodeSpec, encode, expand_generators, is_codeword
from pufpolar.sim import ExperimentConfig, ci_bounds, run_sweep

CODE = str(DATA / "code_1024_78.json")
ARCHS = ("independent", "cascaded", "recursive")
SIM_SEED = 1
ENSEMBLE_SEED = 0


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def sweep(**kw):
    base = dict(code=CODE, seed=SIM_SEED, min_errors=100, chunk_frames=1000)
    base.update(kw)
    return run_sweep(ExperimentConfig(**base))


def fmt(row):
    return f"{row.bler:.3e} [{row.ci_low:.2e}, {row.ci_high:.2e}] ({row.errors}/{row.frames})"


@pytest.fixture(scope="module")
def ae_rows():
    return {arch: sweep(architecture=arch, M=32, ensemble_seed=ENSEMBLE_SEED, q_max=3,
                        epsilons=[0.26, 0.28])
            for arch in ARCHS}


@pytest.fixture(scope="module")
def sc5_rows():
    return sweep(architecture="sc", q_max=5, epsilons=[0.20, 0.24])


def test_criterion_1_baseline():
    refs = [(0.22, 5, 3.648e-2), (0.23, 7, 1.357e-6), (0.21, 7, 5.552e-13)]
    parts, ok = [], True
    for eps, r, ref in refs:
        got = concat_bler(eps, ConcatSpec(r=r))
        rel = abs(got - ref) / ref
        ok &= rel <= 0.10
        parts.append(f"eps={eps} r={r}: {got:.4e} vs {ref:.3e} (rel {rel:.1e})")
    record(1, ok, "; ".join(parts))


def test_criterion_2_construction():
    info = expand_generators(10, [255, 505])
    code = CodeSpec(10, tuple(info), (3, 7))
    rng = np.random.default_rng(2)
    c = encode(code, rng.integers(0, 2, (100, code.K)))
    perms = [build_bdl_perm(random_bdl_blocks([3, 7], rng, False), [3, 7]) for _ in range(50)]
    for arch in ARCHS:
        perms += sample_ensemble(code, arch, 32, np.random.default_rng(ENSEMBLE_SEED)).members()
    preserved = sum(is_codeword(code, p.apply(c)) for p in perms)
    ok = len(info) == 78 and preserved == len(perms)
    record(2, ok, f"K={len(info)}; {preserved}/{len(perms)} BDL([3,7]) permutations "
                  "preserve 100 random codewords")


def test_criterion_3_planner():
    code = CodeSpec(6, tuple([31, 39, 43, 45, 46, 47, 51, 53, 54, 55] + list(range(57, 64))),
                    (5, 1))
    tree = make_decoder(code, 3)
    widths = [nd.width for nd in tree.root.edges()]
    expect = [1, 1, 2, 2, 3, 2, 3, 3, 3, 3, 3, 3, 3]
    ok = widths == expect and tree.max_width == 3 and tree.root.width == 1
    record(3, ok, f"edge widths {widths}, max {tree.max_width}, channel {tree.root.width}")


def test_criterion_4_aed_points(ae_rows):
    ok, parts = True, []
    for arch in ARCHS:
        r26, r28 = ae_rows[arch]
        ok &= r28.errors >= 100 and 1.8e-2 <= r28.bler <= 3.5e-2
        ok &= r26.errors >= 100 and 5e-4 <= r26.bler <= 1.1e-3
        parts.append(f"{arch}: 0.28 -> {fmt(r28)}, 0.26 -> {fmt(r26)}")
    for k, eps in enumerate((0.26, 0.28)):
        for a in range(3):
            for b in range(a + 1, 3):
                ra, rb = ae_rows[ARCHS[a]][k], ae_rows[ARCHS[b]][k]
                overlap = ra.ci_low <= rb.ci_high and rb.ci_low <= ra.ci_high
                ok &= overlap
                if not overlap:
                    parts.append(f"CIs of {ARCHS[a]} and {ARCHS[b]} disjoint at {eps}")
    record(4, ok, "; ".join(parts))


def test_criterion_5_plain_sc(sc5_rows):
    row = sc5_rows[0]
    ok = row.errors >= 100 and 7.5e-2 <= row.bler <= 1.2e-1
    four = sweep(architecture="sc", q_max=5, epsilons=[0.20], segments=4)[0]
    record(5, ok, f"SC 5-bit at 0.20, one (1024,78) block: {fmt(row)}, window [7.5e-2, 1.2e-1]"
                  f" (diagnostic, 4 segments: {fmt(four)})")


def test_criterion_6_aed_gain(sc5_rows):
    sc = sc5_rows[1]
    ae = sweep(architecture="independent", M=32, ensemble_seed=ENSEMBLE_SEED, q_max=3,
               epsilons=[0.24], max_frames=5000)[0]
    ok = sc.errors >= 100 and ae.bler <= sc.bler / 100
    record(6, ok, f"eps=0.24: SC {fmt(sc)}, AE-SC-32 {fmt(ae)}; "
                  f"ratio bound {sc.bler / 100:.2e}")


def _lta_absorption():
    rng = np.random.default_rng(7)
    codes = [CodeSpec.from_generators(n, g) for n, g in
             [(4, [7, 11]), (6, [15, 22]), (7, [31, 60]), (8, [63, 117])]]
    for k in range(100):
        code = codes[k % 4]
        rows = tuple((int(rng.integers(0, 1 << r)) if r else 0) | (1 << r)
                     for r in range(code.n))
        p = perm_from_affine(AffineMap(gf2.BitMatrix(code.n, code.n, rows),
                                       int(rng.integers(0, code.N))))
        tree = make_decoder(code, None, halving=False)
        y = (1 - 2 * encode(code, rng.integers(0, 2, (4, code.K))).astype(float)) \
            + rng.normal(0, 1.0, (4, code.N))
        if not np.array_equal(p.unapply(decode_codewords(tree, p.apply(y))[0]),
                              decode_codewords(tree, y)[0]):
            return False
    return True


def _kronecker():
    rng = np.random.default_rng(8)
    for prof in ([2, 2], [3, 7]):
        for _ in range(10):
            blocks = random_bdl_blocks(prof, rng, False)
            kron = kron_perm([perm_from_affine(AffineMap(b)) for b in reversed(blocks)])
            if build_bdl_perm(blocks, prof) != kron:
                return False
    return True


def _examples():
    A0 = gf2.BitMatrix.from_lists([[1, 1], [0, 1]])
    A1 = gf2.BitMatrix.from_lists([[0, 1], [1, 0]])
    ex1 = build_bdl_perm([A0, A1], [2, 2]).table.tolist()
    ex2 = build_bdl_perm([gf2.BitMatrix.identity(2), A1], [2, 2]).table.tolist()
    return (ex1 == [0, 1, 3, 2, 8, 9, 11, 10, 4, 5, 7, 6, 12, 13, 15, 14]
            and ex2 == [0, 1, 2, 3, 8, 9, 10, 11, 4, 5, 6, 7, 12, 13, 14, 15])


def _singer():
    return all(gf2.mat_order(gf2.singer_matrix(s)) == (1 << s) - 1 for s in range(1, 17))


def _oracle():
    rng = np.random.default_rng(9)
    code64 = CodeSpec(6, tuple([31, 39, 43, 45, 46, 47, 51, 53, 54, 55] + list(range(57, 64))),
                      (5, 1))
    for code in (code64, CodeSpec.from_generators(6, [15, 22]),
                 CodeSpec.from_generators(5, [7, 12])):
        c = encode(code, rng.integers(0, 2, (10_000, code.K)))
        llr = (1 - 2 * c.astype(float)) + rng.normal(0, 1.2, c.shape)
        fast, _ = decode_codewords(make_decoder(code, None, halving=False), llr)
        if not np.array_equal(fast, naive_sc(llr, ~code.info_mask)):
            return False
    return True


def _fuzzy_identity():
    # the harness asserts y = c xor e per frame; a clean sweep means it held everywhere,
    # and a tampered enrollment must trip it
    sweep(architecture="sc", epsilons=[0.25], min_errors=50)
    real = sim._enroll

    def tampered(ctx, rng):
        enr = real(ctx, rng)
        enr.w = enr.w ^ np.eye(1, enr.w.size, 5, dtype=np.uint8)[0]
        return enr

    sim._enroll = tampered
    try:
        sweep(architecture="sc", epsilons=[0.25], max_frames=5)
    except AssertionError:
        return True
    finally:
        sim._enroll = real
    return False


def _byte_identical(tmp_path):
    outs = []
    for w in (1, 2):
        out = tmp_path / f"w{w}.csv"
        sweep(architecture="cascaded", M=8, ensemble_seed=1, epsilons=[0.27, 0.3],
              min_errors=40, chunk_frames=50, workers=w, output=str(out))
        outs.append(out.read_bytes())
    return outs[0] == outs[1]


def test_criterion_7_properties(tmp_path):
    checks = {
        "LTA absorption (100 cases)": _lta_absorption(),
        "Kronecker identity [2,2],[3,7]": _kronecker(),
        "worked BDL permutation tables": _examples(),
        "Singer orders s<=16": _singer(),
        "fast-SSC == naive SC (3x10^4 frames, N<=64)": _oracle(),
        "y = c xor e on every frame": _fuzzy_identity(),
        "byte-identical CSV, 1 vs 2 workers": _byte_identical(tmp_path),
    }
    record(7, all(checks.values()),
           "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))


def test_criterion_8_deep_tail(ae_rows, sc5_rows):
    ok = True
    parts = ["points below 1e-5 not simulated (desk-scale budget)"]
    for arch in ARCHS:
        r26, r28 = ae_rows[arch]
        ok &= r26.bler < r28.bler
    ok &= sc5_rows[0].bler < sc5_rows[1].bler
    grid = [concat_bler(e, ConcatSpec(r=7)) for e in np.arange(0.20, 0.30, 0.01)]
    ok &= all(a < b for a, b in zip(grid, grid[1:]))
    parts.append("measured AE BLER increases 0.26 -> 0.28 for all architectures, SC BLER "
                 "increases 0.20 -> 0.24, analytic baseline increases over 0.20..0.29")
    record(8, ok, "; ".join(parts))
