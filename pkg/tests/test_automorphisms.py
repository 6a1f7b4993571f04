import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_sc
from pufpolar import gf2
from pufpolar.automorphisms import (AffineMap, EnsembleSpec, Permutation, blockwise_expand,
                                    build_bdl_perm, compose, first_block_equivariant,
                                    is_absorbed, kron_perm, load_ensemble, perm_from_affine,
                                    perm_order, perm_power, random_bdl_blocks, sample_ensemble,
                                    save_ensemble, singer_blocks)
from pufpolar.decoder import decode_codewords, make_decoder
from pufpolar.gf2 import BitMatrix
from pufpolar.polar import CodeSpec, encode, expand_generators, is_codeword

A0 = BitMatrix.from_lists([[1, 1], [0, 1]])
SWAP = BitMatrix.from_lists([[0, 1], [1, 0]])
I2 = BitMatrix.identity(2)
EX1 = [0, 1, 3, 2, 8, 9, 11, 10, 4, 5, 7, 6, 12, 13, 15, 14]
EX2 = [0, 1, 2, 3, 8, 9, 10, 11, 4, 5, 6, 7, 12, 13, 14, 15]


def kron_of_blocks(blocks):
    # Kronecker factors run from the most significant digit down
    return kron_perm([perm_from_affine(AffineMap(b)) for b in reversed(blocks)])


def test_examples_byte_exact():
    p1 = perm_from_affine(AffineMap(gf2.block_diag([A0, SWAP])), 4)
    assert p1.table.tolist() == EX1
    p2 = perm_from_affine(AffineMap(gf2.block_diag([I2, SWAP])), 4)
    assert p2.table.tolist() == EX2
    assert build_bdl_perm([A0, SWAP], [2, 2]) == p1
    assert build_bdl_perm([I2, SWAP], [2, 2]) == p2
    assert blockwise_expand(Permutation([0, 2, 1, 3]), 4).table.tolist() == EX2


def test_perm_from_affine_identity_and_translation():
    assert perm_from_affine(AffineMap(BitMatrix.identity(3))).is_identity()
    t = perm_from_affine(AffineMap(BitMatrix.identity(3), 0b101))
    assert t.table.tolist() == [i ^ 5 for i in range(8)]
    with pytest.raises(gf2.SingularMatrixError):
        perm_from_affine(AffineMap(BitMatrix.from_lists([[1, 1], [1, 1]])))


def test_compose_examples(rng):
    p1 = Permutation(EX1)
    ident = Permutation.identity(16)
    assert compose(p1, ident) == p1
    assert compose(p1, p1.inverse()) == ident
    A = gf2.block_diag([A0, SWAP])
    assert compose(p1, p1) == perm_from_affine(AffineMap(A @ A))
    p = Permutation(rng.permutation(8))
    q = Permutation(rng.permutation(8))
    x = rng.integers(0, 9, 8)
    # applying p o q equals applying q first, then p
    assert np.array_equal(compose(p, q).apply(x), p.apply(q.apply(x)))
    with pytest.raises(ValueError):
        compose(p, Permutation.identity(4))


def test_orders():
    assert perm_order(Permutation.identity(8)) == 1
    assert perm_order(Permutation(EX2)) == 2
    assert perm_power(Permutation(EX2), 2).is_identity()
    S = build_bdl_perm([gf2.singer_matrix(3), gf2.singer_matrix(7)], [3, 7])
    assert perm_order(S) == 889
    assert perm_power(S, 889).is_identity()
    assert not any(perm_power(S, j).is_identity() for j in (7, 127, 881))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_perm_power_matches_repeated_composition(seed):
    r = np.random.default_rng(seed)
    p = Permutation(r.permutation(12))
    acc = Permutation.identity(12)
    for j in range(10):
        assert perm_power(p, j) == acc
        acc = compose(p, acc)


def test_matrix_form(rng):
    p = Permutation(rng.permutation(8))
    x = rng.integers(0, 5, 8)
    assert np.array_equal(p.matrix() @ x, p.apply(x))


@pytest.mark.parametrize("profile", [[2, 2], [3, 7], [1, 2, 3]])
def test_kronecker_identity(profile, rng):
    for _ in range(10):
        blocks = random_bdl_blocks(profile, rng, False)
        assert build_bdl_perm(blocks, profile) == kron_of_blocks(blocks)


def test_kronecker_matrix_form(rng):
    blocks = random_bdl_blocks([2, 2], rng, False)
    P = build_bdl_perm(blocks, [2, 2]).matrix()
    parts = [perm_from_affine(AffineMap(b)).matrix() for b in blocks]
    assert np.array_equal(P, np.kron(parts[1], parts[0]))


def test_build_bdl_errors():
    with pytest.raises(ValueError):
        build_bdl_perm([I2, I2], [3, 1])
    with pytest.raises(gf2.SingularMatrixError):
        build_bdl_perm([BitMatrix.from_lists([[1, 1], [1, 1]]), I2], [2, 2])


def test_blockwise_expand():
    s = Permutation([2, 0, 1])
    assert blockwise_expand(Permutation.identity(4), 4).is_identity()
    assert blockwise_expand(s, 1) == s
    assert blockwise_expand(s, 2).table.tolist() == [4, 5, 0, 1, 2, 3]
    with pytest.raises(ValueError):
        blockwise_expand(s, 3)


def test_is_absorbed_examples():
    assert is_absorbed(AffineMap(BitMatrix.identity(4)))
    assert not is_absorbed(AffineMap(gf2.block_diag([A0, SWAP])))
    assert is_absorbed(AffineMap(BitMatrix.identity(4), 0b1011))


@pytest.mark.parametrize("fixture", ["code16", "code64", "code1024"])
def test_bdl_permutations_are_automorphisms(fixture, request, rng):
    code = request.getfixturevalue(fixture)
    c = encode(code, rng.integers(0, 2, (100, code.K)))
    perms = []
    for _ in range(20):
        p = build_bdl_perm(random_bdl_blocks(code.block_profile, rng, False), code.block_profile)
        perms.append(p)
        assert is_codeword(code, p.apply(c))
    for p, q in zip(perms, perms[1:]):
        assert is_codeword(code, compose(p, q).apply(c))


def test_wrong_profile_breaks_membership(code64, rng):
    # a full 6x6 linear map is not an automorphism of this code
    c = encode(code64, rng.integers(0, 2, (100, code64.K)))
    bad = [build_bdl_perm(random_bdl_blocks([6], rng, False), [6]) for _ in range(10)]
    assert not all(is_codeword(code64, p.apply(c)) for p in bad)


def random_lta(n, rng):
    rows = []
    for r in range(n):
        below = int(rng.integers(0, 1 << r)) if r else 0
        rows.append(below | (1 << r))
    return AffineMap(BitMatrix(n, n, tuple(rows)), int(rng.integers(0, 1 << n)))


def test_lta_absorbed_by_sc(rng):
    """pi^-1(SC(pi(y))) = SC(y) for lower-triangular affine pi."""
    codes = [CodeSpec.from_generators(n, g) for n, g in
             [(4, [7, 11]), (6, [15, 22]), (7, [31, 60]), (8, [63, 117])]]
    for k in range(100):
        code = codes[k % len(codes)]
        amap = random_lta(code.n, rng)
        assert is_absorbed(amap)
        p = perm_from_affine(amap)
        tree = make_decoder(code, None, halving=False)
        y = (1 - 2 * encode(code, rng.integers(0, 2, (5, code.K))).astype(float)) \
            + rng.normal(0, 1.0, (5, code.N))
        direct, _ = decode_codewords(tree, y)
        via, _ = decode_codewords(tree, p.apply(y))
        assert np.array_equal(p.unapply(via), direct)


def test_non_lta_not_absorbed(code1024, rng):
    tree = make_decoder(code1024, None, halving=False)
    p = build_bdl_perm(singer_blocks([3, 7], None, True), [3, 7])
    y = (1 - 2 * encode(code1024, rng.integers(0, 2, (300, code1024.K))).astype(float)) \
        + rng.normal(0, 2.5, (300, 1024))
    direct, _ = decode_codewords(tree, y)
    via, _ = decode_codewords(tree, p.apply(y))
    assert not np.array_equal(p.unapply(via), direct)


def test_first_block_policy(code1024, code16):
    assert first_block_equivariant(code1024)
    ens = sample_ensemble(code1024, "independent", 8, np.random.default_rng(1))
    assert all(b[0] == BitMatrix.identity(3) for b in ens.blocks)
    ens = sample_ensemble(code1024, "independent", 8, np.random.default_rng(1),
                          first_identity=False)
    assert any(b[0] != BitMatrix.identity(3) for b in ens.blocks)


@pytest.mark.parametrize("arch", ["independent", "cascaded", "recursive"])
def test_sample_m1_is_identity(arch, code1024, rng):
    ens = sample_ensemble(code1024, arch, 1, rng)
    assert ens.M == 1 and ens.member(0).is_identity()


@pytest.mark.parametrize("arch,M", [("independent", 32), ("cascaded", 32), ("recursive", 32)])
def test_sample_ensembles_valid(arch, M, code1024, rng):
    ens = sample_ensemble(code1024, arch, M, rng)
    tables = ens.tables()
    assert tables.shape == (M, 1024)
    assert len({t.tobytes() for t in tables}) == M
    assert ens.member(0).is_identity()
    c = encode(code1024, rng.integers(0, 2, (20, code1024.K)))
    for p in ens.members():
        assert is_codeword(code1024, p.apply(c))
    for j in range(M):
        assert ens.member(j) == Permutation(tables[j])


def test_recursive_singer_reach(code1024):
    ens = sample_ensemble(code1024, "recursive", 127, np.random.default_rng(3))
    assert perm_order(ens.bases[0]) == 127
    assert len({t.tobytes() for t in ens.tables()}) == 127
    with pytest.raises(ValueError):
        sample_ensemble(code1024, "recursive", 128, np.random.default_rng(3))


def test_cascaded_enumeration(code1024, rng):
    ens = sample_ensemble(code1024, "cascaded", 32, rng)
    assert len(ens.bases) == 5
    b = ens.bases
    # j = 0b10110 applies stages 1, 2 and 4 in that order
    expect = compose(b[4], compose(b[2], b[1]))
    assert ens.member(0b10110) == expect
    with pytest.raises(ValueError):
        sample_ensemble(code1024, "cascaded", 24, rng)


@pytest.mark.parametrize("arch", ["independent", "cascaded", "recursive"])
def test_forward_backward_follow_tables(arch, code1024, rng):
    ens = sample_ensemble(code1024, arch, 8, rng)
    y = rng.normal(size=1024)
    routed = list(ens.forward(y))
    for j, (p, v) in enumerate(zip(ens.members(), routed)):
        assert np.array_equal(v, p.apply(y))
        assert np.array_equal(ens.backward(j, v), y)


def test_ensemble_spec_validation(code1024, rng):
    ident = Permutation.identity(16)
    p = Permutation(EX1)
    with pytest.raises(ValueError):
        EnsembleSpec("independent", 16, 2, [p, ident])
    with pytest.raises(ValueError):
        EnsembleSpec("cascaded", 16, 3, [p])
    with pytest.raises(ValueError):
        EnsembleSpec("recursive", 16, 3, [Permutation(EX2)])
    with pytest.raises(ValueError):
        EnsembleSpec("serial", 16, 1, [ident])


@pytest.mark.parametrize("arch", ["independent", "cascaded", "recursive"])
def test_ensemble_file_roundtrip(arch, code1024, tmp_path, rng):
    ens = sample_ensemble(code1024, arch, 16, rng, seed=99)
    path = tmp_path / "e.json"
    save_ensemble(ens, path)
    again = load_ensemble(path)
    assert again.architecture == arch and again.seed == 99 and again.M == 16
    assert np.array_equal(again.tables(), ens.tables())
    d = json.loads(path.read_text())
    d["bases"][-1] = d["bases"][-1][::-1]
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError):
        load_ensemble(path)


def test_absorbed_members_rejected(code16, rng):
    ens = sample_ensemble(code16, "independent", 8, rng, first_identity=False)
    for blks in ens.blocks[1:]:
        assert not is_absorbed(AffineMap(gf2.block_diag(blks)))
