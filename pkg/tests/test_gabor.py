import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opws.errors import BudgetExceededError, SingularSystemError, UnderdeterminedError
from opws.gabor import (CellPattern, check_glp, colex_combinations, finite_apply, finite_identify,
                        gabor_matrix, gaussian_vector, rng_for, search_identifier, tf_shift)
from opws.gabor import _colex_block


def test_tf_shift_examples():
    assert np.allclose(tf_shift([1, 0, 0, 0], 1, 0), [0, 1, 0, 0])
    assert np.allclose(tf_shift([1, 1, 1, 1], 0, 1), [1, 1j, -1, -1j])


@given(st.integers(1, 9), st.integers(-20, 20), st.integers(-20, 20), st.integers(0, 2 ** 32 - 1))
def test_tf_shift_factorization_and_unitarity(L, k, l, seed):
    r = np.random.default_rng(seed)
    c = r.standard_normal(L) + 1j * r.standard_normal(L)
    assert np.allclose(tf_shift(tf_shift(c, k, 0), 0, l), tf_shift(c, k, l))
    assert abs(np.linalg.norm(tf_shift(c, k, l)) - np.linalg.norm(c)) <= 1e-14 * max(1, np.linalg.norm(c))


def test_gabor_matrix_small_cases():
    assert np.allclose(gabor_matrix([3 + 1j]), [[3 + 1j]])
    G = gabor_matrix([1, 2])
    assert np.allclose(G.T, [[1, 2], [2, 1], [1, -2], [2, -1]])


def test_gabor_matrix_brute_force(rng):
    L = 5
    c = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    G = gabor_matrix(c)
    for l in range(L):
        for k in range(L):
            col = [c[(j - k) % L] * np.exp(2j * np.pi * j * l / L) for j in range(L)]
            assert np.allclose(G[:, l * L + k], col)
    assert np.allclose(np.linalg.norm(G, axis=0), np.linalg.norm(c))


def test_colex_order():
    subs = list(colex_combinations(5, 3))
    assert len(subs) == 10
    assert subs == sorted(combinations(range(5), 3), key=lambda s: s[::-1])
    blk = _colex_block(5, 3, 0, 10)
    assert [tuple(r) for r in blk] == subs
    assert [tuple(r) for r in _colex_block(5, 3, 4, 3)] == subs[4:7]
    assert [tuple(r) for r in _colex_block(9, 3, 0, 84)] == list(colex_combinations(9, 3))


def test_glp_fails_for_ones():
    cert = check_glp([1, 1])
    assert not cert.holds
    assert cert.subsetsChecked == 6
    assert cert.minAbsDet == pytest.approx(0, abs=1e-15)
    # first singular pair in colex order: columns pi(0,0)c and pi(1,0)c
    assert cert.argminSubset == (0, 1)


def test_glp_holds_for_1_2():
    c = np.array([1.0, 2.0])
    G = gabor_matrix(c)
    dets = sorted(abs(np.linalg.det(G[:, list(s)])) for s in combinations(range(4), 2))
    assert np.allclose(dets, [3, 3, 4, 4, 5, 5])
    cert = check_glp(c)
    assert cert.holds and cert.minAbsDet == pytest.approx(3)


def test_glp_L3_seed0():
    cert = check_glp(gaussian_vector(3, 0))
    assert cert.holds and cert.subsetsChecked == 84


def test_glp_argmin_matches_brute_force(rng):
    c = gaussian_vector(3, 7)
    G = gabor_matrix(c)
    subs = list(colex_combinations(9, 3))
    dets = np.array([abs(np.linalg.det(G[:, list(s)])) for s in subs])
    cert = check_glp(c)
    assert cert.minAbsDet == pytest.approx(dets.min(), rel=1e-10)
    # tf-shift covariance makes exact ties common: the first tied subset wins
    first = int(np.nonzero(dets <= dets.min() * (1 + 1e-8))[0][0])
    assert cert.argminSubset == subs[first]


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.sampled_from([[1, 1], [1, 2], list(gaussian_vector(3, 1))]))
def test_glp_scale_invariance(alpha, c):
    a = check_glp(np.asarray(c, complex))
    b = check_glp(alpha * np.asarray(c, complex))
    assert a.holds == b.holds
    if a.minAbsDet > 1e-8:
        assert a.argminSubset == b.argminSubset


def test_glp_thread_independence():
    c = gaussian_vector(5, 0)
    a = check_glp(c, threads=1, chunk=5000)
    b = check_glp(c, threads=4, chunk=5000)
    assert a == b


def test_glp_budget():
    with pytest.raises(BudgetExceededError):
        check_glp(gaussian_vector(7, 0))


def test_glp_randomized_deterministic():
    c = gaussian_vector(7, 0)
    a = check_glp(c, mode="randomized", trials=3000, seed=3, chunk=1000)
    b = check_glp(c, mode="randomized", trials=3000, seed=3, chunk=1000, threads=3)
    assert a == b and a.subsetsChecked == 3000 and a.holds


@pytest.mark.parametrize("L", [2, 3, 5])
def test_glp_almost_every_c(L):
    trials = 100 if L < 5 else 20
    holds = sum(check_glp(gaussian_vector(L, s)).holds for s in range(trials))
    assert holds >= math.ceil(0.95 * trials)


def test_search_identifier_trivial_and_monotone():
    one = search_identifier(3, trials=1, seed=4)
    assert one.score == one.certificate.minAbsDet
    scores = [search_identifier(3, trials=n, seed=4).score for n in (1, 3, 8)]
    assert scores == sorted(scores)


def test_search_identifier_beats_median():
    best = search_identifier(5, trials=50, seed=0, objective="min-worst-cond")
    conds = -np.array(best.history)
    assert len(conds) == 50
    assert best.certificate.worstCond <= np.median(conds)
    # re-score the winner independently
    assert check_glp(best.c).worstCond == pytest.approx(conds.min())


def test_finite_apply_cases(rng):
    c = gaussian_vector(3, 0)
    assert np.all(finite_apply(CellPattern(()), [], c) == 0)
    assert np.allclose(finite_apply(CellPattern(((0, 0),)), [1], c), c)
    pat = CellPattern(((0, 1), (2, 2), (1, 0)))
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    G = gabor_matrix(c)
    ref = G[:, [1 * 3 + 0, 2 * 3 + 2, 0 * 3 + 1]] @ v
    assert np.allclose(finite_apply(pat, v, c), ref)
    with pytest.raises(ValueError):
        finite_apply(pat, v[:2], c)


def test_finite_identify_roundtrip_L5():
    c = gaussian_vector(5, 0)
    r = np.random.default_rng(0)
    for _ in range(100):
        n = int(r.integers(1, 6))
        idx = r.choice(25, n, replace=False)
        pat = CellPattern(tuple((int(i % 5), int(i // 5)) for i in idx))
        v = r.standard_normal(n) + 1j * r.standard_normal(n)
        res = finite_identify(finite_apply(pat, v, c), pat, c)
        assert np.linalg.norm(res.values - v) <= 1e-10 * np.linalg.norm(v)
        assert res.condition >= 1


@given(st.sampled_from([2, 3, 5, 7]), st.integers(0, 2 ** 32 - 1))
def test_finite_identify_roundtrip_property(L, seed):
    r = np.random.default_rng(seed)
    c = gaussian_vector(L, 0)
    n = int(r.integers(1, L + 1))
    idx = r.choice(L * L, n, replace=False)
    pat = CellPattern(tuple((int(i % L), int(i // L)) for i in idx))
    v = r.standard_normal(n) + 1j * r.standard_normal(n)
    res = finite_identify(finite_apply(pat, v, c), pat, c)
    assert np.allclose(res.values, v, atol=1e-9 * np.linalg.norm(v))


def test_finite_identify_errors():
    c = gaussian_vector(2, 0)
    with pytest.raises(UnderdeterminedError):
        finite_identify(np.zeros(2), CellPattern(((0, 0), (1, 0), (0, 1))), c)
    with pytest.raises(SingularSystemError):
        finite_identify(np.zeros(2), CellPattern(((0, 0), (1, 0))), [1, 1])


def test_cell_pattern_distinct():
    with pytest.raises(ValueError):
        CellPattern(((0, 0), (0, 0)))


def test_rng_streams_independent_of_order():
    a = rng_for(5, 2, 7).random(4)
    rng_for(5, 2, 3).random(10)
    assert np.array_equal(a, rng_for(5, 2, 7).random(4))
    assert not np.array_equal(a, rng_for(5, 2, 8).random(4))
