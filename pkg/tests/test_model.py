import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from opws.errors import DomainCoverageError
from opws.geometry import SupportSet
from opws.model import (BSpline, DeltaTrain, DiscreteOperator, GroundTruthOperator, RaisedCosine,
                        SampledSignal, SpreadingAtom, apply, apply_train, discrete_apply, discrete_matrix,
                        eval_spreading, hs_norm, impulse_response, kernel, kn_symbol)

from conftest import random_rect_operator, rect_atom

ZERO = GroundTruthOperator(())


def test_zero_operator_everywhere():
    assert eval_spreading(ZERO, 0.3, 0.1) == 0
    assert impulse_response(ZERO, 1.2, 0.4) == 0
    assert kernel(ZERO, 1.0, 0.2) == 0
    assert hs_norm(ZERO) == 0
    y = apply_train(ZERO, DeltaTrain(1.0), -5, 0.1, 101)
    assert np.all(y.samples == 0)


def test_spreading_peak_value():
    op = GroundTruthOperator((SpreadingAtom(1.0, RaisedCosine(0.5, 0.5), RaisedCosine(0.5, 0.5)),))
    # raised cosine peaks at 1 in its center
    assert eval_spreading(op, 0.5, 0.5) == pytest.approx(1.0)


def test_spreading_zero_outside_declared_support():
    atom = SpreadingAtom(2.0, RaisedCosine(0.5, 1.0), RaisedCosine(0.0, 1.0))
    op = GroundTruthOperator((atom,), SupportSet.from_rects([(0, 1, -0.5, 0.5)]))
    assert eval_spreading(op, 1.2, 0.0) == 0
    assert eval_spreading(op, 0.5, 0.6) == 0


def test_atom_outside_declared_support_rejected():
    with pytest.raises(ValueError):
        GroundTruthOperator((rect_atom(),), SupportSet.from_rects([(0, "1/2", -1, 1)]))


@pytest.mark.parametrize("prof", [RaisedCosine(0.3, 0.7), BSpline(0.1, 0.9, 2), BSpline(-0.2, 1.3, 4),
                                  BSpline(0.0, 0.5, 1)])
def test_profile_fourier_transform_matches_quadrature(prof):
    a, b = prof.support
    for x in [0.0, 0.37, -1.9, 5.25]:
        re = quad(lambda u: prof(u) * np.cos(2 * np.pi * u * x), a, b, points=list(prof.knots), limit=200)[0]
        im = quad(lambda u: prof(u) * np.sin(2 * np.pi * u * x), a, b, points=list(prof.knots), limit=200)[0]
        assert abs(prof.ft(x) - (re + 1j * im)) <= 1e-10 * max(1, abs(re + 1j * im))


def test_bspline_is_partition_of_unity_shape():
    # order-2 cardinal spline is the hat function with peak 1
    p = BSpline(0.0, 2.0, 2)
    assert p(0.0) == pytest.approx(1.0)
    assert p(0.5) == pytest.approx(0.5)
    assert p(1.0) == 0


def test_impulse_response_matches_quadrature():
    op = GroundTruthOperator((SpreadingAtom(0.7 - 0.2j, RaisedCosine(0.4, 0.6), RaisedCosine(0.1, 0.5)),))
    for x, t in [(0.0, 0.4), (3.3, 0.2), (-7.1, 0.6)]:
        f = lambda nu, part: getattr(eval_spreading(op, t, nu) * np.exp(2j * np.pi * nu * x), part)
        val = quad(f, -0.15, 0.35, args=("real",), limit=200)[0] + 1j * quad(f, -0.15, 0.35, args=("imag",),
                                                                            limit=200)[0]
        assert abs(impulse_response(op, x, t) - val) <= 1e-8 * abs(val)


def test_even_nu_profile_gives_real_impulse_response():
    op = GroundTruthOperator((rect_atom(1.0),))
    x = np.linspace(-10, 10, 51)
    assert np.max(np.abs(impulse_response(op, x, 0.3).imag)) < 1e-15


@given(st.floats(-20, 20), st.floats(-1, 2))
def test_kernel_impulse_identity(x, t):
    op = GroundTruthOperator((rect_atom(1 + 1j), SpreadingAtom(0.5, BSpline(0.3, 0.4, 3), RaisedCosine(0.2, 0.3))))
    assert kernel(op, x, x - t) == pytest.approx(impulse_response(op, x, t), abs=1e-12)


def test_kn_symbol_is_fourier_transform_of_h_in_t(rng):
    op = random_rect_operator(rng)
    dt = 1e-3
    t = np.arange(0, 1 + dt / 2, dt)
    x = np.array([-2.0, 0.3, 4.1])
    xi = np.array([-1.3, 0.0, 0.7, 2.2])
    h = impulse_response(op, x[:, None], t[None, :])
    w = np.full(t.size, dt)
    w[0] = w[-1] = dt / 2
    num = (h * w) @ np.exp(-2j * np.pi * np.outer(t, xi))
    ref = kn_symbol(op, x[:, None], xi[None, :])
    assert np.max(np.abs(num - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_hs_norm_normalized_atom():
    atom = rect_atom()
    scale = 1 / np.sqrt(atom.tprofile.norm2() * atom.nuprofile.norm2())
    op = GroundTruthOperator((SpreadingAtom(scale, atom.tprofile, atom.nuprofile),))
    assert hs_norm(op) == pytest.approx(1.0, rel=1e-13)


def test_hs_norm_disjoint_atoms():
    a = SpreadingAtom(1.0, RaisedCosine(0.25, 0.5), RaisedCosine(0.0, 0.5))
    b = SpreadingAtom(2j, RaisedCosine(0.75, 0.5), BSpline(0.0, 0.5, 4))
    na, nb = hs_norm(GroundTruthOperator((a,))), hs_norm(GroundTruthOperator((b,)))
    assert hs_norm(GroundTruthOperator((a, b))) == pytest.approx(np.hypot(na, nb), rel=1e-13)


def test_hs_norm_matches_grid_sum(rng):
    for _ in range(3):
        op = random_rect_operator(rng)
        d = 1 / 1000
        t = np.arange(0, 1, d) + d / 2
        nu = np.arange(-0.4, 0.4, d) + d / 2
        grid = np.sum(np.abs(eval_spreading(op, t[:, None], nu[None, :])) ** 2) * d * d
        assert hs_norm(op) == pytest.approx(np.sqrt(grid), rel=1e-6)


def gaussian_tone(t):
    return np.exp(-(t / 3) ** 2) * np.exp(2j * np.pi * 0.15 * t)


def test_apply_matches_refined_quadrature():
    op = GroundTruthOperator((SpreadingAtom(1 - 0.5j, RaisedCosine(0.5, 1.0), RaisedCosine(0.05, 0.6)),))
    f = SampledSignal.from_function(gaussian_tone, -12, 0.05, 481)
    coarse = apply(op, f)
    fine = apply(op, f, substeps=16 * 8)
    assert coarse.n == fine.n
    err = np.linalg.norm(coarse.samples - fine.samples) / np.linalg.norm(fine.samples)
    assert err <= 1e-4


def test_apply_zero_cases():
    f = SampledSignal.from_function(gaussian_tone, -12, 0.05, 481)
    assert np.all(apply(ZERO, f).samples == 0)
    op = GroundTruthOperator((rect_atom(),))
    assert np.all(apply(op, f.scaled(0)).samples == 0)


def test_apply_linearity(rng):
    op1, op2 = random_rect_operator(rng), random_rect_operator(rng)
    f = SampledSignal(rng.standard_normal(200) + 1j * rng.standard_normal(200), 0, 0.1)
    g = SampledSignal(rng.standard_normal(200), 0, 0.1)
    a, b = 0.3 - 1j, 2.0
    lhs = apply(op1, SampledSignal(a * f.samples + b * g.samples, 0, 0.1)).samples
    rhs = a * apply(op1, f).samples + b * apply(op1, g).samples
    assert np.allclose(lhs, rhs, atol=1e-12)
    both = GroundTruthOperator(op1.atoms + op2.atoms)
    x = f.t[15:185]
    assert np.allclose(apply(both, f, x=x).samples, apply(op1, f, x=x).samples + apply(op2, f, x=x).samples,
                       atol=1e-12)


def test_apply_domain_coverage_error():
    op = GroundTruthOperator((SpreadingAtom(1.0, RaisedCosine(1.0, 2.0), RaisedCosine(0, 0.5)),))
    f = SampledSignal(np.ones(10), 0, 0.1)
    with pytest.raises(DomainCoverageError):
        apply(op, f)
    g = SampledSignal(np.ones(100), 0, 0.1)
    with pytest.raises(DomainCoverageError):
        apply(op, g, x=np.array([1.0]))


def test_apply_train_single_contribution():
    # t-support [0, 1) with spacing 1: exactly one train element per x
    op = GroundTruthOperator((SpreadingAtom(1.0, RaisedCosine(0.5, 1.0), RaisedCosine(0.0, 0.5)),))
    y = apply_train(op, DeltaTrain(1.0, 0.0, [2.0, -1.0]), -3, 0.125, 49)
    for x, v in zip(y.t, y.samples):
        n = np.floor(x)
        w = 2.0 if n % 2 == 0 else -1.0
        assert v == pytest.approx(w * impulse_response(op, x, x - n), abs=1e-14)


def test_apply_train_matches_apply_of_narrow_pulses():
    # response to a train equals the sum of shifted impulse responses
    op = GroundTruthOperator((SpreadingAtom(1.0, BSpline(1.0, 2.0, 3), RaisedCosine(0.1, 0.4)),))
    g = DeltaTrain(0.75, 0.2, [1.0, 1j, -0.5])
    y = apply_train(op, g, -4, 0.05, 161)
    ref = np.zeros(y.n, complex)
    for n in range(-20, 20):
        ref += g.weight(n) * impulse_response(op, y.t, y.t - (0.75 * n + 0.2))
    assert np.allclose(y.samples, ref, atol=1e-14)


def test_delta_train_invariants():
    with pytest.raises(ValueError):
        DeltaTrain(0.0)
    with pytest.raises(ValueError):
        DeltaTrain(1.0, 0.0, [0, 0])
    g = DeltaTrain(0.5, 0.1, [1, 2, 3])
    assert g.weight(-1) == 3 and g.period == 3
    assert DeltaTrain.from_dict(g.to_dict()).weights.tolist() == g.weights.tolist()


def test_signal_invariants():
    with pytest.raises(ValueError):
        SampledSignal([1, np.nan], 0, 0.1)
    with pytest.raises(ValueError):
        SampledSignal([1, 2], 0, 0)


def test_operator_json_roundtrip(rng):
    op = random_rect_operator(rng, n_atoms=3)
    op2 = GroundTruthOperator.from_dict(op.to_dict())
    t, nu = rng.uniform(0, 1, 20), rng.uniform(-0.4, 0.4, 20)
    assert np.array_equal(eval_spreading(op, t, nu), eval_spreading(op2, t, nu))


# --------------------------------------------------------------------------- finite model


def test_discrete_identity_and_shift(rng):
    N = 8
    f = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    eta = np.zeros((N, N), complex)
    eta[0, 0] = 1
    assert np.allclose(discrete_apply(DiscreteOperator(eta), f), f)
    eta = np.zeros((N, N), complex)
    eta[3, 0] = 1
    assert np.allclose(discrete_apply(DiscreteOperator(eta), f), np.roll(f, 3))


def test_discrete_multiplication_operator(rng):
    N = 16
    eta = np.zeros((N, N), complex)
    eta[0] = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    m = N * np.fft.ifft(eta[0])
    f = rng.standard_normal(N)
    assert np.allclose(discrete_apply(DiscreteOperator(eta), f), m * f)


def test_discrete_convolution_operator(rng):
    N = 16
    eta = np.zeros((N, N), complex)
    h = rng.standard_normal(N)
    eta[:, 0] = h
    f = rng.standard_normal(N)
    conv = np.fft.ifft(np.fft.fft(h) * np.fft.fft(f))
    assert np.allclose(discrete_apply(DiscreteOperator(eta), f), conv)
    A = discrete_matrix(DiscreteOperator(eta))
    # time invariance: kernel depends on n - j only
    for n in range(N):
        assert np.allclose(A[n], np.roll(A[0], n))


def test_discrete_matches_tf_shift_sum(rng):
    from opws.gabor import tf_shift

    N = 5
    eta = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    f = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    ref = sum(eta[k, m] * tf_shift(f, k, m) for k in range(N) for m in range(N))
    out = discrete_apply(DiscreteOperator(eta), f)
    assert np.allclose(out, ref)
    assert np.allclose(discrete_matrix(DiscreteOperator(eta)) @ f, ref)


@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1))
def test_discrete_linearity(N, seed):
    r = np.random.default_rng(seed)
    e1, e2 = (r.standard_normal((N, N)) + 1j * r.standard_normal((N, N)) for _ in range(2))
    f, g = (r.standard_normal(N) + 1j * r.standard_normal(N) for _ in range(2))
    a = complex(r.standard_normal(), r.standard_normal())
    A1 = DiscreteOperator(e1)
    assert np.allclose(discrete_apply(A1, a * f + g), a * discrete_apply(A1, f) + discrete_apply(A1, g))
    assert np.allclose(discrete_apply(DiscreteOperator(e1 + a * e2), f),
                       discrete_apply(A1, f) + a * discrete_apply(DiscreteOperator(e2), f))


def test_discrete_size_mismatch():
    with pytest.raises(ValueError):
        discrete_apply(DiscreteOperator(np.eye(3)), np.ones(4))
