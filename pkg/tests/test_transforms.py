import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opws.errors import GridError, PreconditionError
from opws.model import GroundTruthOperator, SampledSignal, impulse_response
from opws.transforms import (build_window, dft, idft, kn_symbol_from_impulse, kn_symbol_grid,
                             stft_mixed_norm, symplectic_axes, symplectic_dft2, zak)

from conftest import random_rect_operator


def test_dft_delta_and_tone():
    N = 8
    d = np.zeros(N)
    d[0] = 1
    assert np.allclose(dft(d), np.full(N, 1 / np.sqrt(N)))
    m = 3
    tone = np.exp(2j * np.pi * m * np.arange(N) / N)
    ref = np.zeros(N, complex)
    ref[m] = np.sqrt(N)
    assert np.allclose(dft(tone), ref, atol=1e-12)


@given(st.integers(1, 64), st.integers(0, 2 ** 32 - 1))
def test_dft_unitary_and_inverse(N, seed):
    r = np.random.default_rng(seed)
    v = r.standard_normal(N) + 1j * r.standard_normal(N)
    assert np.linalg.norm(dft(v)) == pytest.approx(np.linalg.norm(v), rel=1e-12)
    assert np.allclose(idft(dft(v)), v, atol=1e-12)


def test_dft_rejects_empty():
    with pytest.raises(ValueError):
        dft([])


def test_symplectic_zero_and_separable(rng):
    assert np.all(symplectic_dft2(np.zeros((4, 6))) == 0)
    u = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    w = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    out = symplectic_dft2(np.outer(u, w))
    assert out.shape == (7, 5)
    assert np.allclose(out, np.outer(idft(w), dft(u)))


def test_symplectic_involution_8x8(rng):
    F = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.max(np.abs(symplectic_dft2(symplectic_dft2(F)) - F)) <= 1e-10


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_symplectic_unitary_and_involutive(M, N, seed):
    r = np.random.default_rng(seed)
    F = r.standard_normal((M, N)) + 1j * r.standard_normal((M, N))
    G = symplectic_dft2(F)
    assert np.linalg.norm(G) == pytest.approx(np.linalg.norm(F), rel=1e-10)
    assert np.allclose(symplectic_dft2(G), F, atol=1e-10)


def test_symplectic_sign_convention():
    # a unit sample at grid position (a, b) = (1, 2) maps to exp(-2 pi i (nu a/M - t b/N))
    M, N = 4, 6
    F = np.zeros((M, N), complex)
    F[1, 2] = 1
    G = symplectic_dft2(F)
    t, nu = np.arange(N), np.arange(M)
    ref = np.exp(-2j * np.pi * nu[None, :] * 1 / M) * np.exp(2j * np.pi * t[:, None] * 2 / N) / np.sqrt(M * N)
    assert np.allclose(G, ref)
    ta, na = symplectic_axes((M, N), 0.5, 0.25)
    assert ta.size == N and na.size == M and ta[1] == pytest.approx(1 / (N * 0.25))


# --------------------------------------------------------------------------- zak


def two_bump(t0=-3.0, dt=0.1, n=80, seed=0):
    r = np.random.default_rng(seed)
    s = np.zeros(n, complex)
    s[5:15] = r.standard_normal(10) + 1j * r.standard_normal(10)
    s[50:62] = r.standard_normal(12)
    return SampledSignal(s, t0, dt)


def test_zak_single_period_is_nu_independent():
    f = SampledSignal(np.arange(1, 11), 0.0, 0.1)
    t, nu, Z = zak(f, 1.0, nnu=8)
    assert np.allclose(Z, f.samples[:, None])


def test_zak_shift_covariance():
    f0 = SampledSignal(np.arange(1, 11), 0.0, 0.1)
    f1 = SampledSignal(np.concatenate([np.zeros(10), np.arange(1, 11)]), 0.0, 0.1)
    T = 1.0
    t, nu, Z0 = zak(f0, T, nnu=8)
    _, _, Z1 = zak(f1, T, nnu=8)
    # f1 = f0(. - T): the lattice sum reindexes with a unimodular phase
    assert np.allclose(Z1, Z0 * np.exp(-2j * np.pi * T * nu)[None, :])
    assert np.allclose(np.abs(Z1), np.abs(Z0))


def test_zak_matches_direct_sum():
    f = two_bump()
    T = 1.0
    t, nu, Z = zak(f, T, nnu=5, t_periods=2, nu_periods=2)
    ref = np.zeros_like(Z)
    for i, ti in enumerate(t):
        for j, vj in enumerate(nu):
            for lam in T * np.arange(-20, 21):
                x = ti - lam
                k = int(round((x - f.t0) / f.dt))
                if 0 <= k < f.n:
                    ref[i, j] += f.samples[k] * np.exp(2j * np.pi * lam * vj)
    assert np.max(np.abs(Z - ref)) <= 1e-12 * max(1, np.max(np.abs(ref)))


def test_zak_quasi_periodicity():
    f = two_bump()
    T = 1.0
    t, nu, Z = zak(f, T, nnu=6, t_periods=2, nu_periods=2)
    nt, nn = 10, 6
    assert np.allclose(Z[nt:, :], np.exp(2j * np.pi * T * nu)[None, :] * Z[:nt, :], atol=1e-10)
    assert np.allclose(Z[:, nn:], Z[:, :nn], atol=1e-10)


def test_zak_incommensurate():
    with pytest.raises(GridError):
        zak(two_bump(), 0.95)


# --------------------------------------------------------------------------- stft


def test_stft_zero():
    assert stft_mixed_norm(SampledSignal(np.zeros(50), 0, 0.1)) == 0


def test_stft_l2_isometry_up_to_constant(rng):
    ratios = []
    for _ in range(10):
        n = int(rng.integers(40, 120))
        f = SampledSignal(rng.standard_normal(n) + 1j * rng.standard_normal(n), 0, 0.1)
        ratios.append(stft_mixed_norm(f, 2, 2, tau_stride=2) / f.norm())
    ratios = np.array(ratios)
    assert ratios.std() / ratios.mean() <= 0.02


def test_stft_shift_invariance(rng):
    s = rng.standard_normal(60)
    a = SampledSignal(np.concatenate([s, np.zeros(40)]), 0, 0.1)
    b = SampledSignal(np.concatenate([np.zeros(37), s, np.zeros(3)]), 0, 0.1)
    for p, q in [(1, 2), (2, 1), (np.inf, 1), (2, 2)]:
        va, vb = stft_mixed_norm(a, p, q), stft_mixed_norm(b, p, q)
        assert vb == pytest.approx(va, rel=0.01)


def test_stft_exponent_domain():
    with pytest.raises(ValueError):
        stft_mixed_norm(SampledSignal(np.ones(4), 0, 0.1), 0.5, 2)


# --------------------------------------------------------------------------- window


def test_window_grid_spectrum():
    T, Om = 0.9, 1.0
    w = build_window(T, Om, 0.05, 4096)
    f = np.fft.fftfreq(4096, d=0.05)
    S = w.grid_spectrum()
    band = np.abs(f) <= Om / 2
    out = np.abs(f) >= 1 / (2 * T)
    assert np.max(np.abs(S[band] - 1)) <= 1e-10
    assert np.max(np.abs(S[out])) <= 1e-10
    assert w.transition_width == pytest.approx(1 / 1.8 - 0.5)


def test_window_closed_form_matches_spectrum():
    from scipy.integrate import quad

    w = build_window(0.9, 1.0, 0.05, 16)
    b = 1 / 1.8
    for x in [0.0, 0.77, 3.1, 1 / (2 * w.transition_width), 40.0]:
        ref = quad(lambda f: w.spectrum(f) * np.cos(2 * np.pi * f * x), -b, b, points=[-0.5, 0.5], limit=500)[0]
        assert complex(w(x)) == pytest.approx(ref, abs=1e-9)


def test_sharp_window_is_sinc():
    T = 0.8
    w = build_window(T, 1 / T, 0.01, 16, "sharp-characteristic")
    x = np.linspace(-10, 10, 101)
    assert np.allclose(T * w(x), np.sinc(x / T))
    assert w.transition_width == 0


def test_window_preconditions():
    with pytest.raises(PreconditionError):
        build_window(1.0, 1.0, 0.01, 16)
    with pytest.raises(PreconditionError):
        build_window(1.0, 1.1, 0.01, 16, "sharp-characteristic")


def test_window_reproduces_bandlimited_vectors(rng):
    n, dt = 512, 0.05
    w = build_window(0.9, 1.0, dt, n)
    f = np.fft.fftfreq(n, d=dt)
    spec = np.where(np.abs(f) <= 0.5, rng.standard_normal(n) + 1j * rng.standard_normal(n), 0)
    v = np.fft.ifft(spec)
    filtered = np.fft.ifft(np.fft.fft(v) * w.grid_spectrum())
    assert np.max(np.abs(filtered - v)) <= 1e-8 * np.max(np.abs(v))


def test_kn_symbol_grid_consistency(rng):
    op = random_rect_operator(rng)
    x = np.array([-1.0, 2.5])
    xi = np.linspace(-2, 2, 9)
    dt = 1e-3
    t = np.arange(0, 1 + dt / 2, dt)
    h = impulse_response(op, x[:, None], t[None, :])
    num = kn_symbol_from_impulse(h, 0.0, dt, xi)
    ref = kn_symbol_grid(op, x, xi)
    assert np.max(np.abs(num - ref)) <= 1e-8 * np.max(np.abs(ref))
