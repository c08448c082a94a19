"""Discrete Fourier machinery and the reconstruction window.

Fourier convention: ``f^(xi) = ∫ f(x) exp(-2 pi i x xi) dx``.  DFTs are
unitary.  The symplectic Fourier transform pairs the first variable with a
forward and the second with an inverse exponential,
``F^s F(t, nu) = ∬ F(x, xi) exp(-2 pi i (nu x - xi t)) dx dxi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, PreconditionError
from .model import SampledSignal

__all__ = [
    "dft",
    "idft",
    "symplectic_dft2",
    "symplectic_axes",
    "zak",
    "stft_mixed_norm",
    "Window",
    "build_window",
    "kn_symbol_grid",
    "kn_symbol_from_impulse",
]


def dft(v) -> np.ndarray:
    """Unitary DFT, ``V[m] = N^-1/2 sum_n v[n] exp(-2 pi i m n / N)``."""
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        raise ValueError("empty input")
    return np.fft.fft(v, norm="ortho")


def idft(v) -> np.ndarray:
    """Inverse of :func:`dft`."""
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        raise ValueError("empty input")
    return np.fft.ifft(v, norm="ortho")


def symplectic_dft2(F) -> np.ndarray:
    """Discrete symplectic Fourier transform.

    ``F[a, b]`` samples a function of ``(x, xi)`` (shape ``M x N``).  The
    result ``G[c, d]`` samples a function of ``(t, nu)`` and has shape
    ``N x M``: ``t`` is dual to ``xi`` (inverse sign), ``nu`` dual to ``x``
    (forward sign).  The map is unitary and is its own inverse.
    """
    F = np.asarray(F, dtype=complex)
    if F.ndim != 2:
        raise ValueError("expected a 2-D array")
    G = np.fft.ifft(np.fft.fft(F, axis=0, norm="ortho"), axis=1, norm="ortho")
    return G.T.copy()


def symplectic_axes(shape, dx: float, dxi: float):
    """Output axes ``(t, nu)`` of :func:`symplectic_dft2` for an input of ``shape`` with steps ``dx, dxi``.

    Axes follow the DFT index order (see :func:`numpy.fft.fftfreq`).
    """
    M, N = shape
    return np.fft.fftfreq(N, d=dxi), np.fft.fftfreq(M, d=dx)


def zak(f: SampledSignal, T: float, nt: int | None = None, nnu: int = 16,
        t_periods: int = 1, nu_periods: int = 1):
    """Zak transform ``Z(t, nu) = sum_{lambda in T Z} f(t - lambda) exp(2 pi i lambda nu)``.

    ``f`` is taken to vanish outside its samples.  ``t`` runs over ``nt``
    equispaced points per period ``[0, T)`` (default: every sample), ``nu``
    over ``nnu`` points per period ``[0, 1/T)``; ``t_periods``/``nu_periods``
    extend the tabulation to check quasi-periodicity.

    Returns
    -------
    t, nu : ndarray
    Z : ndarray, shape ``(len(t), len(nu))``
    """
    P = T / f.dt
    Pi = int(round(P))
    if Pi < 1 or abs(P - Pi) > 1e-9 * max(1.0, P):
        raise GridError("T must be an integer multiple of the sample step")
    o = f.t0 / f.dt
    oi = int(round(o))
    if abs(o - oi) > 1e-9 * max(1.0, abs(o)):
        raise GridError("signal origin is not on the grid k*dt")
    if nt is None:
        nt = Pi
    if Pi % nt:
        raise GridError("nt must divide T/dt")
    stride = Pi // nt
    it = np.arange(nt * t_periods) * stride          # t index relative to 0, in samples
    t = it * f.dt
    nu = np.arange(nnu * nu_periods) / (nnu * T)
    # lambda = m*T, contributes f(t - mT): sample index it - m*Pi - oi
    lo, hi = oi, oi + f.n - 1
    m_min = math.floor((it.min() - hi) / Pi)
    m_max = math.ceil((it.max() - lo) / Pi)
    m = np.arange(m_min, m_max + 1)
    idx = it[:, None] - m[None, :] * Pi - oi
    ok = (idx >= 0) & (idx < f.n)
    vals = np.where(ok, f.samples[np.clip(idx, 0, f.n - 1)], 0)
    E = np.exp(2j * np.pi * np.outer(m * T, nu))
    return t, nu, vals @ E


def stft_mixed_norm(f: SampledSignal, p: float = 2, q: float = 2, tau_stride: int = 1,
                    nfft: int | None = None, pad: float = 8.0) -> float:
    """Mixed norm of the short-time Fourier transform with a Gaussian window.

    ``V(tau, nu) = ∫ f(x) phi(x - tau) exp(-2 pi i nu x) dx`` with
    ``phi(x) = pi^-1/4 exp(-x^2/2)`` (unit L2 norm).  The discrete
    ``L^{p,q}`` norm integrates over time first (exponent ``p``) and then over
    frequency (exponent ``q``), each weighted by the grid cell size.
    """
    for e in (p, q):
        if not (e >= 1):
            raise ValueError("exponents must lie in [1, inf]")
    dt = f.dt
    npad = int(math.ceil(pad / dt))
    x = f.t0 + dt * np.arange(-npad, f.n + npad)
    fx = np.concatenate([np.zeros(npad), f.samples, np.zeros(npad)])
    taus = x[::tau_stride]
    n = x.size if nfft is None else int(nfft)
    if n < x.size:
        raise ValueError("nfft shorter than the padded signal")
    phi = np.pi ** -0.25 * np.exp(-0.5 * (x[None, :] - taus[:, None]) ** 2)
    # |V| is invariant to the phase from the time origin, so a plain FFT suffices
    V = np.abs(np.fft.fft(fx[None, :] * phi, n=n, axis=1)) * dt
    dtau, dnu = dt * tau_stride, 1.0 / (n * dt)
    inner = np.max(V, axis=0) if np.isinf(p) else (np.sum(V ** p, axis=0) * dtau) ** (1 / p)
    return float(np.max(inner) if np.isinf(q) else (np.sum(inner ** q) * dnu) ** (1 / q))


@dataclass(frozen=True, eq=False)
class Window:
    """Reconstruction window ``s`` with ``s^ = 1`` on the passband.

    ``signal`` holds samples on the requested grid; they are the inverse DFT
    of the exact spectrum on the DFT grid (hence a periodization of ``s``),
    so :meth:`grid_spectrum` reproduces the design exactly.  The window
    itself (``__call__``) is evaluated in closed form.
    """

    signal: SampledSignal
    passband: tuple
    transition_width: float
    kind: str
    T: float
    Omega: float
    center: float = 0.0

    def spectrum(self, xi):
        """Continuous spectrum ``s^(xi)``."""
        u = np.abs(np.asarray(xi, dtype=float) - self.center)
        a = self.Omega / 2
        if self.kind == "sharp-characteristic":
            d = np.asarray(xi, dtype=float) - self.center
            return ((d >= -a) & (d < a)).astype(float)
        b = a + self.transition_width
        roll = np.cos(np.pi * (u - a) / (2 * (b - a))) ** 2
        return np.where(u <= a, 1.0, np.where(u < b, roll, 0.0))

    def __call__(self, x):
        """``s(x) = ∫ s^(xi) exp(2 pi i x xi) dxi`` in closed form."""
        x = np.asarray(x, dtype=float)
        ph = np.exp(2j * np.pi * self.center * x)
        a = self.Omega / 2
        if self.kind == "sharp-characteristic":
            return ph * self.Omega * np.sinc(self.Omega * x)
        b = a + self.transition_width
        d = b - a
        den = 1 - 4 * d * d * x * x
        sing = np.abs(den) < 1e-8
        safe = np.where(sing, 1.0, den)
        val = (a + b) * np.sinc((a + b) * x) * np.cos(np.pi * d * x) / safe
        lim = (a + b) * (np.pi / 4) * np.sinc((a + b) / (2 * d))
        return ph * np.where(sing, lim, val)

    def decay_radius(self, rel: float = 1e-8, cap: float | None = None) -> float:
        """Smallest ``R`` beyond which the envelope of ``|s|`` stays below ``rel * s(0)``."""
        peak = abs(complex(self(0.0)))
        if self.kind == "sharp-characteristic":
            # |s(x)| <= 1/(pi |x|)
            R = 1.0 / (np.pi * rel * peak)
        else:
            a = self.Omega / 2
            d = self.transition_width
            # |sinc((a+b)x) cos / (1 - 4 d^2 x^2)| <= 1/(pi (a+b) |x| (4 d^2 x^2 - 1))
            R = max(1.0 / d, ((1.0 / (np.pi * rel * peak)) / (4 * d * d)) ** (1 / 3))
            R = max(R, 1.0 / (2 * d) + 1.0)
            del a
        if cap is not None:
            R = min(R, cap)
        return float(R)

    def grid_spectrum(self) -> np.ndarray:
        """``dt * DFT`` of the stored samples, phase-corrected for the time origin (fftfreq order)."""
        s = self.signal
        freqs = np.fft.fftfreq(s.n, d=s.dt)
        return s.dt * np.fft.fft(s.samples) * np.exp(-2j * np.pi * freqs * s.t0)


def build_window(T: float, Omega: float, dt: float, n: int, kind: str = "raised-cosine-spectrum",
                 center: float = 0.0) -> Window:
    """Window for reconstruction from samples at spacing ``T`` of a band of width ``Omega``.

    The raised-cosine kind has ``s^ = 1`` on ``[c - Omega/2, c + Omega/2]``, a
    cosine-squared roll-off to zero at ``|xi - c| = 1/(2T)``, and requires
    ``T*Omega < 1``.  The sharp kind is the indicator of the passband and
    requires ``T*Omega <= 1``.  Samples are placed on ``t0 = -(n//2)*dt``.
    """
    if not (T > 0 and Omega > 0 and dt > 0 and n >= 1):
        raise ValueError("T, Omega, dt must be positive and n >= 1")
    if kind == "raised-cosine-spectrum":
        if T * Omega >= 1:
            raise PreconditionError("raised-cosine window needs T*Omega < 1 (no slack band)")
        tw = 1 / (2 * T) - Omega / 2
    elif kind == "sharp-characteristic":
        if T * Omega > 1 + 1e-12:
            raise PreconditionError("sharp window needs T*Omega <= 1")
        tw = 0.0
    else:
        raise ValueError(f"unknown window kind {kind!r}")
    t0 = -(n // 2) * dt
    proto = Window(SampledSignal(np.zeros(n), t0, dt), (center - Omega / 2, center + Omega / 2),
                   tw, kind, T, Omega, center)
    freqs = np.fft.fftfreq(n, d=dt)
    spec = proto.spectrum(freqs) * np.exp(2j * np.pi * freqs * t0)
    samples = np.fft.ifft(spec) / dt
    return Window(SampledSignal(samples, t0, dt), proto.passband, tw, kind, T, Omega, center)


def kn_symbol_grid(op, x, xi) -> np.ndarray:
    """Kohn–Nirenberg symbol on the tensor grid ``x`` by ``xi`` (closed form)."""
    from .model import kn_symbol

    x, xi = np.asarray(x, float), np.asarray(xi, float)
    return kn_symbol(op, x[:, None], xi[None, :])


def kn_symbol_from_impulse(h, t0: float, dt: float, xi) -> np.ndarray:
    """Riemann-sum transform ``sum_k h[..., k] exp(-2 pi i (t0 + k dt) xi) dt`` along the last axis."""
    h = np.asarray(h, dtype=complex)
    t = t0 + dt * np.arange(h.shape[-1])
    E = np.exp(-2j * np.pi * np.outer(t, np.asarray(xi, float)))
    return (h @ E) * dt
