"""Operators, signals and delta trains.

An operator ``H`` is described by its spreading function ``eta``::

    Hf(x) = ∬ eta(t, nu) exp(2 pi i nu x) f(x - t) dt dnu

which is equivalent to the time-varying impulse response
``h(x, t) = ∫ eta(t, nu) exp(2 pi i nu x) dnu`` (so ``Hf(x) = ∫ h(x, t) f(x - t) dt``),
the kernel ``kappa(x, y) = h(x, x - y)`` and the Kohn–Nirenberg symbol
``sigma(x, xi) = ∫ h(x, t) exp(-2 pi i t xi) dt``.

Continuous operators are finite sums of separable atoms
``coeff * p(t) * q(nu)`` whose profiles have closed-form Fourier transforms,
so impulse responses and train responses need no quadrature.  The finite
model on ``Z_N`` is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import comb, factorial

from .errors import DomainCoverageError, GridError
from .geometry import Rect, SupportSet

__all__ = [
    "SampledSignal",
    "DeltaTrain",
    "RaisedCosine",
    "BSpline",
    "profile_from_dict",
    "SpreadingAtom",
    "GroundTruthOperator",
    "DiscreteOperator",
    "eval_spreading",
    "impulse_response",
    "kernel",
    "kn_symbol",
    "apply",
    "apply_train",
    "hs_norm",
    "discrete_apply",
    "discrete_matrix",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


# --------------------------------------------------------------------------- signals


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Complex samples ``samples[n] ≈ f(t0 + n*dt)``."""

    samples: np.ndarray
    t0: float
    dt: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).ravel()
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_function(cls, func, t0: float, dt: float, n: int) -> "SampledSignal":
        t = t0 + dt * np.arange(n)
        return cls(func(t), t0, dt)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        """Last sample time."""
        return self.t0 + self.dt * (self.n - 1)

    def norm(self) -> float:
        """Riemann approximation of the L2 norm, ``sqrt(dt * sum |f|^2)``."""
        return float(np.sqrt(self.dt) * np.linalg.norm(self.samples))

    def index(self, x, tol: float = 1e-9) -> np.ndarray:
        """Sample indices of grid points ``x`` (raises :class:`GridError` if off-grid)."""
        r = (np.asarray(x, dtype=float) - self.t0) / self.dt
        k = np.rint(r)
        if np.any(np.abs(r - k) > tol):
            raise GridError("requested points are not on the sample grid")
        return k.astype(np.int64)

    def __add__(self, other):
        if not isinstance(other, SampledSignal):
            return NotImplemented
        if other.n != self.n or not np.isclose(other.t0, self.t0) or not np.isclose(other.dt, self.dt):
            raise GridError("signals live on different grids")
        return SampledSignal(self.samples + other.samples, self.t0, self.dt)

    def scaled(self, a) -> "SampledSignal":
        return SampledSignal(a * self.samples, self.t0, self.dt)


@dataclass(frozen=True, eq=False)
class DeltaTrain:
    """``g = sum_n weights[n mod P] * delta_{n*spacing + offset}``."""

    spacing: float
    offset: float = 0.0
    weights: np.ndarray = field(default_factory=lambda: np.ones(1, complex))

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=complex)).copy()
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if w.size == 0 or not np.any(w != 0):
            raise ValueError("at least one weight must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def period(self) -> int:
        return self.weights.size

    def weight(self, n):
        return self.weights[np.mod(n, self.period)]

    def to_dict(self) -> dict:
        return {"spacing": self.spacing, "offset": self.offset,
                "weights": [[float(w.real), float(w.imag)] for w in self.weights]}

    @classmethod
    def from_dict(cls, d: dict) -> "DeltaTrain":
        return cls(d["spacing"], d.get("offset", 0.0), _complex_list(d.get("weights", [1.0])))


def _complex_list(v):
    out = []
    for w in v:
        if isinstance(w, (list, tuple)):
            out.append(complex(w[0], w[1]))
        else:
            out.append(complex(w))
    return np.asarray(out, dtype=complex)


# --------------------------------------------------------------------------- profiles


@dataclass(frozen=True)
class RaisedCosine:
    """``p(u) = (1 + cos(2 pi (u - center)/width))/2`` on ``[center - width/2, center + width/2)``."""

    center: float
    width: float

    kind = "raised-cosine"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def support(self):
        return self.center - self.width / 2, self.center + self.width / 2

    @property
    def knots(self) -> np.ndarray:
        return np.array(self.support)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a, b = self.support
        inside = (u >= a) & (u < b)
        return np.where(inside, 0.5 * (1 + np.cos(2 * np.pi * (u - self.center) / self.width)), 0.0)

    def ft(self, x):
        """``∫ p(u) exp(2 pi i u x) du``."""
        x = np.asarray(x, dtype=float)
        wx = self.width * x
        amp = self.width * (0.5 * np.sinc(wx) + 0.25 * (np.sinc(wx - 1) + np.sinc(wx + 1)))
        return np.exp(2j * np.pi * self.center * x) * amp

    def norm2(self) -> float:
        return 3 * self.width / 8

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": self.center, "width": self.width}


@dataclass(frozen=True)
class BSpline:
    """Centered cardinal B-spline of the given order stretched to ``width``.

    ``p(u) = M_n(n (u - center)/width + n/2)`` with ``M_n`` the cardinal
    B-spline of order ``n`` on ``[0, n]``; the peak value of order 2 is 1.
    """

    center: float
    width: float
    order: int = 4

    kind = "bspline"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("order must be a positive integer")

    @property
    def support(self):
        return self.center - self.width / 2, self.center + self.width / 2

    @property
    def knots(self) -> np.ndarray:
        n = self.order
        return self.center + (np.arange(n + 1) - n / 2) * self.width / n

    def __call__(self, u):
        n = int(self.order)
        v = n * (np.asarray(u, dtype=float) - self.center) / self.width + n / 2
        out = np.zeros_like(v)
        for k in range(n + 1):
            d = v - k
            if n == 1:
                out += (-1) ** k * comb(n, k) * (d >= 0)
            else:
                out += (-1) ** k * comb(n, k) * np.where(d > 0, d, 0.0) ** (n - 1)
        out /= factorial(n - 1)
        return np.where((v >= 0) & (v < n), out, 0.0)

    def ft(self, x):
        """``∫ p(u) exp(2 pi i u x) du``."""
        x = np.asarray(x, dtype=float)
        n = int(self.order)
        h = self.width / n
        return np.exp(2j * np.pi * self.center * x) * h * np.sinc(h * x) ** n

    def norm2(self) -> float:
        return _inner(self, self)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": self.center, "width": self.width, "order": int(self.order)}


def profile_from_dict(d: dict):
    kind = d["kind"]
    if kind == "raised-cosine":
        return RaisedCosine(float(d["center"]), float(d["width"]))
    if kind == "bspline":
        return BSpline(float(d["center"]), float(d["width"]), int(d.get("order", 4)))
    raise ValueError(f"unknown profile kind {kind!r}")


def _inner(p, q) -> float:
    """``∫ p q`` by Gauss–Legendre on each polynomial/trigonometric piece of the overlap."""
    a = max(p.support[0], q.support[0])
    b = min(p.support[1], q.support[1])
    if b <= a:
        return 0.0
    br = np.unique(np.concatenate([[a, b], p.knots, q.knots]))
    br = br[(br >= a) & (br <= b)]
    total = 0.0
    for lo, hi in zip(br[:-1], br[1:]):
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        u = mid + half * _GL_NODES
        total += half * np.dot(_GL_WEIGHTS, p(u) * q(u))
    return float(total)


# --------------------------------------------------------------------------- operators


@dataclass(frozen=True)
class SpreadingAtom:
    """``coeff * tprofile(t) * nuprofile(nu)``."""

    coeff: complex
    tprofile: object
    nuprofile: object

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))

    def rect(self) -> Rect:
        (a, b), (c, d) = self.tprofile.support, self.nuprofile.support
        return Rect(a, b, c, d)

    def to_dict(self) -> dict:
        return {"coeff": [self.coeff.real, self.coeff.imag],
                "t": self.tprofile.to_dict(), "nu": self.nuprofile.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SpreadingAtom":
        c = d.get("coeff", 1.0)
        c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
        return cls(c, profile_from_dict(d["t"]), profile_from_dict(d["nu"]))


@dataclass(frozen=True, eq=False)
class GroundTruthOperator:
    """Finite atom sum with a declared spreading support.

    If ``support`` is omitted the union of the atom rectangles is used.
    """

    atoms: tuple = ()
    support: SupportSet | None = None

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.support is None:
            object.__setattr__(self, "support", SupportSet.from_rects(a.rect() for a in atoms))
        elif atoms:
            own = SupportSet.from_rects(a.rect() for a in atoms)
            if not own.is_subset_of(self.support):
                raise ValueError("atom supports are not contained in the declared support")

    @property
    def time_support(self):
        """Smallest interval containing the time profiles' supports."""
        if not self.atoms:
            return 0.0, 0.0
        return (min(a.tprofile.support[0] for a in self.atoms),
                max(a.tprofile.support[1] for a in self.atoms))

    def to_dict(self) -> dict:
        return {"atoms": [a.to_dict() for a in self.atoms], "support": self.support.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthOperator":
        atoms = tuple(SpreadingAtom.from_dict(a) for a in d.get("atoms", []))
        sup = SupportSet.from_dict(d["support"]) if "support" in d else None
        return cls(atoms, sup)


def eval_spreading(op: GroundTruthOperator, t, nu):
    """``eta(t, nu)``, vectorised over broadcastable ``t`` and ``nu``."""
    t, nu = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(nu, dtype=float))
    out = np.zeros(t.shape, dtype=complex)
    for a in op.atoms:
        out += a.coeff * a.tprofile(t) * a.nuprofile(nu)
    if op.atoms:
        out = np.where(op.support.contains(t, nu), out, 0)
    return out


def impulse_response(op: GroundTruthOperator, x, t):
    """``h(x, t) = ∫ eta(t, nu) exp(2 pi i nu x) dnu`` in closed form."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    out = np.zeros(x.shape, dtype=complex)
    for a in op.atoms:
        out += a.coeff * a.tprofile(t) * a.nuprofile.ft(x)
    return out


def kernel(op: GroundTruthOperator, x, y):
    """``kappa(x, y) = h(x, x - y)``."""
    x = np.asarray(x, dtype=float)
    return impulse_response(op, x, x - np.asarray(y, dtype=float))


def kn_symbol(op: GroundTruthOperator, x, xi):
    """Kohn–Nirenberg symbol ``sigma(x, xi) = ∫ h(x, t) exp(-2 pi i t xi) dt``."""
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    out = np.zeros(x.shape, dtype=complex)
    for a in op.atoms:
        out += a.coeff * a.nuprofile.ft(x) * a.tprofile.ft(-xi)
    return out


def hs_norm(op: GroundTruthOperator) -> float:
    """Hilbert–Schmidt norm, ``||eta||_L2``, from closed-form atom inner products."""
    atoms = op.atoms
    total = 0.0 + 0.0j
    for i, a in enumerate(atoms):
        for j, b in enumerate(atoms):
            if j < i:
                continue
            g = a.coeff * np.conj(b.coeff) * _inner(a.tprofile, b.tprofile) * _inner(a.nuprofile, b.nuprofile)
            total += g if i == j else 2 * g.real
    return float(np.sqrt(max(total.real, 0.0)))


def apply(op: GroundTruthOperator, f: SampledSignal, substeps: int = 8, x=None, chunk: int = 4096) -> SampledSignal:
    """Approximate ``Hf`` by trapezoid quadrature of ``∫ h(x, t) f(x - t) dt``.

    The quadrature step is ``f.dt / substeps``; ``f`` is interpolated between
    samples by a cubic spline.  Output points ``x`` default to the points of
    ``f``'s grid at which every needed value ``f(x - t)`` is available.

    Raises
    ------
    DomainCoverageError
        When ``f`` does not cover ``x - t`` for some requested ``x`` and ``t``
        in the operator's time support.
    """
    if int(substeps) != substeps or substeps < 1:
        raise GridError("quadrature step must divide the sample step")
    ta, tb = op.time_support
    lo, hi = f.t0, f.t_end
    if x is None:
        k0 = math.ceil((lo + tb - f.t0) / f.dt - 1e-9)
        k1 = math.floor((hi + ta - f.t0) / f.dt + 1e-9)
        if k1 < k0:
            raise DomainCoverageError("signal too short for the operator's time support")
        out_t0, out_n = f.t0 + k0 * f.dt, k1 - k0 + 1
        x = out_t0 + f.dt * np.arange(out_n)
        grid = (out_t0, f.dt)
    else:
        x = np.asarray(x, dtype=float)
        grid = (float(x[0]), float(x[1] - x[0]) if x.size > 1 else f.dt)
        if x.size and (x.min() - tb < lo - 1e-9 * f.dt or x.max() - ta > hi + 1e-9 * f.dt):
            raise DomainCoverageError("signal does not cover x - t for the requested output points")
    if not op.atoms:
        return SampledSignal(np.zeros(x.size, complex), grid[0], grid[1])
    # nodes on the fixed lattice h*Z (independent of the operator, so apply is
    # exactly linear in the operator); trapezoid end weights over [ta, tb]
    h = f.dt / substeps
    tq = h * np.arange(math.floor(ta / h), math.ceil(tb / h) + 1)
    wq = np.full(tq.size, h)
    wq[0] = wq[-1] = h / 2
    spline = CubicSpline(f.t, f.samples)
    out = np.empty(x.size, dtype=complex)
    for s in range(0, x.size, chunk):
        xs = x[s:s + chunk]
        arg = np.clip(xs[:, None] - tq[None, :], lo, hi)
        fv = spline(arg)
        acc = np.zeros(xs.size, dtype=complex)
        for a in op.atoms:
            acc += a.coeff * a.nuprofile.ft(xs) * (fv @ (wq * a.tprofile(tq)))
        out[s:s + chunk] = acc
    return SampledSignal(out, grid[0], grid[1])


def apply_train(op: GroundTruthOperator, g: DeltaTrain, t0: float, dt: float, n: int) -> SampledSignal:
    """Exact response ``Hg(x) = sum_n w_n h(x, x - lambda_n)`` on ``x = t0 + dt*k``.

    Terms are summed per atom in increasing ``n``, which fixes the
    floating-point summation order.
    """
    x = t0 + dt * np.arange(n)
    out = np.zeros(n, dtype=complex)
    s, o = g.spacing, g.offset
    for a in op.atoms:
        ta, tb = a.tprofile.support
        # lambda_n in (x - tb, x - ta]
        n0 = np.floor((x - tb - o) / s).astype(np.int64)
        count = int(math.ceil((tb - ta) / s)) + 2
        bx = a.coeff * a.nuprofile.ft(x)
        for j in range(count):
            nn = n0 + j
            tt = x - (nn * s + o)
            out += g.weight(nn) * a.tprofile(tt) * bx
    return SampledSignal(out, t0, dt)


# --------------------------------------------------------------------------- finite model


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Operator on ``C^N`` with spreading coefficients ``eta[k, m]`` (time shift k, frequency shift m)."""

    eta: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eta, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise ValueError("eta must be a nonempty square array")
        object.__setattr__(self, "eta", e)

    @property
    def N(self) -> int:
        return self.eta.shape[0]

    def to_dict(self) -> dict:
        return {"N": self.N, "eta_re": self.eta.real.tolist(), "eta_im": self.eta.imag.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteOperator":
        e = np.asarray(d["eta_re"], float) + 1j * np.asarray(d.get("eta_im", 0.0), float)
        if e.shape != (d["N"], d["N"]):
            raise ValueError("eta shape does not match N")
        return cls(e)


def _multipliers(dop: DiscreteOperator) -> np.ndarray:
    # M[k, n] = sum_m eta[k, m] exp(2 pi i m n / N)
    N = dop.N
    return N * np.fft.ifft(dop.eta, axis=1)


def discrete_apply(dop: DiscreteOperator, f) -> np.ndarray:
    """``(Hf)[n] = sum_{k,m} eta[k,m] exp(2 pi i m n/N) f[(n-k) mod N]``."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (dop.N,):
        raise ValueError(f"expected a vector of length {dop.N}, got shape {f.shape}")
    M = _multipliers(dop)
    out = np.zeros(dop.N, dtype=complex)
    for k in range(dop.N):
        out += M[k] * np.roll(f, k)
    return out


def discrete_matrix(dop: DiscreteOperator) -> np.ndarray:
    """Matrix ``A`` with ``discrete_apply(dop, f) == A @ f`` (the discrete kernel)."""
    N = dop.N
    M = _multipliers(dop)
    A = np.zeros((N, N), dtype=complex)
    n = np.arange(N)
    for k in range(N):
        A[n, (n - k) % N] += M[k]
    return A
