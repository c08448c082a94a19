"""Operator reconstruction from the response to a single delta train.

Rectangle engine
    For ``supp eta ⊆ A x B`` with ``|A| <= T`` and a train ``sum_m delta_{mT+o}``,
    the response ``y`` satisfies ``y(t + mT + o) = h(t + mT + o, t)`` for
    ``t`` in ``A``; each slice ``h(., t)`` is band limited to ``B`` and is
    recovered by the sampling series
    ``h(x, t) = sum_m y(t + mT + o) * T * s(x - t - mT - o)``.

Multi-cell engine
    For ``supp eta`` inside a union of cells of the (K, L) grid and the train
    ``g = sum_n c_{n mod L} delta_{n/K}``, the coset Zak transforms
    ``Z_j(t, nu) = sum_m y(t + (mL+j)/K) exp(-2 pi i nu (t + (mL+j)/K))``
    satisfy, for ``(t, nu)`` in ``[0, 1/K) x [0, K/L)``,
    ``Z_j = sum_{k,l} c_{j-k} exp(2 pi i j l/L) u_{k,l}`` with
    ``u_{k,l} = (K/L) eta(t + k/K, nu + lK/L) exp(2 pi i l K t / L)``.
    The matrix has the columns ``tf_shift(c, k, l)`` and does not depend on
    ``(t, nu)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainCoverageError, GridError, PreconditionError, SingularSystemError
from .gabor import DEFAULT_COND_CAP, CellPattern, pattern_matrix, rng_for
from .geometry import CellCover
from .model import GroundTruthOperator, SampledSignal, eval_spreading, impulse_response
from .transforms import Window, build_window

__all__ = [
    "ReconstructionReport",
    "UnmixingSystem",
    "reconstruct_rect",
    "reconstruct_lattice",
    "build_unmixing",
    "reconstruct_multicell",
    "multicell_impulse_response",
    "spreading_to_impulse",
    "identify_function",
    "identify_convolution",
    "conditioning_sweep",
    "sweep_to_csv",
    "default_radius",
]

RADIUS_CAP_PERIODS = 4096


@dataclass(eq=False)
class ReconstructionReport:
    """Recovered samples plus diagnostics.

    ``recovered[i, j]`` is the value at ``(axes[0][i], axes[1][j])``;
    ``axis_names`` says what the two axes are.
    """

    recovered: np.ndarray
    axes: tuple
    axis_names: tuple
    relL2Error: float | None = None
    perCellCondition: list = field(default_factory=list)
    residual: float = 0.0
    settings: dict = field(default_factory=dict)

    def grid_metadata(self) -> dict:
        a0, a1 = (np.asarray(a, float) for a in self.axes)
        return {"t0": float(a0[0]), "dt0": float(a0[1] - a0[0]) if a0.size > 1 else 0.0,
                "t1": float(a1[0]), "dt1": float(a1[1] - a1[0]) if a1.size > 1 else 0.0,
                "dims": [int(a0.size), int(a1.size)], "axes": list(self.axis_names)}

    def to_dict(self) -> dict:
        return {"grid": self.grid_metadata(), "relL2Error": self.relL2Error,
                "perCellCondition": [float(v) for v in self.perCellCondition],
                "residual": float(self.residual), "settings": self.settings}


def _rel_err(rec, true) -> float:
    nt = np.linalg.norm(true)
    d = np.linalg.norm(rec - true)
    return float(d / nt) if nt > 0 else float(d)


def default_radius(window: Window, T: float, rel: float = 1e-8) -> float:
    """Truncation radius: where the window envelope falls below ``rel`` of its peak (capped)."""
    return window.decay_radius(rel, cap=RADIUS_CAP_PERIODS * T)


def _interval(A):
    """Accept ``(a, b)`` or a single-rectangle :class:`SupportSet`-like object."""
    if hasattr(A, "to_rects"):
        rs = A.to_rects()
        if len(rs) != 1:
            raise PreconditionError("expected a single rectangle")
        r = rs[0]
        return (float(r.t0), float(r.t1)), (float(r.nu0), float(r.nu1))
    return (float(A[0]), float(A[1])), None


def reconstruct_lattice(y: SampledSignal, A, B, T: float, window: Window, x, nt: int | None = None,
                        offset: float = 0.0, radius: float | None = None,
                        truth: GroundTruthOperator | None = None) -> ReconstructionReport:
    """Recover ``h(x, t)`` for ``t`` in ``A`` from the response to ``sum_m delta_{mT+offset}``.

    Parameters
    ----------
    y : response sampled with a step dividing ``T``.
    A, B : time and frequency intervals ``(lo, hi)`` of the spreading support.
    window : reconstruction window with ``s^ = 1`` on ``B``.
    x : output points.
    nt : number of ``t`` samples in ``A`` (default: every sample of ``y``).
    radius : series truncation, terms with ``|x - t - lambda| <= radius``
        (default :func:`default_radius`).

    Returns a report whose ``recovered[i, j] = h(x_i, t_j)``.
    """
    (a0, a1), _ = _interval(A)
    (b0, b1), _ = _interval(B)
    tol = 1e-9 * max(1.0, T)
    if a1 - a0 > T + tol:
        raise PreconditionError("A is longer than the lattice period (not in a fundamental domain)")
    if b0 < window.passband[0] - tol or b1 > window.passband[1] + tol:
        raise PreconditionError("window passband does not contain B")
    if (b1 - b0) + 2 * window.transition_width > 1 / T + tol:
        raise PreconditionError("B widened by the window transition exceeds the dual period 1/T")
    P = T / y.dt
    Pi = int(round(P))
    if Pi < 1 or abs(P - Pi) > 1e-9 * P:
        raise GridError("sample step must divide T")
    nA = (a1 - a0) / y.dt
    nAi = int(round(nA))
    if abs(nA - nAi) > 1e-6:
        raise GridError("A must be a whole number of sample steps long")
    if nt is None:
        nt = nAi
    if nt < 1 or nAi % nt:
        raise GridError("nt must divide the number of samples in A")
    t = a0 + y.dt * (nAi // nt) * np.arange(nt)
    it0 = y.index(t, tol=1e-6)
    if radius is None:
        radius = default_radius(window, T)
    x = np.asarray(x, dtype=float)
    m_lo = math.floor((x.min() - a1 - radius - offset) / T)
    m_hi = math.ceil((x.max() - a0 + radius - offset) / T)
    m = np.arange(m_lo, m_hi + 1)
    shift = np.rint((m * T + offset) / y.dt).astype(np.int64)
    if abs((offset / y.dt) - round(offset / y.dt)) > 1e-6:
        raise GridError("train offset is not on the sample grid")
    out = np.zeros((x.size, nt), dtype=complex)
    for j in range(nt):
        lam = m * T + offset
        idx = it0[j] + shift
        z = x[:, None] - t[j] - lam[None, :]
        use = np.abs(z) <= radius
        cols = np.nonzero(use.any(axis=0))[0]
        if cols.size == 0:
            continue
        idx_c = idx[cols]
        if idx_c.min() < 0 or idx_c.max() >= y.n:
            raise DomainCoverageError("response does not cover the truncated series")
        zc = z[:, cols]
        w = np.where(use[:, cols], T * window(zc), 0)
        out[:, j] = w @ y.samples[idx_c]
    err = None
    if truth is not None:
        err = _rel_err(out, impulse_response(truth, x[:, None], t[None, :]))
    settings = {"engine": "lattice", "T": T, "A": [a0, a1], "B": [b0, b1], "offset": offset,
                "radius": float(radius), "window": window.kind, "window_center": window.center,
                "transition_width": window.transition_width}
    return ReconstructionReport(out, (x, t), ("x", "t"), err, [1.0], 0.0, settings)


def reconstruct_rect(y: SampledSignal, T: float, Omega: float, window: Window, x, nt: int | None = None,
                     radius: float | None = None, truth: GroundTruthOperator | None = None) -> ReconstructionReport:
    """Rectangle case ``A = [0, T)``, ``B = [-Omega/2, Omega/2)`` of :func:`reconstruct_lattice`."""
    if window.kind != "sharp-characteristic" and T * Omega >= 1:
        raise PreconditionError("T*Omega must be < 1 for a smooth window")
    if T * Omega > 1 + 1e-12:
        raise PreconditionError("T*Omega must be <= 1")
    c = window.center
    return reconstruct_lattice(y, (0.0, T), (c - Omega / 2, c + Omega / 2), T, window, x, nt,
                               0.0, radius, truth)


# --------------------------------------------------------------------------- multi-cell


@dataclass(frozen=True, eq=False)
class UnmixingSystem:
    """``matrix[j, q] = c_{(j - k_q) mod L} exp(2 pi i j l_q / L)`` for the cover cells ``(k_q, l_q)``."""

    K: int
    L: int
    cells: CellPattern
    matrix: np.ndarray
    pinv: np.ndarray
    condition: float

    def per_cell_condition(self) -> np.ndarray:
        """``||G|| * ||row q of G^+||``: noise gain of unknown ``q`` relative to the data norm (>= 1)."""
        s = np.linalg.norm(self.matrix, 2)
        return s * np.linalg.norm(self.pinv, axis=1)


def build_unmixing(cover: CellCover, c, cond_cap: float = DEFAULT_COND_CAP) -> UnmixingSystem:
    c = np.asarray(c, dtype=complex)
    if c.size != cover.L:
        raise ValueError("len(c) must equal the cover's L")
    pat = CellPattern(cover.cells)
    G = pattern_matrix(pat, c)
    sv = np.linalg.svd(G, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    if not cond <= cond_cap:
        raise SingularSystemError(
            f"unmixing matrix ill-conditioned (cond={cond:.3g}); try another identifier (search_identifier)", cond)
    return UnmixingSystem(cover.K, cover.L, pat, G, np.linalg.pinv(G), cond)


def _coset_samples(y: SampledSignal, K: int, L: int, t, m_range):
    """``Y[j, i, m] = y(t_i + (mL + j)/K)`` and the sample positions."""
    p = (np.arange(m_range[0], m_range[1] + 1)[None, :] * L + np.arange(L)[:, None])     # (L, M)
    pos = t[None, :, None] + p[:, None, :] / K                                               # (L, nt, M)
    idx = y.index(pos, tol=1e-6)
    if idx.min() < 0 or idx.max() >= y.n:
        raise DomainCoverageError("response does not cover the coset sums")
    return y.samples[idx], pos


def _m_range(y: SampledSignal, K: int, L: int, t, span: float | None):
    lo, hi = y.t0, y.t_end
    if span is not None:
        lo, hi = max(lo, -span), min(hi, span)
    m0 = math.ceil((lo - t.min()) * K / L)
    m1 = math.floor(((hi - t.max()) * K - (L - 1)) / L)
    if m1 < m0:
        raise DomainCoverageError("response too short for one coset period")
    return m0, m1


def reconstruct_multicell(y: SampledSignal, cover: CellCover, c, nt: int, nnu: int,
                          span: float | None = None, truth: GroundTruthOperator | None = None,
                          cond_cap: float = DEFAULT_COND_CAP) -> ReconstructionReport:
    """Recover ``eta`` on the cover from the response to ``sum_n c_{n mod L} delta_{n/K}``.

    The fundamental cell ``[0, 1/K) x [0, K/L)`` is sampled with ``nt`` by
    ``nnu`` points; the output covers ``[0, 1) x [0, K)`` (shape
    ``(K*nt, L*nnu)``) and is zero outside the cover.  Coset sums use every
    available sample with ``|x| <= span`` (default: all of ``y``).
    """
    K, L = cover.K, cover.L
    system = build_unmixing(cover, c, cond_cap)
    step = 1.0 / (K * nt)
    if abs(step / y.dt - round(step / y.dt)) > 1e-6:
        raise GridError("t-grid step of the fundamental cell must be a multiple of the sample step")
    t = step * np.arange(nt)
    nu = (K / L) * np.arange(nnu) / nnu
    m_range = _m_range(y, K, L, t, span)
    Y, pos = _coset_samples(y, K, L, t, m_range)                 # (L, nt, M)
    E = np.exp(-2j * np.pi * pos[..., None] * nu)                # (L, nt, M, nnu)
    Z = np.einsum("jim,jimv->jiv", Y, E)                          # (L, nt, nnu)
    U = np.einsum("qj,jiv->qiv", system.pinv, Z)
    resid = np.einsum("jq,qiv->jiv", system.matrix, U) - Z
    out = np.zeros((K * nt, L * nnu), dtype=complex)
    for q, (k, l) in enumerate(system.cells.cells):
        phase = np.exp(-2j * np.pi * l * K * t / L)[:, None]
        out[k * nt:(k + 1) * nt, l * nnu:(l + 1) * nnu] = (L / K) * U[q] * phase
    tt = step * np.arange(K * nt)
    vv = (K / L) * np.arange(L * nnu) / nnu
    err = None
    if truth is not None:
        err = _rel_err(out, eval_spreading(truth, tt[:, None], vv[None, :]))
    settings = {"engine": "multicell", "K": K, "L": L, "cells": [list(q) for q in cover.cells],
                "nt": nt, "nnu": nnu, "m_range": list(m_range), "condition": system.condition}
    rnorm = float(np.linalg.norm(resid) / max(np.linalg.norm(Z), 1e-300))
    return ReconstructionReport(out, (tt, vv), ("t", "nu"), err, list(system.per_cell_condition()),
                                rnorm, settings)


def multicell_impulse_response(y: SampledSignal, cover: CellCover, c, x, nt: int, radius: float,
                               cond_cap: float = DEFAULT_COND_CAP) -> ReconstructionReport:
    """Impulse response of the multi-cell reconstruction, ``h(x, t + k/K)`` on the cover's time slots.

    Integrating the recovered ``eta`` over each cell's frequency band in closed
    form turns the coset sums into a sampling series with the sharp kernel
    ``S(z) = ∫_0^{K/L} exp(2 pi i nu z) dnu``; terms with ``|x - sample| <= radius``
    are kept.  Returns ``recovered[i, j] = h(x_i, t_j)`` for ``t`` in ``[0, 1)``.
    """
    K, L = cover.K, cover.L
    system = build_unmixing(cover, c, cond_cap)
    x = np.asarray(x, dtype=float)
    step = 1.0 / (K * nt)
    t = step * np.arange(nt)
    kern = build_window(1.0, K / L, 1.0, 1, "sharp-characteristic", center=K / (2 * L))
    out = np.zeros((x.size, K * nt), dtype=complex)
    m_range = (math.floor((x.min() - radius - 1) * K / L) - 1, math.ceil((x.max() + radius) * K / L) + 1)
    Y, pos = _coset_samples(y, K, L, t, m_range)                 # (L, nt, M)
    for i in range(nt):
        z = x[:, None, None] - pos[None, :, i, :]                 # (nx, L, M)
        S = np.where(np.abs(z) <= radius, kern(z), 0)
        V = np.einsum("xjm,jm->xj", S, Y[:, i, :])                # (nx, L)
        for q, (k, l) in enumerate(system.cells.cells):
            mod = np.exp(2j * np.pi * l * K * (x - t[i]) / L)
            out[:, k * nt + i] += (L / K) * mod * (V @ system.pinv[q])
    tt = step * np.arange(K * nt)
    settings = {"engine": "multicell-impulse", "K": K, "L": L, "radius": float(radius)}
    return ReconstructionReport(out, (x, tt), ("x", "t"), None, list(system.per_cell_condition()), 0.0, settings)


def spreading_to_impulse(eta, nu, x) -> np.ndarray:
    """``h(x, t) = ∫ eta(t, nu) exp(2 pi i nu x) dnu`` by the trapezoid rule on the ``nu`` grid.

    ``eta`` has shape ``(n_t, n_nu)``; returns shape ``(len(x), n_t)``.
    """
    eta = np.asarray(eta, dtype=complex)
    nu = np.asarray(nu, dtype=float)
    w = np.gradient(nu) if nu.size > 1 else np.ones(1)
    if nu.size > 1:
        w = np.full(nu.size, nu[1] - nu[0])
        w[0] = w[-1] = (nu[1] - nu[0]) / 2
    E = np.exp(2j * np.pi * np.outer(np.asarray(x, float), nu))
    return (E * w) @ eta.T


# --------------------------------------------------------------------------- corollaries


def identify_function(samples, T: float, window: Window, x, k0: int = 0, radius: float | None = None) -> SampledSignal:
    """Band-limited interpolation ``m(x) = sum_k m(kT) * T * s(x - kT)``.

    ``samples[i] = m((k0 + i) T)``; terms with ``|x - kT| <= radius`` are used.
    ``x`` must be uniform.
    """
    samples = np.asarray(samples, dtype=complex)
    x = np.asarray(x, dtype=float)
    if radius is None:
        radius = default_radius(window, T)
    k = k0 + np.arange(samples.size)
    out = np.zeros(x.size, dtype=complex)
    for s in range(0, x.size, 512):
        z = x[s:s + 512, None] - k[None, :] * T
        w = np.where(np.abs(z) <= radius + 1e-12 * T, T * window(z), 0)
        out[s:s + 512] = w @ samples
    dx = float(x[1] - x[0]) if x.size > 1 else 1.0
    return SampledSignal(out, float(x[0]), dx)


def identify_convolution(y):
    """The response to ``delta_0`` of a time-invariant channel is its impulse response."""
    if isinstance(y, SampledSignal):
        return SampledSignal(y.samples.copy(), y.t0, y.dt)
    return np.array(y, dtype=complex, copy=True)


# --------------------------------------------------------------------------- conditioning


def conditioning_sweep(L: int, c, areaCells, trials: int = 100, seed: int = 0) -> list:
    """Smallest singular value of random ``L x |Gamma|`` unmixing matrices.

    Trial ``i`` draws one permutation of the ``L^2`` cells from stream
    ``(seed, 2, i)`` and uses its first ``|Gamma|`` cells, so within a trial
    patterns are nested and ``sigma_min`` is non-increasing in ``|Gamma|``.
    Patterns with more than ``L`` cells are flagged underdetermined and get
    ``sigma_min = 0``.

    Returns rows ``(areaCells, trial, sigma_min, flagged)``.
    """
    c = np.asarray(c, dtype=complex)
    if c.size != L:
        raise ValueError("len(c) must equal L")
    if any(int(a) < 1 for a in areaCells):
        raise ValueError("areaCells entries must be >= 1")
    from .gabor import gabor_matrix

    G = gabor_matrix(c)
    perms = [rng_for(seed, 2, i).permutation(L * L) for i in range(trials)]
    rows = []
    for a in areaCells:
        a = int(a)
        for i in range(trials):
            if a > L:
                rows.append((a, i, 0.0, True))
                continue
            sv = np.linalg.svd(G[:, perms[i][:a]], compute_uv=False)
            rows.append((a, i, float(sv[-1]), False))
    return rows


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["areaCells", "trial", "sigma_min", "flagged"])
    for a, i, s, f in rows:
        w.writerow([a, i, repr(float(s)), int(bool(f))])
    return buf.getvalue()
