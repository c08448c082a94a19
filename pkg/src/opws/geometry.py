"""Spreading-support geometry.

Support sets live in the (time shift, frequency shift) plane.  All membership
questions are answered with exact rational arithmetic: rectangle corners and
mask origins/steps are stored as :class:`fractions.Fraction`, and the grid
lines of the (K, L) cell grids are the rationals ``k/K`` and ``p*K/L``.
Floating point appears only in reported areas.

The (K, L) grid has cells ``R_{K,L} + (k/K, p*K/L)`` with
``R_{K,L} = [0, 1/K) x [0, K/L)``; every cell has area ``1/L``.  All sets and
cells are half-open, so a boundary point belongs to the cell on its lower-left.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleCoverError, PreconditionError

__all__ = [
    "Rect",
    "SupportSet",
    "CellCover",
    "ContentResult",
    "Normalization",
    "grid_cells",
    "jordan_content",
    "content",
    "rectify",
    "normalize_support",
    "primes_upto",
    "DEFAULT_EPS_GRID",
]


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    # floats like 0.4 stand for 2/5: snap to a nearby small-denominator rational
    f = Fraction(float(v))
    g = f.limit_denominator(10 ** 6)
    return g if abs(g - f) <= 1e-12 * max(1.0, abs(float(v))) else f


def _frac_to_json(v: Fraction):
    if v.denominator == 1:
        return v.numerator
    f = float(v)
    if Fraction(f) == v:
        return f
    return f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class Rect:
    """Half-open rectangle ``[t0, t1) x [nu0, nu1)``."""

    t0: Fraction
    t1: Fraction
    nu0: Fraction
    nu1: Fraction

    def __post_init__(self):
        for name in ("t0", "t1", "nu0", "nu1"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if not (self.t1 > self.t0 and self.nu1 > self.nu0):
            raise ValueError(f"rectangle must have positive area: {self}")

    @property
    def area(self) -> Fraction:
        return (self.t1 - self.t0) * (self.nu1 - self.nu0)

    def as_list(self):
        return [_frac_to_json(v) for v in (self.t0, self.t1, self.nu0, self.nu1)]


class _Axis:
    """Sorted breakpoints of one coordinate, uniform or irregular."""

    def __init__(self, breaks=None, origin=None, step=None, count=None):
        self.uniform = breaks is None
        if self.uniform:
            self.origin, self.step, self.count = origin, step, count
            self.lo = origin
            self.hi = origin + step * count
        else:
            self.breaks = list(breaks)
            self.count = len(self.breaks) - 1
            self.lo, self.hi = self.breaks[0], self.breaks[-1]

    def n_le(self, v: Fraction) -> int:
        # number of breakpoints <= v
        if not self.uniform:
            return bisect_right(self.breaks, v)
        return min(max(math.floor((v - self.origin) / self.step) + 1, 0), self.count + 1)

    def n_lt(self, v: Fraction) -> int:
        if not self.uniform:
            return bisect_left(self.breaks, v)
        return min(max(math.ceil((v - self.origin) / self.step), 0), self.count + 1)

    def overlap(self, a: Fraction, b: Fraction):
        """Index range [i0, i1] of elementary intervals meeting [a, b), and containment flag."""
        i0 = max(self.n_le(a) - 1, 0)
        i1 = min(self.n_lt(b) - 1, self.count - 1)
        return i0, i1, (a >= self.lo and b <= self.hi)


class _Raster:
    """Exact compressed-grid representation of a support set with 2-D prefix sums."""

    def __init__(self, t_axis: _Axis, nu_axis: _Axis, covered: np.ndarray):
        self.t_axis = t_axis
        self.nu_axis = nu_axis
        self.covered = covered
        P = np.zeros((covered.shape[0] + 1, covered.shape[1] + 1), dtype=np.int64)
        P[1:, 1:] = np.cumsum(np.cumsum(covered, axis=0), axis=1)
        self.prefix = P

    def _ranges(self, axis: _Axis, bounds: Sequence[Fraction]):
        n = len(bounds) - 1
        i0 = np.empty(n, dtype=np.int64)
        i1 = np.empty(n, dtype=np.int64)
        inside = np.empty(n, dtype=bool)
        for q in range(n):
            i0[q], i1[q], inside[q] = axis.overlap(bounds[q], bounds[q + 1])
        return i0, i1, inside

    def classify(self, t_bounds, nu_bounds):
        """For the cells of a tensor grid return (inside M, meets M) boolean arrays."""
        ti0, ti1, tin = self._ranges(self.t_axis, t_bounds)
        ni0, ni1, nin = self._ranges(self.nu_axis, nu_bounds)
        empty = (ti1[:, None] < ti0[:, None]) | (ni1[None, :] < ni0[None, :])
        a0, a1 = ti0[:, None], np.maximum(ti1, ti0 - 1)[:, None] + 1
        b0, b1 = ni0[None, :], np.maximum(ni1, ni0 - 1)[None, :] + 1
        P = self.prefix
        total = P[a1, b1] - P[a0, b1] - P[a1, b0] + P[a0, b0]
        count = (a1 - a0) * (b1 - b0)
        meets = (total > 0) & ~empty
        inside = tin[:, None] & nin[None, :] & (total == count) & ~empty
        return inside, meets


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Bounded subset of the spreading plane.

    Either a union of half-open rectangles (``rects``) or a boolean raster
    (``mask`` of shape ``(n_t, n_nu)`` with pixel ``[i, j]`` covering
    ``[t0 + i*dt, t0 + (i+1)*dt) x [nu0 + j*dnu, nu0 + (j+1)*dnu)``).
    """

    rects: tuple = ()
    mask: np.ndarray | None = None
    mask_origin: tuple = (Fraction(0), Fraction(0))
    mask_step: tuple = (Fraction(1), Fraction(1))
    _raster: list = field(default_factory=list, repr=False, compare=False)
    _bbox: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.mask is not None:
            if self.rects:
                raise ValueError("give either rectangles or a mask, not both")
            m = np.asarray(self.mask, dtype=bool)
            if m.ndim != 2:
                raise ValueError("mask must be 2-D")
            object.__setattr__(self, "mask", m)
            object.__setattr__(self, "mask_origin", tuple(_frac(v) for v in self.mask_origin))
            object.__setattr__(self, "mask_step", tuple(_frac(v) for v in self.mask_step))
            if min(self.mask_step) <= 0:
                raise ValueError("mask steps must be positive")
        else:
            rs = tuple(r if isinstance(r, Rect) else Rect(*r) for r in self.rects)
            object.__setattr__(self, "rects", rs)

    # construction -----------------------------------------------------------

    @classmethod
    def from_rects(cls, rects: Iterable) -> "SupportSet":
        return cls(rects=tuple(rects))

    @classmethod
    def from_mask(cls, mask, t0=0, dt=1, nu0=0, dnu=1) -> "SupportSet":
        return cls(mask=np.asarray(mask, dtype=bool), mask_origin=(t0, nu0), mask_step=(dt, dnu))

    @classmethod
    def empty(cls) -> "SupportSet":
        return cls(rects=())

    # basic properties -------------------------------------------------------

    @property
    def is_mask(self) -> bool:
        return self.mask is not None

    def is_empty(self) -> bool:
        return not self.rects if not self.is_mask else not self.mask.any()

    def to_rects(self) -> tuple:
        """Rectangle-union view (mask pixels merged into vertical runs)."""
        if not self.is_mask:
            return self.rects
        (t0, nu0), (dt, dnu) = self.mask_origin, self.mask_step
        out = []
        for i, col in enumerate(self.mask):
            j = 0
            n = len(col)
            while j < n:
                if not col[j]:
                    j += 1
                    continue
                k = j
                while k < n and col[k]:
                    k += 1
                out.append(Rect(t0 + i * dt, t0 + (i + 1) * dt, nu0 + j * dnu, nu0 + k * dnu))
                j = k
        return tuple(out)

    def bbox(self):
        """Tight bounding box ``(t0, t1, nu0, nu1)`` as Fractions, or None if empty."""
        if not self._bbox:
            self._bbox.append(self._compute_bbox())
        return self._bbox[0]

    def _compute_bbox(self):
        if self.is_empty():
            return None
        if self.is_mask:
            ii, jj = np.nonzero(self.mask)
            (t0, nu0), (dt, dnu) = self.mask_origin, self.mask_step
            return (t0 + int(ii.min()) * dt, t0 + (int(ii.max()) + 1) * dt,
                    nu0 + int(jj.min()) * dnu, nu0 + (int(jj.max()) + 1) * dnu)
        return (min(r.t0 for r in self.rects), max(r.t1 for r in self.rects),
                min(r.nu0 for r in self.rects), max(r.nu1 for r in self.rects))

    def raster(self) -> _Raster:
        if self._raster:
            return self._raster[0]
        if self.is_mask:
            (t0, nu0), (dt, dnu) = self.mask_origin, self.mask_step
            r = _Raster(_Axis(origin=t0, step=dt, count=self.mask.shape[0]),
                        _Axis(origin=nu0, step=dnu, count=self.mask.shape[1]),
                        self.mask.astype(np.int64))
        else:
            ts = sorted({v for q in self.rects for v in (q.t0, q.t1)})
            ns = sorted({v for q in self.rects for v in (q.nu0, q.nu1)})
            cov = np.zeros((max(len(ts) - 1, 0), max(len(ns) - 1, 0)), dtype=np.int64)
            for q in self.rects:
                cov[bisect_left(ts, q.t0):bisect_left(ts, q.t1),
                    bisect_left(ns, q.nu0):bisect_left(ns, q.nu1)] = 1
            if not ts:
                ts, ns = [Fraction(0), Fraction(0)], [Fraction(0), Fraction(0)]
                cov = np.zeros((1, 1), dtype=np.int64)
            r = _Raster(_Axis(ts), _Axis(ns), cov)
        self._raster.append(r)
        return r

    def area(self) -> float:
        """Lebesgue measure (exact for both representations, returned as float)."""
        if self.is_mask:
            return float(int(self.mask.sum()) * self.mask_step[0] * self.mask_step[1])
        r = self.raster()
        ts, ns = r.t_axis.breaks, r.nu_axis.breaks
        tot = Fraction(0)
        for i, j in zip(*np.nonzero(r.covered)):
            tot += (ts[i + 1] - ts[i]) * (ns[j + 1] - ns[j])
        return float(tot)

    def contains(self, t, nu) -> np.ndarray:
        """Vectorised floating-point membership test (used for pointwise evaluation)."""
        t = np.asarray(t, dtype=float)
        nu = np.asarray(nu, dtype=float)
        t, nu = np.broadcast_arrays(t, nu)
        if self.is_mask:
            (t0, nu0), (dt, dnu) = self.mask_origin, self.mask_step
            i = np.floor((t - float(t0)) / float(dt)).astype(np.int64)
            j = np.floor((nu - float(nu0)) / float(dnu)).astype(np.int64)
            ok = (i >= 0) & (i < self.mask.shape[0]) & (j >= 0) & (j < self.mask.shape[1])
            out = np.zeros(t.shape, dtype=bool)
            out[ok] = self.mask[i[ok], j[ok]]
            return out
        out = np.zeros(t.shape, dtype=bool)
        for q in self.rects:
            out |= (t >= float(q.t0)) & (t < float(q.t1)) & (nu >= float(q.nu0)) & (nu < float(q.nu1))
        return out

    def is_subset_of(self, other: "SupportSet") -> bool:
        """Exact test ``self ⊆ other`` (up to null sets is not needed: sets are unions of cells)."""
        if self.is_empty():
            return True
        if other.is_empty():
            return False
        mine, theirs = self.to_rects(), other.to_rects()
        ts = sorted({v for q in mine + theirs for v in (q.t0, q.t1)})
        ns = sorted({v for q in mine + theirs for v in (q.nu0, q.nu1)})

        def cover(rs):
            c = np.zeros((len(ts) - 1, len(ns) - 1), dtype=bool)
            for q in rs:
                c[bisect_left(ts, q.t0):bisect_left(ts, q.t1), bisect_left(ns, q.nu0):bisect_left(ns, q.nu1)] = True
            return c

        return bool(np.all(~cover(mine) | cover(theirs)))

    def expanded(self, eps) -> "SupportSet":
        """Minkowski sum with ``[0, eps)^2`` (a translate of the symmetric eps-neighbourhood)."""
        eps = _frac(eps)
        if eps == 0:
            return self
        return SupportSet.from_rects(Rect(q.t0, q.t1 + eps, q.nu0, q.nu1 + eps) for q in self.to_rects())

    def transformed(self, a, t0, nu0) -> "SupportSet":
        """Image under ``(t, nu) -> ((t - t0)/a, a*(nu - nu0))``."""
        a, t0, nu0 = _frac(a), _frac(t0), _frac(nu0)
        if self.is_mask:
            (mt, mn), (dt, dn) = self.mask_origin, self.mask_step
            return SupportSet.from_mask(self.mask, (mt - t0) / a, dt / a, a * (mn - nu0), a * dn)
        return SupportSet.from_rects(
            Rect((q.t0 - t0) / a, (q.t1 - t0) / a, a * (q.nu0 - nu0), a * (q.nu1 - nu0)) for q in self.rects)

    # serialisation -----------------------------------------------------------

    def to_dict(self) -> dict:
        if self.is_mask:
            (t0, nu0), (dt, dnu) = self.mask_origin, self.mask_step
            return {"kind": "mask", "t0": _frac_to_json(t0), "dt": _frac_to_json(dt),
                    "nu0": _frac_to_json(nu0), "dnu": _frac_to_json(dnu),
                    "shape": list(self.mask.shape), "data": self.mask.astype(int).tolist()}
        return {"kind": "rectangles", "rectangles": [q.as_list() for q in self.rects]}

    @classmethod
    def from_dict(cls, d: dict) -> "SupportSet":
        kind = d.get("kind", "rectangles")
        if kind == "rectangles":
            return cls.from_rects(Rect(*r) for r in d["rectangles"])
        if kind == "mask":
            data = np.asarray(d["data"], dtype=bool)
            if "shape" in d and list(data.shape) != list(d["shape"]):
                raise ValueError("mask data does not match declared shape")
            return cls.from_mask(data, d["t0"], d["dt"], d["nu0"], d["dnu"])
        raise ValueError(f"unknown support kind {kind!r}")


@dataclass(frozen=True)
class CellCover:
    """L-cell cover of a support set on the (K, L) grid."""

    K: int
    L: int
    eps: Fraction
    cells: tuple

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be positive")
        cells = tuple((int(m), int(n)) for m, n in self.cells)
        if len(set(cells)) != len(cells):
            raise ValueError("cover cells must be distinct")
        if len(cells) > self.L:
            raise ValueError("a cover has at most L cells")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "eps", _frac(self.eps))

    @property
    def area(self) -> Fraction:
        return Fraction(len(self.cells), self.L)

    def cell_rect(self, m: int, n: int) -> Rect:
        K, L = self.K, self.L
        return Rect(Fraction(m, K), Fraction(m + 1, K), Fraction(n * K, L), Fraction((n + 1) * K, L))

    def union(self) -> SupportSet:
        return SupportSet.from_rects(self.cell_rect(m, n) for m, n in self.cells)

    def to_dict(self) -> dict:
        return {"K": self.K, "L": self.L, "eps": _frac_to_json(self.eps),
                "cells": [list(c) for c in self.cells]}

    @classmethod
    def from_dict(cls, d: dict) -> "CellCover":
        return cls(int(d["K"]), int(d["L"]), d.get("eps", 0), tuple(tuple(c) for c in d["cells"]))


def grid_cells(M: SupportSet, K: int, L: int):
    """Classify the (K, L) grid cells near ``M``.

    Returns ``(cells, inside, meets)`` where ``cells`` is an ``(n, 2)`` integer
    array of ``(k, p)`` indices (row-major: ``p`` outer, ``k`` inner) and the two
    boolean arrays flag cells contained in / intersecting ``M``.
    """
    box = M.bbox()
    if box is None:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, bool), np.zeros(0, bool)
    t0, t1, n0, n1 = box
    h = Fraction(K, L)
    k0, k1 = math.floor(t0 * K), math.ceil(t1 * K)
    p0, p1 = math.floor(n0 / h), math.ceil(n1 / h)
    t_bounds = [Fraction(k, K) for k in range(k0, k1 + 1)]
    n_bounds = [p * h for p in range(p0, p1 + 1)]
    inside, meets = M.raster().classify(t_bounds, n_bounds)
    kk, pp = np.meshgrid(np.arange(k0, k1), np.arange(p0, p1), indexing="ij")
    order = np.lexsort((kk.ravel(), pp.ravel()))
    cells = np.stack([kk.ravel(), pp.ravel()], axis=1)[order]
    return cells, inside.ravel()[order], meets.ravel()[order]


@dataclass(frozen=True)
class ContentResult:
    value: float
    bestK: int
    bestL: int


def jordan_content(M: SupportSet, Kmax: int, Lmax: int, Lset=None):
    """Inner and outer content over all grids with ``K <= Kmax`` and ``L <= Lmax``.

    ``Lset`` optionally restricts L to a subset (e.g. primes).  Returns a pair
    ``(inner, outer)`` of :class:`ContentResult`.  Ties keep the first
    ``(K, L)`` in ascending order.
    """
    if Kmax < 1 or Lmax < 1:
        raise ValueError("Kmax and Lmax must be >= 1")
    if M.is_empty():
        return ContentResult(0.0, 1, 1), ContentResult(0.0, 1, 1)
    Ls = [L for L in range(1, Lmax + 1) if Lset is None or L in set(Lset)]
    best_in = (Fraction(-1), 0, 0)
    best_out = (None, 0, 0)
    for K in range(1, Kmax + 1):
        for L in Ls:
            _, inside, meets = grid_cells(M, K, L)
            vin = Fraction(int(inside.sum()), L)
            vout = Fraction(int(meets.sum()), L)
            if vin > best_in[0]:
                best_in = (vin, K, L)
            if best_out[0] is None or vout < best_out[0]:
                best_out = (vout, K, L)
    if best_out[0] is None:
        raise ValueError("empty L search range")
    return (ContentResult(float(best_in[0]), best_in[1], best_in[2]),
            ContentResult(float(best_out[0]), best_out[1], best_out[2]))


def content(M: SupportSet, side: str = "outer", Kmax: int = 32, Lmax: int = 32, Lset=None) -> ContentResult:
    """Inner (``side='inner'``) or outer Jordan content of ``M`` over the (K, L) grids."""
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    inner, outer = jordan_content(M, Kmax, Lmax, Lset)
    return inner if side == "inner" else outer


def primes_upto(n: int) -> list:
    return [p for p in range(2, n + 1) if all(p % q for q in range(2, int(p ** 0.5) + 1))]


DEFAULT_EPS_GRID = tuple(Fraction(1, 2 ** i) for i in range(3, 11)) + (Fraction(0),)


def rectify(M: SupportSet, Lcandidates: Sequence[int] | None = None, eps_grid=DEFAULT_EPS_GRID,
            Kcandidates: Sequence[int] | None = None) -> CellCover:
    """Cover ``M`` by fewer than L cells of a (K, L) grid with L prime.

    For each candidate L (ascending) the largest feasible ``eps`` is sought,
    and for it the smallest K.  ``(K, L, eps)`` is feasible when the widened
    set ``M + [0, eps)^2`` lies in ``[0, 1) x [0, K)``, ``L >= K``, and the grid
    cells meeting it number fewer than L (so their total area is below one).

    Raises
    ------
    InfeasibleCoverError
        If no candidate works.
    """
    if M.is_empty():
        raise PreconditionError("cannot rectify an empty support")
    if Lcandidates is None:
        Lcandidates = primes_upto(23)
    for L in sorted(Lcandidates):
        for eps in sorted((_frac(e) for e in eps_grid), reverse=True):
            Me = M.expanded(eps)
            t0, t1, n0, n1 = Me.bbox()
            if t0 < 0 or t1 > 1 or n0 < 0:
                continue
            Ks = range(1, L + 1) if Kcandidates is None else sorted(k for k in Kcandidates if k <= L)
            for K in Ks:
                if n1 > K:
                    continue
                cells, _, meets = grid_cells(Me, K, L)
                chosen = cells[meets]
                if len(chosen) < L:
                    return CellCover(K, L, eps, tuple(map(tuple, chosen.tolist())))
    raise InfeasibleCoverError(
        f"infeasible: no (K, L, eps) with L in {list(Lcandidates)} covers the support with area < 1")


@dataclass(frozen=True)
class Normalization:
    """Result of :func:`normalize_support`.

    ``support`` is the image of the original set under
    ``(t, nu) -> ((t - t0)/a, a*(nu - nu0))``; it lies in ``[0, 1) x [0, K)``.
    """

    support: SupportSet
    a: Fraction
    t0: Fraction
    nu0: Fraction
    K: int

    def transport_train(self, train):
        """Map an identifier of the normalized class to one of the original class.

        With ``g`` identifying the normalized operators, the returned train has
        spacing ``a*g.spacing``, offset ``a*g.offset - t0`` and the same weights.
        Responses relate by ``y(x) = exp(2 pi i nu0 x) * y_norm(x/a) / a``.
        """
        from .model import DeltaTrain

        a, t0 = float(self.a), float(self.t0)
        return DeltaTrain(spacing=a * train.spacing, offset=a * train.offset - t0, weights=train.weights)


def normalize_support(M: SupportSet) -> Normalization:
    """Dilate/translate ``M`` into ``[0, 1) x [0, K)`` with K minimal.

    The dilation ``(t, nu) -> (t/a, a*nu)`` is area preserving; ``a`` is the
    time extent when that exceeds one and 1 otherwise.  A coordinate is only
    translated when the set does not already start at a nonnegative value
    fitting the target strip.
    """
    box = M.bbox()
    if box is None:
        raise PreconditionError("degenerate support: empty set")
    tmin, tmax, nmin, nmax = box
    ext = tmax - tmin
    if ext <= 0:
        raise PreconditionError("degenerate support: zero time extent")
    a = ext if ext > 1 else Fraction(1)
    if a > 1 or tmin < 0 or tmax > 1:
        t0 = tmin
    else:
        t0 = Fraction(0)
    nu0 = nmin if nmin < 0 else Fraction(0)
    Mn = M.transformed(a, t0, nu0)
    K = max(1, math.ceil(a * (nmax - nu0)))
    return Normalization(Mn, a, t0, nu0, K)
