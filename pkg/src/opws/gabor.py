"""Finite Weyl–Heisenberg systems on ``Z_L``.

``pi(k, l) c`` is the time–frequency shift ``(pi(k, l) c)_j = c_{j-k} exp(2 pi i j l / L)``.
A vector ``c`` is in general linear position (GLP) when every ``L`` of the
``L^2`` vectors ``pi(k, l) c`` are linearly independent.

Column order of :func:`gabor_matrix` is ``l``-major: column ``l*L + k`` is
``pi(k, l) c``.  Subsets are enumerated in colexicographic order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import BudgetExceededError, SingularSystemError, UnderdeterminedError

__all__ = [
    "tf_shift",
    "gabor_matrix",
    "colex_combinations",
    "Certificate",
    "GaborIdentifier",
    "CellPattern",
    "check_glp",
    "search_identifier",
    "finite_apply",
    "finite_identify",
    "IdentifyResult",
    "gaussian_vector",
    "rng_for",
    "DEFAULT_BUDGET",
    "DEFAULT_COND_CAP",
    "L_CAP",
]

DEFAULT_BUDGET = 10 ** 7
DEFAULT_COND_CAP = 1e6
DEFAULT_RANDOM_SAMPLES = 10 ** 6
L_CAP = 23
DET_TOL = 1e-12


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and a stream key (purpose, index, ...).

    Streams with different keys are independent, so trial ``i`` draws the
    same numbers whether trials run serially or in parallel.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))))


def gaussian_vector(L: int, seed: int = 0, normalize: bool = False) -> np.ndarray:
    """Complex Gaussian vector; ``seed`` feeds :func:`numpy.random.default_rng` directly.

    This is the "seed-0 c" used throughout the tests: real and imaginary parts
    are standard normal, drawn as one ``(2, L)`` block.
    """
    g = np.random.default_rng(seed).standard_normal((2, L))
    c = g[0] + 1j * g[1]
    return c / np.linalg.norm(c) if normalize else c


def tf_shift(c, k: int, l: int) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    L = c.size
    j = np.arange(L)
    return np.roll(c, k % L) * np.exp(2j * np.pi * j * (l % L) / L)


def gabor_matrix(c) -> np.ndarray:
    """``L x L^2`` matrix whose column ``l*L + k`` is ``tf_shift(c, k, l)``."""
    c = np.asarray(c, dtype=complex)
    L = c.size
    if L < 1:
        raise ValueError("c must be nonempty")
    j = np.arange(L)
    shifts = np.stack([np.roll(c, k) for k in range(L)], axis=1)          # [j, k]
    mods = np.exp(2j * np.pi * np.outer(j, j) / L)                           # [j, l]
    return (mods[:, :, None] * shifts[:, None, :]).reshape(L, L * L)


def column_index(k: int, l: int, L: int) -> int:
    return (l % L) * L + (k % L)


def colex_combinations(n: int, r: int) -> Iterator[tuple]:
    """All ``r``-subsets of ``range(n)`` in colexicographic order."""
    if r == 0:
        yield ()
        return
    for last in range(r - 1, n):
        for head in colex_combinations(last, r - 1):
            yield head + (last,)


@lru_cache(maxsize=256)
def _colex_block(n: int, r: int, start: int, count: int) -> np.ndarray:
    """Rows ``start .. start+count-1`` of the colex enumeration, as a read-only int array."""
    out = np.empty((count, r), dtype=np.int64)
    # unrank the first subset, then step with the colex successor
    rank = start
    comb = []
    for i in range(r, 0, -1):
        m_i = i - 1
        while math.comb(m_i + 1, i) <= rank:
            m_i += 1
        comb.append(m_i)
        rank -= math.comb(m_i, i)
    cur = comb[::-1]
    for q in range(count):
        out[q] = cur
        # successor: smallest i with cur[i] + 1 < cur[i+1] (or last element < n-1)
        i = 0
        while i < r - 1 and cur[i] + 1 == cur[i + 1]:
            i += 1
        cur[i] += 1
        for jj in range(i):
            cur[jj] = jj
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Certificate:
    """Outcome of :func:`check_glp`; ``argminSubset`` lists gabor-matrix column indices."""

    L: int
    mode: str
    holds: bool
    minAbsDet: float
    argminSubset: tuple
    worstCond: float
    subsetsChecked: int
    tolerance: float

    def to_dict(self) -> dict:
        return {"mode": self.mode, "holds": self.holds, "minAbsDet": self.minAbsDet,
                "argminSubset": [list(_col_to_cell(i, self.L)) for i in self.argminSubset],
                "worstCond": self.worstCond, "subsetsChecked": self.subsetsChecked,
                "tolerance": self.tolerance}


def _col_to_cell(i: int, L: int):
    return int(i) % L, int(i) // L


@dataclass(frozen=True, eq=False)
class GaborIdentifier:
    L: int
    c: np.ndarray
    certificate: Certificate | None = None
    score: float = float("nan")
    history: tuple = ()

    def to_dict(self) -> dict:
        d = {"L": self.L, "c": [[float(v.real), float(v.imag)] for v in self.c]}
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        if not math.isnan(self.score):
            d["score"] = self.score
        return d


@dataclass(frozen=True)
class CellPattern:
    """Distinct cells ``(k, l)`` of ``Z_L x Z_L``."""

    cells: tuple

    def __post_init__(self):
        cells = tuple((int(k), int(l)) for k, l in self.cells)
        if len(set(cells)) != len(cells):
            raise ValueError("pattern cells must be distinct")
        object.__setattr__(self, "cells", cells)

    def __len__(self):
        return len(self.cells)

    def columns(self, L: int) -> list:
        return [column_index(k, l, L) for k, l in self.cells]

    def to_list(self):
        return [list(c) for c in self.cells]


def _svd_scores(sub):
    sv = np.linalg.svd(sub, compute_uv=False)
    det = np.prod(sv, axis=1)
    with np.errstate(divide="ignore"):
        cond = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    return det, cond


def _subset_scores(G: np.ndarray, subsets: np.ndarray):
    """|det| of each column subset and the largest 2-norm condition number among them.

    Determinants come from LU.  The Frobenius condition number bounds the
    2-norm one within a factor ``L``, so exact SVDs are only needed for the
    subsets that can attain the maximum.
    """
    sub = np.transpose(G[:, subsets], (1, 0, 2))          # (n, L, L)
    L = sub.shape[-1]
    try:
        inv = np.linalg.inv(sub)
    except np.linalg.LinAlgError:
        det, cond = _svd_scores(sub)
        return det, float(np.max(cond))
    det = np.abs(np.linalg.det(sub))
    with np.errstate(over="ignore", invalid="ignore"):     # near-singular: handled below
        cf = np.linalg.norm(sub, axis=(1, 2)) * np.linalg.norm(inv, axis=(1, 2))
    if not np.all(np.isfinite(cf)):
        det, cond = _svd_scores(sub)
        return det, float(np.max(cond))
    cand = np.nonzero(cf >= cf.max() / L)[0]
    _, cond = _svd_scores(sub[cand])
    return det, float(np.max(cond))


def _threads(threads) -> int:
    if threads is None:
        threads = int(os.environ.get("OPWS_THREADS", "1") or 1)
    return max(1, int(threads))


def check_glp(c, mode: str = "exhaustive", trials: int = DEFAULT_RANDOM_SAMPLES, seed: int = 0,
              budget: int = DEFAULT_BUDGET, tol: float = DET_TOL, threads: int | None = None,
              chunk: int = 20000) -> Certificate:
    """Check whether ``c`` is in general linear position.

    ``mode='exhaustive'`` examines all ``C(L^2, L)`` column subsets in colex
    order (refused above ``budget``); ``'randomized'`` draws ``trials``
    uniformly random subsets.  GLP holds iff the smallest ``|det|`` exceeds
    ``tol * ||c||^L``.  Ties in the minimum go to the earliest subset, so the
    certificate does not depend on ``threads``.
    """
    c = np.asarray(c, dtype=complex)
    L = c.size
    G = gabor_matrix(c)
    n_cols = L * L
    total = math.comb(n_cols, L)
    if mode == "exhaustive":
        if total > budget:
            raise BudgetExceededError(f"C({n_cols},{L}) = {total} subsets exceed the budget {budget}")
        blocks = [(s, min(chunk, total - s)) for s in range(0, total, chunk)]

        def work(blk):
            return _subset_scores(G, _colex_block(n_cols, L, *blk)), blk
        n_checked = total
    elif mode == "randomized":
        trials = int(trials)
        blocks = [(s, min(chunk, trials - s)) for s in range(0, trials, chunk)]

        def work(blk):
            rng = rng_for(seed, 1, blk[0] // chunk)
            subs = np.sort(np.argsort(rng.random((blk[1], n_cols)), axis=1)[:, :L], axis=1)
            return _subset_scores(G, subs), (blk, subs)
        n_checked = trials
    else:
        raise ValueError(f"unknown mode {mode!r}")

    nt = _threads(threads)
    if nt > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(nt) as ex:
            results = list(ex.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    thresh = tol * np.linalg.norm(c) ** L
    # argmin: first subset (enumeration order) whose |det| is tied with the
    # minimum up to rounding, so the choice is stable under c -> alpha c
    best = min(float(np.min(det)) for (det, _), _ in results)
    band = best * (1 + 1e-9) + 1e-3 * thresh
    best_sub = ()
    for (det, _), info in results:                   # blocks are in enumeration order
        hit = np.nonzero(det <= band)[0]
        if hit.size:
            i = int(hit[0])
            if mode == "exhaustive":
                best_sub = tuple(int(v) for v in _colex_block(n_cols, L, info[0] + i, 1)[0])
            else:
                best_sub = tuple(int(v) for v in info[1][i])
            break
    worst = max(cond for (_, cond), _ in results)
    return Certificate(L, mode, bool(best > thresh), best, best_sub, float(worst), n_checked, float(thresh))


def search_identifier(L: int, trials: int = 10, seed: int = 0, objective: str = "maximin-det",
                      mode: str = "exhaustive", samples: int = 10000, budget: int = DEFAULT_BUDGET,
                      threads: int | None = None) -> GaborIdentifier:
    """Best of ``trials`` unit-norm complex Gaussian candidates.

    Candidate ``i`` is drawn from stream ``(seed, 0, i)``, so the first
    ``n`` candidates coincide for any ``trials >= n`` and the best score is
    monotone in ``trials``.  ``objective`` is ``'maximin-det'`` (maximize the
    smallest determinant) or ``'min-worst-cond'``.  Randomized scoring uses
    the same ``samples`` subsets for every candidate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if objective not in ("maximin-det", "min-worst-cond"):
        raise ValueError(f"unknown objective {objective!r}")
    best, history = None, []
    for i in range(trials):
        g = rng_for(seed, 0, i).standard_normal((2, L))
        c = g[0] + 1j * g[1]
        c /= np.linalg.norm(c)
        cert = check_glp(c, mode=mode, trials=samples, seed=seed, budget=budget, threads=threads)
        score = cert.minAbsDet if objective == "maximin-det" else -cert.worstCond
        history.append(float(score))
        if best is None or score > best.score:
            best = GaborIdentifier(L, c, cert, float(score))
    return GaborIdentifier(L, best.c, best.certificate, best.score, tuple(history))


def finite_apply(pattern: CellPattern, values, c) -> np.ndarray:
    """Finite channel response ``sum_j values_j * tf_shift(c, k_j, l_j)``."""
    c = np.asarray(c, dtype=complex)
    values = np.asarray(values, dtype=complex).ravel()
    if values.size != len(pattern):
        raise ValueError("values and pattern have different lengths")
    out = np.zeros(c.size, dtype=complex)
    for v, (k, l) in zip(values, pattern.cells):
        out += v * tf_shift(c, k, l)
    return out


@dataclass(frozen=True)
class IdentifyResult:
    values: np.ndarray
    residual: float
    condition: float


def pattern_matrix(pattern: CellPattern, c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    L = c.size
    if len(pattern) == 0:
        return np.zeros((L, 0), dtype=complex)
    return gabor_matrix(c)[:, pattern.columns(L)]


def finite_identify(y, pattern: CellPattern, c, cond_cap: float = DEFAULT_COND_CAP) -> IdentifyResult:
    """Solve ``G_pattern x = y`` by least squares.

    Raises
    ------
    UnderdeterminedError
        If the pattern has more than ``L`` cells.
    SingularSystemError
        If the submatrix condition number exceeds ``cond_cap``.
    """
    c = np.asarray(c, dtype=complex)
    y = np.asarray(y, dtype=complex)
    L = c.size
    if len(pattern) > L:
        raise UnderdeterminedError(f"{len(pattern)} unknowns but only {L} equations")
    A = pattern_matrix(pattern, c)
    if A.shape[1] == 0:
        return IdentifyResult(np.zeros(0, complex), float(np.linalg.norm(y)), 1.0)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > sv[0] * 1e-300 else np.inf
    if not cond <= cond_cap:
        raise SingularSystemError(f"pattern submatrix is singular or ill-conditioned (cond={cond:.3g})", cond)
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return IdentifyResult(x, float(np.linalg.norm(A @ x - y)), cond)
