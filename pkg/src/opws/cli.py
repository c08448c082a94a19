"""Command-line driver: ``opws <command> ...``.

Exit codes: 0 success within tolerance, 1 tolerance/assertion failure,
2 usage or configuration error.  Every JSON report carries a ``timestamp``
field; apart from it, identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import gabor, geometry, identify, io, model
from .errors import (BudgetExceededError, ConfigError, InfeasibleCoverError, OPWSError,
                     PreconditionError)
from .transforms import build_window

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# --------------------------------------------------------------------------- schemas

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_RAT = {"type": ["number", "string"]}
_COMPLEX = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

_SUPPORT = {
    "type": "object",
    "oneOf": [
        {"properties": {"kind": {"const": "rectangles"},
                        "rectangles": {"type": "array",
                                       "items": {"type": "array", "items": _RAT, "minItems": 4, "maxItems": 4}}},
         "required": ["rectangles"], "additionalProperties": False},
        {"properties": {"kind": {"const": "mask"}, "t0": _RAT, "dt": _RAT, "nu0": _RAT, "dnu": _RAT,
                        "shape": {"type": "array", "items": _INT},
                        "data": {"type": "array", "items": {"type": "array", "items": _INT}}},
         "required": ["kind", "t0", "dt", "nu0", "dnu", "data"], "additionalProperties": False},
    ],
}

_PROFILE = {"type": "object",
            "properties": {"kind": {"enum": ["raised-cosine", "bspline"]}, "center": _NUM, "width": _NUM,
                           "order": _INT},
            "required": ["kind", "center", "width"], "additionalProperties": False}
_ATOM = {"type": "object", "properties": {"coeff": _COMPLEX, "t": _PROFILE, "nu": _PROFILE},
         "required": ["t", "nu"], "additionalProperties": False}

SCHEMAS = {
    "shannon": {"type": "object", "additionalProperties": False, "properties": {
        "T": _NUM, "Omega": _NUM, "frequencies": {"type": "array", "items": _NUM, "minItems": 1},
        "radius_periods": _NUM, "half_width_periods": _NUM, "points": _INT, "window": {"enum": [
            "raised-cosine-spectrum", "sharp-characteristic"]}, "tolerance": _NUM}},
    "convolution": {"type": "object", "additionalProperties": False, "properties": {
        "N": _INT, "taps": _INT, "tolerance": _NUM}},
    "rect": {"type": "object", "additionalProperties": False, "properties": {
        "T": _NUM, "Omega": _NUM, "atoms": {"type": "array", "items": _ATOM}, "x_half_width": _NUM,
        "x_step": _NUM, "dt": _NUM, "nt": _INT, "radius": _NUM, "snr_db": _NUM, "tolerance": _NUM}},
    "multicell": {"type": "object", "additionalProperties": False, "properties": {
        "K": _INT, "L": _INT, "cells": {"type": "array", "items": {"type": "array", "items": _INT,
                                                                     "minItems": 2, "maxItems": 2}},
        "c": {"type": "array", "items": _COMPLEX}, "nt": _INT, "nnu": _INT, "span": _NUM, "snr_db": _NUM,
        "tolerance": _NUM}},
    "content": {"type": "object", "additionalProperties": False, "required": ["support"], "properties": {
        "support": _SUPPORT, "Kmax": _INT, "Lmax": _INT, "primesOnly": {"type": "boolean"}}},
    "rectify": {"type": "object", "additionalProperties": False, "required": ["support"], "properties": {
        "support": _SUPPORT, "Lcandidates": {"type": "array", "items": _INT},
        "Kcandidates": {"type": "array", "items": _INT}, "epsGrid": {"type": "array", "items": _RAT}}},
    "normalize": {"type": "object", "additionalProperties": False, "required": ["support"], "properties": {
        "support": _SUPPORT}},
    "sweep": {"type": "object", "additionalProperties": False, "properties": {
        "L": _INT, "c": {"type": "array", "items": _COMPLEX},
        "areaCells": {"type": "array", "items": {"type": "integer", "minimum": 1}}, "trials": _INT,
        "seed": _INT}},
    "c-file": {"oneOf": [{"type": "array", "items": _COMPLEX, "minItems": 1},
                         {"type": "object", "properties": {"c": {"type": "array", "items": _COMPLEX}},
                          "required": ["c"]}]},
}


def _validate(doc, name: str):
    try:
        jsonschema.validate(doc, SCHEMAS[name])
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid {name} configuration: {e.message}") from None
    return doc


def _load_config(path, name: str) -> dict:
    if path is None:
        return {}
    try:
        doc = io.read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return _validate(doc, name)


def _complex_vec(v) -> np.ndarray:
    return np.asarray([complex(*w) if isinstance(w, list) else complex(w) for w in v], dtype=complex)


def _cjson(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, complex).ravel()]


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    return int(os.environ.get("OPWS_THREADS", "1") or 1)


def _emit(args, name: str, report: dict) -> Path:
    report = dict(report)
    report["timestamp"] = _timestamp()
    return io.write_json(Path(args.out) / f"{name}.json", report)


# --------------------------------------------------------------------------- demos


def _demo_shannon(cfg, seed, out):
    T = cfg.get("T", 0.9)
    Om = cfg.get("Omega", 1.0)
    freqs = np.asarray(cfg.get("frequencies", [-0.43, 0.11, 0.37]), float)
    Rp = cfg.get("radius_periods", 40.0)
    hw = cfg.get("half_width_periods", 20.0)
    npts = cfg.get("points", 2001)
    tol = cfg.get("tolerance", 1e-6)
    if np.any(np.abs(freqs) > Om / 2):
        raise ConfigError("frequencies must lie in [-Omega/2, Omega/2]")
    g = gabor.rng_for(seed, 3, 0).standard_normal((2, freqs.size))
    amps = g[0] + 1j * g[1]

    def m(x):
        return np.exp(2j * np.pi * np.outer(np.atleast_1d(x), freqs)) @ amps

    win = build_window(T, Om, T / 16, 16, cfg.get("window", "raised-cosine-spectrum"))
    kmax = int(math.ceil(hw + Rp)) + 2
    k = np.arange(-kmax, kmax + 1)
    x = np.linspace(-hw * T, hw * T, npts)
    rec = identify.identify_function(m(k * T), T, win, x, k0=-kmax, radius=Rp * T)
    central = np.abs(x) <= hw * T / 2
    err = np.abs(rec.samples - m(x))
    metric = float(err[central].max())
    io.write_signal_csv(out / "shannon.csv", rec)
    return "max_abs_error", metric, tol, {"T": T, "Omega": Om, "frequencies": freqs.tolist(),
                                          "amplitudes": _cjson(amps), "radius": Rp * T}


def _demo_convolution(cfg, seed, out):
    N = cfg.get("N", 64)
    taps = cfg.get("taps", 8)
    tol = cfg.get("tolerance", 1e-10)
    g = gabor.rng_for(seed, 4, 0).standard_normal((2, taps))
    h = np.zeros(N, complex)
    h[:taps] = g[0] + 1j * g[1]
    eta = np.zeros((N, N), complex)
    eta[:, 0] = h              # no frequency shifts: time-invariant channel
    dop = model.DiscreteOperator(eta)
    delta = np.zeros(N, complex)
    delta[0] = 1
    hr = identify.identify_convolution(model.discrete_apply(dop, delta))
    f = gabor.rng_for(seed, 4, 1).standard_normal(N)
    conv = np.fft.ifft(np.fft.fft(hr) * np.fft.fft(f))
    metric = float(max(np.linalg.norm(hr - h) / np.linalg.norm(h),
                       np.linalg.norm(conv - model.discrete_apply(dop, f)) / np.linalg.norm(conv)))
    io.write_signal_csv(out / "convolution.csv", model.SampledSignal(hr, 0, 1))
    return "rel_l2_error", metric, tol, {"N": N, "taps": taps}


def _default_rect_atoms(T, Om, seed):
    g = gabor.rng_for(seed, 5, 0).standard_normal(2)
    return [{"coeff": [float(g[0]), float(g[1])], "t": {"kind": "raised-cosine", "center": T / 2, "width": T},
             "nu": {"kind": "raised-cosine", "center": 0.0, "width": Om}}]


def _noise(y: model.SampledSignal, snr_db, seed, stream):
    if snr_db is None:
        return y
    g = gabor.rng_for(seed, 6, stream).standard_normal((2, y.n))
    sig = np.sqrt(np.mean(np.abs(y.samples) ** 2)) * 10 ** (-snr_db / 20)
    return model.SampledSignal(y.samples + sig * (g[0] + 1j * g[1]) / np.sqrt(2), y.t0, y.dt)


def _demo_rect(cfg, seed, out):
    T = cfg.get("T", 1.0)
    Om = cfg.get("Omega", 0.8)
    tol = cfg.get("tolerance", 1e-3)
    op = model.GroundTruthOperator.from_dict({"atoms": cfg.get("atoms") or _default_rect_atoms(T, Om, seed)})
    xh = cfg.get("x_half_width", 20.0)
    dx = cfg.get("x_step", 0.1)
    nt = cfg.get("nt", 20)
    dt = cfg.get("dt", T / nt)
    win = build_window(T, Om, dt, 16)
    R = cfg.get("radius", identify.default_radius(win, T))
    ext = math.ceil((xh + R + 2 * T) / T) * T
    n = int(round(2 * ext / dt)) + 1
    y = _noise(model.apply_train(op, model.DeltaTrain(T), -ext, dt, n), cfg.get("snr_db"), seed, 0)
    x = np.arange(-round(xh / dx), round(xh / dx) + 1) * dx
    rep = identify.reconstruct_rect(y, T, Om, win, x, nt=nt, radius=R, truth=op)
    io.write_array_raw(out / "rect_h.f64", rep.recovered, x[0], dx, rep.axes[1][0], T / nt,
                       {"axes": ["x", "t"]})
    io.write_array_csv(out / "rect_h.csv", rep.axes, rep.recovered, rep.axis_names)
    return "rel_l2_error", rep.relL2Error, tol, {"operator": op.to_dict(), **rep.to_dict()}


_MC_CELLS = [[0, 1], [1, 2], [1, 4]]


def _demo_multicell(cfg, seed, out):
    K = cfg.get("K", 2)
    L = cfg.get("L", 5)
    cells = cfg.get("cells", _MC_CELLS)
    tol = cfg.get("tolerance", 1e-2)
    c = _complex_vec(cfg["c"]) if "c" in cfg else gabor.gaussian_vector(L, seed)
    if c.size != L:
        raise ConfigError("len(c) must equal L")
    g = gabor.rng_for(seed, 7, 0).standard_normal((2, len(cells)))
    atoms = []
    for (k, l), a in zip(cells, g[0] + 1j * g[1]):
        atoms.append(model.SpreadingAtom(a, model.RaisedCosine((k + 0.5) / K, 1 / K),
                                         model.RaisedCosine((l + 0.5) * K / L, K / L)))
    cover = geometry.CellCover(K, L, 0, tuple(map(tuple, cells)))
    op = model.GroundTruthOperator(tuple(atoms), cover.union())
    nt, nnu = cfg.get("nt", 16), cfg.get("nnu", 16)
    span = cfg.get("span", 100.0)
    dt = 1 / (K * nt)
    ext = math.ceil(span + 2)
    y = model.apply_train(op, model.DeltaTrain(1 / K, 0, c), -ext, dt, int(round(2 * ext / dt)) + 1)
    y = _noise(y, cfg.get("snr_db"), seed, 1)
    rep = identify.reconstruct_multicell(y, cover, c, nt, nnu, span=span, truth=op)
    tt, vv = rep.axes
    io.write_array_raw(out / "multicell_eta.f64", rep.recovered, tt[0], tt[1] - tt[0], vv[0], vv[1] - vv[0],
                       {"axes": ["t", "nu"]})
    io.write_array_csv(out / "multicell_eta.csv", rep.axes, rep.recovered, rep.axis_names)
    return "rel_l2_error", rep.relL2Error, tol, {"operator": op.to_dict(), "c": _cjson(c),
                                                 "cover": cover.to_dict(), **rep.to_dict()}


DEMOS = {"shannon": _demo_shannon, "convolution": _demo_convolution, "rect": _demo_rect,
         "multicell": _demo_multicell}


def cmd_demo(args) -> int:
    cfg = _load_config(args.config, args.name)
    out = Path(args.out)
    name, metric, tol, details = DEMOS[args.name](cfg, args.seed, out)
    if args.tolerance is not None:
        tol = args.tolerance
    ok = bool(metric <= tol)
    _emit(args, f"demo_{args.name}", {"command": "demo", "scenario": args.name, "seed": args.seed,
                                       "metric": name, "value": metric, "tolerance": tol, "passed": ok,
                                       "details": details})
    print(f"demo {args.name}: {name} = {metric:.3e} (tolerance {tol:.1e}) {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------- gabor commands


def _read_c(path) -> np.ndarray:
    try:
        doc = io.read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    _validate(doc, "c-file")
    return _complex_vec(doc["c"] if isinstance(doc, dict) else doc)


def _check_L(L):
    if not 1 <= L <= gabor.L_CAP:
        raise ConfigError(f"L must be between 1 and {gabor.L_CAP}")


def cmd_glp(args) -> int:
    L = args.L
    _check_L(L)
    c = _read_c(args.c_file) if args.c_file else gabor.gaussian_vector(L, args.seed)
    if c.size != L:
        raise ConfigError(f"c has length {c.size}, expected L={L}")
    mode = args.mode or ("exhaustive" if math.comb(L * L, L) <= args.budget else "randomized")
    tol = args.tolerance if args.tolerance is not None else gabor.DET_TOL
    cert = gabor.check_glp(c, mode=mode, trials=int(float(args.trials)), seed=args.seed, budget=args.budget,
                           tol=tol, threads=_threads(args))
    _emit(args, f"glp_L{L}", {"command": "glp", "L": L, "seed": args.seed, "c": _cjson(c),
                              "certificate": cert.to_dict()})
    print(f"glp L={L} mode={mode}: subsets={cert.subsetsChecked} min|det|={cert.minAbsDet:.6e} "
          f"worstCond={cert.worstCond:.6e} {'GLP holds' if cert.holds else 'GLP fails'}")
    return EXIT_OK if cert.holds else EXIT_FAIL


def cmd_search(args) -> int:
    _check_L(args.L)
    mode = "exhaustive" if math.comb(args.L ** 2, args.L) <= args.budget else "randomized"
    ident = gabor.search_identifier(args.L, args.trials, args.seed, args.objective, mode, args.samples,
                                    args.budget, _threads(args))
    _emit(args, f"identifier_L{args.L}", {"command": "search", "seed": args.seed, "objective": args.objective,
                                           **ident.to_dict()})
    print(f"search L={args.L}: score={ident.score:.6e} GLP {'holds' if ident.certificate.holds else 'fails'}")
    return EXIT_OK if ident.certificate.holds else EXIT_FAIL


def cmd_explore(args) -> int:
    """Empirical GLP statistics for any L (composite included); reports findings, asserts nothing."""
    _check_L(args.L)
    L = args.L
    mode = "exhaustive" if math.comb(L * L, L) <= args.budget else "randomized"
    rows = []
    for i in range(args.trials):
        g = gabor.rng_for(args.seed, 8, i).standard_normal((2, L))
        cert = gabor.check_glp(g[0] + 1j * g[1], mode=mode, trials=args.samples, seed=args.seed,
                               budget=args.budget, threads=_threads(args))
        rows.append({"candidate": i, "holds": cert.holds, "minAbsDet": cert.minAbsDet,
                     "normalizedMinAbsDet": cert.minAbsDet / (cert.tolerance / gabor.DET_TOL),
                     "worstCond": cert.worstCond})
    n_hold = sum(r["holds"] for r in rows)
    _emit(args, f"explore_L{L}", {"command": "explore", "L": L, "mode": mode, "seed": args.seed,
                                  "prime": L in geometry.primes_upto(L), "candidates": rows,
                                  "holdCount": n_hold})
    print(f"explore L={L} ({mode}): GLP observed for {n_hold}/{args.trials} random candidates "
          "(empirical observation only)")
    return EXIT_OK


# --------------------------------------------------------------------------- geometry / sweep


def cmd_geometry(args) -> int:
    if args.config is None:
        raise ConfigError("geometry commands need --config")
    cfg = _load_config(args.config, args.sub)
    try:
        M = geometry.SupportSet.from_dict(cfg["support"])
    except (ValueError, KeyError, ZeroDivisionError) as e:
        raise ConfigError(f"invalid support: {e}") from None
    if args.sub == "content":
        Kmax, Lmax = cfg.get("Kmax", 32), cfg.get("Lmax", 32)
        Lset = geometry.primes_upto(Lmax) if cfg.get("primesOnly") else None
        inner, outer = geometry.jordan_content(M, Kmax, Lmax, Lset)
        res = {"inner": inner.__dict__, "outer": outer.__dict__, "area": M.area()}
        print(f"content: inner={inner.value:.6g} (K={inner.bestK}, L={inner.bestL}) "
              f"outer={outer.value:.6g} (K={outer.bestK}, L={outer.bestL})")
    elif args.sub == "rectify":
        kw = {}
        if "epsGrid" in cfg:
            kw["eps_grid"] = [geometry._frac(e) for e in cfg["epsGrid"]]
        try:
            cover = geometry.rectify(M, cfg.get("Lcandidates"), Kcandidates=cfg.get("Kcandidates"), **kw)
        except InfeasibleCoverError as e:
            _emit(args, "rectify", {"command": "geometry rectify", "status": "infeasible", "message": str(e)})
            print(f"rectify: {e}")
            return EXIT_FAIL
        res = {"status": "ok", "cover": cover.to_dict(), "area": float(cover.area)}
        print(f"rectify: K={cover.K} L={cover.L} eps={cover.eps} cells={len(cover.cells)}")
    else:
        nz = geometry.normalize_support(M)
        res = {"support": nz.support.to_dict(), "a": geometry._frac_to_json(nz.a),
               "t0": geometry._frac_to_json(nz.t0), "nu0": geometry._frac_to_json(nz.nu0), "K": nz.K}
        print(f"normalize: a={nz.a} t0={nz.t0} nu0={nz.nu0} K={nz.K}")
    _emit(args, args.sub, {"command": f"geometry {args.sub}", **res})
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config, "sweep")
    L = cfg.get("L", args.L)
    _check_L(L)
    seed = cfg.get("seed", args.seed)
    trials = cfg.get("trials", args.trials)
    areas = cfg.get("areaCells", list(range(1, L + 4)))
    c = _complex_vec(cfg["c"]) if "c" in cfg else gabor.gaussian_vector(L, seed)
    rows = identify.conditioning_sweep(L, c, areas, trials, seed)
    out = Path(args.out)
    io.atomic_write(out / "sweep.csv", identify.sweep_to_csv(rows))
    summary = []
    for a in areas:
        s = np.array([r[2] for r in rows if r[0] == a])
        q = np.quantile(s, [0.1, 0.5, 0.9])
        summary.append({"areaCells": a, "q10": q[0], "median": q[1], "q90": q[2], "flagged": bool(a > L)})
        print(f"|Gamma|={a:2d} sigma_min q10={q[0]:.4e} median={q[1]:.4e} q90={q[2]:.4e}"
              + ("  underdetermined" if a > L else ""))
    _emit(args, "sweep", {"command": "sweep", "L": L, "seed": seed, "trials": trials, "c": _cjson(c),
                          "summary": summary})
    med = [s["median"] for s in summary]
    ok = all(b <= a for a, b in zip(med, med[1:]))
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", default="opws-out", help="output directory (default ./opws-out)")
    common.add_argument("--threads", type=int, help="worker threads (default: $OPWS_THREADS or 1)")
    common.add_argument("--tolerance", type=float, help="override the command's tolerance")

    p = argparse.ArgumentParser(prog="opws", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("demo", parents=[common], help="run a built-in scenario")
    d.add_argument("name", choices=sorted(DEMOS))
    d.set_defaults(func=cmd_demo)

    g = sub.add_parser("glp", parents=[common], help="general-linear-position certificate")
    g.add_argument("L", type=int)
    g.add_argument("--mode", choices=["exhaustive", "randomized"])
    g.add_argument("--trials", default=str(gabor.DEFAULT_RANDOM_SAMPLES), help="random subsets (randomized mode)")
    g.add_argument("--c-file", help="JSON list of c entries (numbers or [re, im])")
    g.add_argument("--budget", type=int, default=gabor.DEFAULT_BUDGET)
    g.set_defaults(func=cmd_glp)

    s = sub.add_parser("search", parents=[common], help="search for a well-conditioned identifier")
    s.add_argument("L", type=int)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--objective", choices=["maximin-det", "min-worst-cond"], default="maximin-det")
    s.add_argument("--samples", type=int, default=10000, help="subsets per candidate when randomized")
    s.add_argument("--budget", type=int, default=10 ** 5)
    s.set_defaults(func=cmd_search)

    e = sub.add_parser("explore-composite", parents=[common],
                       help="empirical GLP statistics for arbitrary (e.g. composite) L")
    e.add_argument("L", type=int)
    e.add_argument("--trials", type=int, default=10)
    e.add_argument("--samples", type=int, default=10000)
    e.add_argument("--budget", type=int, default=10 ** 5)
    e.set_defaults(func=cmd_explore)

    gm = sub.add_parser("geometry", parents=[common], help="support geometry")
    gm.add_argument("sub", choices=["content", "rectify", "normalize"])
    gm.set_defaults(func=cmd_geometry)

    sw = sub.add_parser("sweep", parents=[common], help="conditioning sweep over pattern sizes")
    sw.add_argument("--L", type=int, default=5)
    sw.add_argument("--trials", type=int, default=100)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, PreconditionError, BudgetExceededError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OPWSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
