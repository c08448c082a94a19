"""File formats.

* signals: CSV rows ``t, re, im`` or raw little-endian float64 with
  interleaved ``re, im`` plus a JSON sidecar ``{t0, dt, n}``;
* 2-D arrays: the same raw layout (row-major) with sidecar
  ``{t0, dt0, t1, dt1, dims}``;
* JSON is written with sorted keys so equal content gives equal bytes.

Every writer goes through :func:`atomic_write`, so a failed command never
leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .model import SampledSignal

__all__ = [
    "atomic_write",
    "dumps_json",
    "write_json",
    "read_json",
    "write_signal_csv",
    "read_signal_csv",
    "write_signal_raw",
    "read_signal_raw",
    "write_array_raw",
    "read_array_raw",
    "write_array_csv",
]


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _deinterleave(v) -> np.ndarray:
    # a view keeps signed zeros and NaN payloads exactly (re + 1j*im would not)
    return np.ascontiguousarray(v, dtype=np.float64).view(np.complex128)


def write_signal_csv(path, f: SampledSignal) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "re", "im"])
    for t, v in zip(f.t, f.samples):
        w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
    return atomic_write(path, buf.getvalue())


def read_signal_csv(path) -> SampledSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    if t.size > 2 and not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("CSV signal is not uniformly sampled")
    return SampledSignal(_deinterleave(data[:, 1:3]).ravel(), float(t[0]), dt)


def _interleave(a) -> bytes:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.complex128))
    return a.view(np.float64).astype("<f8").tobytes()


def write_signal_raw(path, f: SampledSignal) -> Path:
    """Write ``path`` (binary) and ``path + '.json'`` (sidecar)."""
    atomic_write(path, _interleave(f.samples))
    write_json(str(path) + ".json", {"t0": f.t0, "dt": f.dt, "n": f.n})
    return Path(path)


def read_signal_raw(path) -> SampledSignal:
    meta = read_json(str(path) + ".json")
    v = np.fromfile(path, dtype="<f8")
    if v.size != 2 * meta["n"]:
        raise ValueError("binary length does not match sidecar n")
    return SampledSignal(_deinterleave(v), meta["t0"], meta["dt"])


def write_array_raw(path, arr, t0=0.0, dt0=1.0, t1=0.0, dt1=1.0, extra: dict | None = None) -> Path:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    atomic_write(path, _interleave(arr))
    meta = {"t0": float(t0), "dt0": float(dt0), "t1": float(t1), "dt1": float(dt1), "dims": list(arr.shape)}
    if extra:
        meta.update(extra)
    write_json(str(path) + ".json", meta)
    return Path(path)


def read_array_raw(path):
    meta = read_json(str(path) + ".json")
    v = np.fromfile(path, dtype="<f8")
    dims = tuple(meta["dims"])
    if v.size != 2 * int(np.prod(dims)):
        raise ValueError("binary length does not match sidecar dims")
    return _deinterleave(v).reshape(dims), meta


def write_array_csv(path, axes, arr, names=("x", "t")) -> Path:
    """Long-format CSV ``name0, name1, re, im`` (plot ready)."""
    a0, a1 = axes
    arr = np.asarray(arr)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([names[0], names[1], "re", "im"])
    for i, u in enumerate(a0):
        for j, v in enumerate(a1):
            z = complex(arr[i, j])
            w.writerow([repr(float(u)), repr(float(v)), repr(z.real), repr(z.imag)])
    return atomic_write(path, buf.getvalue())
