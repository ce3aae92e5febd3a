"""File formats: columnar CSV tables with JSON metadata and basis bundles.

Tables are plain CSV with ``# key = json`` comment lines up front; floats
are written with 17 significant digits so a read-back reproduces the
in-memory values exactly.  Bases are stored as versioned npz containers.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import kernels as kr
from .dbo import DboBasis
from .dictionary import Dictionary, SourcePoint
from .errors import ConfigurationError
from .geometry import Cylinder, Disk, CapDomain, Interval

FORMAT_VERSION = 1


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_table(path, columns: dict, meta: dict | None = None):
    """Write named columns (equal-length 1D arrays) as CSV with metadata."""
    cols = {k: np.asarray(v, dtype=float).ravel() for k, v in columns.items()}
    n = {len(v) for v in cols.values()}
    if len(n) != 1:
        raise ConfigurationError("columns must have equal length")
    with open(path, "w") as f:
        f.write(f"# format_version = {FORMAT_VERSION}\n")
        for k, v in (meta or {}).items():
            f.write(f"# {k} = {json.dumps(v)}\n")
        f.write(",".join(cols.keys()) + "\n")
        data = np.column_stack(list(cols.values()))
        for row in data:
            f.write(",".join(f"{x:.17g}" for x in row) + "\n")


def load_table(path):
    """Read a table written by :func:`save_table` -> (meta, columns)."""
    meta = {}
    header = None
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = json.loads(val.strip())
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(x) for x in line.split(",")])
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return meta, {name: data[:, j] for j, name in enumerate(header)}


def _shape_record(shape):
    if isinstance(shape, Interval):
        return {"kind": "interval", "a": shape.a, "b": shape.b}
    if isinstance(shape, CapDomain):
        return {"kind": "cap", "center": list(shape.center),
                "radius": shape.radius, "cap_center": shape.cap_center,
                "cap_half_width": shape.cap_half_width,
                "cap_height": shape.cap_height}
    if isinstance(shape, Disk):
        return {"kind": "disk", "center": list(shape.center),
                "radius": shape.radius}
    raise ConfigurationError(f"cannot serialize shape {type(shape).__name__}")


def shape_from_record(rec):
    kind = rec["kind"]
    if kind == "interval":
        return Interval(rec["a"], rec["b"])
    if kind == "disk":
        return Disk(tuple(rec["center"]), rec["radius"])
    if kind == "cap":
        return CapDomain(tuple(rec["center"]), rec["radius"],
                         rec["cap_center"], rec["cap_half_width"],
                         rec["cap_height"])
    raise ConfigurationError(f"unknown shape kind {kind!r}")


def save_dictionary(path, d: Dictionary):
    """Source table with cylinder/material header."""
    ys = np.array([s.y for s in d.sources])
    meta = {
        "shape": _shape_record(d.cylinder.base),
        "t_start": d.cylinder.t_start, "t_end": d.cylinder.t_end,
        "mu": d.params.mu, "lam": d.params.lam, "dim": d.params.dim,
    }
    cols = {f"y{i}": ys[:, i] for i in range(ys.shape[1])}
    cols["tau"] = np.array([s.tau for s in d.sources])
    cols["column"] = np.array([float(s.column) for s in d.sources])
    save_table(path, cols, meta)


def load_dictionary(path) -> Dictionary:
    meta, cols = load_table(path)
    dim = int(meta["dim"])
    params = kr.LameParams(meta["mu"], meta["lam"], dim)
    cyl = Cylinder(shape_from_record(meta["shape"]), meta["t_start"],
                   meta["t_end"])
    sources = [SourcePoint(y=tuple(cols[f"y{i}"][k] for i in range(dim)),
                           tau=float(cols["tau"][k]),
                           column=int(cols["column"][k]))
               for k in range(len(cols["tau"]))]
    return Dictionary(sources, cyl, params)


def save_basis(path, basis: DboBasis, extra_meta: dict | None = None):
    """Versioned container: coefficients, spectrum, sources, cached values."""
    d = basis.dictionary
    ys = np.array([s.y for s in d.sources])
    taus = np.array([s.tau for s in d.sources])
    cols = np.array([s.column for s in d.sources])
    meta = {
        "format_version": FORMAT_VERSION,
        "shape": _shape_record(d.cylinder.base),
        "t_start": d.cylinder.t_start, "t_end": d.cylinder.t_end,
        "mu": d.params.mu, "lam": d.params.lam, "dim": d.params.dim,
        "cond_report": basis.cond_report,
    }
    meta.update(extra_meta or {})
    np.savez(path, coeffs=basis.coeffs, sigma=basis.sigma,
             source_y=ys, source_tau=taus, source_col=cols,
             inner_values=basis.inner_values,
             inner_weights=basis.inner_weights,
             meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def load_basis(path) -> tuple[DboBasis, dict]:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"unsupported basis format {meta.get('format_version')}")
        params = kr.LameParams(meta["mu"], meta["lam"], int(meta["dim"]))
        cyl = Cylinder(shape_from_record(meta["shape"]), meta["t_start"],
                       meta["t_end"])
        sources = [SourcePoint(y=tuple(y), tau=float(t), column=int(c))
                   for y, t, c in zip(z["source_y"], z["source_tau"],
                                      z["source_col"])]
        d = Dictionary(sources, cyl, params)
        basis = DboBasis(z["coeffs"], z["sigma"], d, meta["cond_report"],
                         z["inner_values"], z["inner_weights"])
    return basis, meta
