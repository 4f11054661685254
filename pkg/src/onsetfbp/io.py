"""Field files, iterate logs, tidy plot data and run manifests.

A field file starts with one line of JSON (the header) followed by the
values: raw little-endian float64 for ``.bin`` files, one value per row with
its index columns for ``.csv`` files (the header line is prefixed by ``# ``).
"""
import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def grid_header(xgrid=None, ygrid=None, timegrid=None, times=None, **extra):
    """Grid metadata recorded with every field."""
    head = {"schema": SCHEMA_VERSION}
    if xgrid is not None:
        head.update(dims=xgrid.n_dim, nx=xgrid.points_per_dim, L=xgrid.period)
    if ygrid is not None:
        head["m"] = ygrid.m
    if timegrid is not None:
        head.update(t0=timegrid.t0, T=timegrid.T, N=timegrid.N, q=timegrid.q)
    if times is not None:
        head["times"] = [float(t) for t in times]
    head.update(extra)
    return head


def write_field(path, values, header, fmt=None):
    """Write ``values`` with a JSON header; the format follows the suffix unless ``fmt`` is given."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "binary")
    values = np.ascontiguousarray(values, dtype="<f8")
    head = dict(header, shape=list(values.shape), dtype="<f8", format=fmt)
    line = json.dumps(head, sort_keys=True)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(line.encode() + b"\n")
            fh.write(values.tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write("# " + line + "\n")
            w = csv.writer(fh)
            w.writerow([f"i{k}" for k in range(values.ndim)] + ["value"])
            for idx in np.ndindex(values.shape):
                w.writerow(list(idx) + [repr(float(values[idx]))])
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    return path


def read_field(path):
    """(values, header) from a file written by ``write_field``."""
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline()
        if first.startswith(b"# "):
            head = json.loads(first[2:])
            rows = list(csv.reader(fh.read().decode().splitlines()))[1:]
            values = np.array([float(r[-1]) for r in rows]).reshape(head["shape"])
        else:
            head = json.loads(first)
            values = np.frombuffer(fh.read(), dtype="<f8").reshape(head["shape"]).copy()
    return values, head


class JsonLinesLog:
    """Append-only JSON-lines writer (one record per iterate)."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w")

    def write(self, record):
        self._fh.write(json.dumps(_plain(record), sort_keys=True) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_tidy_csv(path, times, xgrid, quantities):
    """Long-format rows (t, x coordinates, quantity, value) for external plotting.

    ``quantities`` maps a name to an array of shape ``(len(times), *xgrid.shape)``.
    """
    path = Path(path)
    coords = [c.ravel() for c in xgrid.coords] if xgrid.n_dim > 1 else [xgrid.nodes]
    xcols = ["x"] if xgrid.n_dim == 1 else [f"x{k + 1}" for k in range(xgrid.n_dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + xcols + ["quantity", "value"])
        for name, arr in quantities.items():
            arr = np.asarray(arr).reshape(len(times), -1)
            for k, t in enumerate(times):
                for j in range(arr.shape[1]):
                    w.writerow([repr(float(t))] + [repr(float(c[j])) for c in coords]
                               + [name, repr(float(arr[k, j]))])
    return path


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, files, config, wall_time, command, extra=None):
    """manifest.json listing every output with its checksum, the config hash and the wall time."""
    outdir = Path(outdir)
    entries = [{"path": str(Path(f).relative_to(outdir)), "sha256": sha256_file(f),
                "bytes": Path(f).stat().st_size} for f in sorted(map(Path, files))]
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "wall_time_s": wall_time,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "files": entries,
    }
    if extra:
        manifest.update(extra)
    return write_json(outdir / "manifest.json", manifest)


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
