"""Trace serialization to JSON lines or CSV.

JSON lines: one header object, then one object per iteration record.
CSV: one row per record with a header row; the header object goes to a
``<path>.header.json`` sidecar. Floats are written with 17 significant digits
so they read back bit-exactly. Output depends only on the trace and header,
so repeated runs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .sampling import RNG_NAME

COLUMNS = ("k", "f", "proj_grad_norm", "step_norm", "residual_z", "phase", "phi", "kkt_norm")


def _plain(obj):
    """Recursively convert numpy values to JSON-ready Python values; NaN and
    infinities become ``None``."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _records(trace):
    if trace.records:
        return trace.records
    from .solvers import IterationRecord

    return [IterationRecord(0, trace.final_x, trace.final_f, math.nan, 0.0)]


def trace_header(trace, extra: dict | None = None) -> dict:
    head = {
        "algorithm": trace.algorithm,
        "termination": trace.termination,
        "iterations": len(trace.records),
        "final_f": trace.final_f,
        "final_x": trace.final_x,
        "rng": RNG_NAME,
        "constants": trace.meta,
    }
    if extra:
        head.update(extra)
    return _plain(head)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "%.17g" % v if math.isfinite(v) else ""


def emit_trace(trace, fmt: str, path, header: dict | None = None) -> None:
    """Write ``trace`` to ``path``.

    Parameters
    ----------
    trace : Trace
    fmt : {"jsonl", "csv"}
    path : str or Path
    header : dict, optional
        Extra header fields, e.g. the run configuration and problem metadata.

    Raises
    ------
    OSError
        If the path cannot be written.
    """
    path = Path(path)
    head = trace_header(trace, header)
    recs = _records(trace)
    if fmt == "jsonl":
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({"header": head}) + "\n")
            for r in recs:
                row = {c: getattr(r, c) for c in COLUMNS}
                row["x"] = r.x
                fh.write(json.dumps(_plain(row)) + "\n")
    elif fmt == "csv":
        n = np.asarray(recs[0].x).size
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(COLUMNS) + [f"x{i}" for i in range(n)])
            for r in recs:
                w.writerow([_fmt(getattr(r, c)) for c in COLUMNS] + [_fmt(v) for v in np.asarray(r.x)])
        sidecar = path.with_name(path.name + ".header.json")
        sidecar.write_text(json.dumps(head, indent=1) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def read_trace(path, fmt: str | None = None):
    """Read a trace file back as ``(header, rows)``; rows are dicts."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "jsonl")
    if fmt == "jsonl":
        lines = path.read_text(encoding="utf-8").splitlines()
        return json.loads(lines[0])["header"], [json.loads(s) for s in lines[1:]]
    head = json.loads(path.with_name(path.name + ".header.json").read_text(encoding="utf-8"))
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out = {}
            for key, val in row.items():
                if key == "phase":
                    out[key] = val or None
                elif key == "k":
                    out[key] = int(val)
                else:
                    out[key] = float(val) if val != "" else None
            rows.append(out)
    return head, rows
