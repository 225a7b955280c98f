"""Deterministic CSV/JSON emission for experiment runs.

Profile snapshots go to ``<tag>_t<time>.csv`` with header ``x,h``; scalar
series go to ``<name>.csv`` with header ``t,value``.  Every run directory
gets exactly one ``manifest.json`` echoing the resolved config, the seeds,
the package version, and the wall-clock time.  Floats are written with
repr (shortest round-trip), so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import __version__


def format_time_tag(t: float) -> str:
    return f"{t:.8g}"


def emit_profile_csv(directory, tag: str, t: float, x, values) -> Path:
    path = Path(directory) / f"{tag}_t{format_time_tag(t)}.csv"
    _write_columns(path, ("x", "h"), (np.asarray(x), np.asarray(values)))
    return path


def emit_series_csv(directory, name: str, times, values) -> Path:
    path = Path(directory) / f"{name}.csv"
    _write_columns(path, ("t", "value"), (np.asarray(times), np.asarray(values)))
    return path


def emit_table_csv(directory, name: str, header, columns) -> Path:
    path = Path(directory) / f"{name}.csv"
    _write_columns(path, header, [np.asarray(c) for c in columns])
    return path


def _write_columns(path: Path, header, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("columns must share a length")
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*columns):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_manifest(directory, config_doc: dict, wall_seconds: float,
                   extra: dict | None = None) -> Path:
    doc = {
        "config": config_doc,
        "package_version": __version__,
        "wall_clock_seconds": wall_seconds,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    if extra:
        doc["results"] = extra
    path = Path(directory) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    try:
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return path
