"""Serialization of reports to CSV and JSON.

CSV files use '.' as decimal separator and 17 significant digits for reals
so that every double round-trips.  JSON output sorts keys; identical
reports therefore serialize to identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, OutputError
from .experiments import ExperimentReport
from .stationary_measures import CoefficientSequence, RootClassification


@dataclass
class Table:
    """Named equal-length columns plus free-form metadata."""

    columns: dict
    meta: dict = field(default_factory=dict)


def fmt_real(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _plain(obj):
    """Recursively convert numpy and dataclass values to JSON-ready Python."""
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [{"re": float(z.real), "im": float(z.imag)} for z in obj.reshape(-1)]
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    return obj


def to_json_obj(report) -> dict:
    if isinstance(report, RootClassification):
        return {
            "roots": _plain(np.asarray(report.roots, dtype=np.complex128)),
            "counts": {"inside": report.inside, "on": report.on, "outside": report.outside},
            "nu1": report.nu1,
        }
    if isinstance(report, CoefficientSequence):
        return {
            "regime": report.regime, "H": report.H, "p0": report.p0, "k": report.k,
            "l": report.l, "ratio": report.ratio, "b": _plain(report.b),
        }
    if isinstance(report, ExperimentReport):
        return _plain({
            "name": report.name, "config": report.config, "aggregates": report.aggregates,
            "censored": report.censored, "tables": report.tables, "wall_time": report.wall_time,
        })
    if isinstance(report, Table):
        return _plain({"columns": report.columns, "meta": report.meta})
    return _plain(report)


def _experiment_columns(rep: ExperimentReport) -> dict:
    t = rep.tables
    if rep.name == "hist2d":
        c = t["counts"]
        i, j = np.indices(c.shape)
        cols = {"i": i.ravel(), "j": j.ravel(), "count": c.ravel()}
        if "analytic" in t:
            cols["analytic_mass"] = t["analytic"].ravel()
        return cols
    if rep.name == "equi":
        return {"bin": np.arange(t["counts"].size), "count": t["counts"]}
    if rep.name == "diverge":
        keys = ["eps", "P_mean", "P_se", "P_analytic", "z_score"]
        return {k: t[k] for k in keys if k in t}
    if rep.name == "intermit":
        F = t["close_fraction"]
        cps = t["checkpoints"]
        tr, ci = np.indices(F.shape)
        return {"trial": tr.ravel(), "n": cps[ci.ravel()], "F": F.ravel()}
    if rep.name == "sync":
        return {
            "trial": np.arange(t["final_log10_distance"].size),
            "final_log10_distance": t["final_log10_distance"],
            "crossings": t["crossings"], "max_jump": t["max_jump"],
        }
    raise DomainError(f"no CSV layout for experiment {rep.name!r}")


def to_columns(report) -> dict:
    if isinstance(report, CoefficientSequence):
        return {"h": np.arange(report.b.size), "b_h": report.b}
    if isinstance(report, RootClassification):
        r = np.asarray(report.roots)
        return {"index": np.arange(r.size), "re": r.real, "im": r.imag, "modulus": np.abs(r)}
    if isinstance(report, ExperimentReport):
        return _experiment_columns(report)
    if isinstance(report, Table):
        return report.columns
    if isinstance(report, dict):
        flat = {k: v for k, v in report.items() if np.ndim(v) == 0}
        return {"key": list(flat), "value": list(flat.values())}
    if dataclasses.is_dataclass(report):
        return to_columns(to_json_obj(report))
    raise DomainError(f"cannot tabulate {type(report).__name__}")


def render(report, format: str) -> str:
    if format == "json":
        return json.dumps(to_json_obj(report), sort_keys=True, indent=2) + "\n"
    if format == "csv":
        cols = to_columns(report)
        names = list(cols)
        data = [np.asarray(cols[k]).reshape(-1) if np.ndim(cols[k]) else np.array([cols[k]]) for k in names]
        n = max((len(c) for c in data), default=0)
        if any(len(c) != n for c in data):
            raise DomainError("CSV columns differ in length")
        lines = [",".join(names)]
        for row in range(n):
            lines.append(",".join(
                fmt_real(c[row]) if not isinstance(c[row], str) else c[row] for c in data))
        return "\n".join(lines) + "\n"
    raise DomainError(f"unknown format {format!r}")


def emit_report(report, path: Optional[str], format: str = "json") -> None:
    """Write ``report`` to ``path`` (``None`` or ``'-'`` for stdout)."""
    text = render(report, format)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
