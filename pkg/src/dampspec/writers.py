"""CSV and JSON emission with documented column headers.

File formats
------------
curves.csv
    ``mu, gamma_1, ..., gamma_k, gamma_inf, gamma_inf_lower``; the last two
    are empty on bounded domains.
intersections.csv
    ``alpha, curve, kind, mu_star, lambda, residual, classification,
    bracket_lo, bracket_hi``; ``curve`` is ``inf`` for the essential row.
thresholds.csv
    ``curve, side, alpha_threshold, witness_mu, mechanism, found``.
spectrum_alpha_<A>.csv
    ``re, im, residual, matched_curve``; ``matched_curve`` is 0 for
    non-real eigenvalues and for real ones without a matching curve.
evolution_trace.csv
    ``t, h_norm, log_h_norm``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "to_jsonable",
    "write_json",
    "write_csv",
    "sha256_file",
    "curve_rows",
    "intersection_rows",
    "threshold_rows",
    "spectrum_rows",
    "trace_rows",
    "alpha_tag",
]


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and dataclasses; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if dataclasses.is_dataclass(obj) and hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cell(v: Any) -> Any:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def alpha_tag(alpha: float) -> str:
    return f"{alpha:g}".replace("-", "m").replace(".", "p")


def curve_rows(table):
    header = ["mu"] + [f"gamma_{n + 1}" for n in range(table.k)] + ["gamma_inf", "gamma_inf_lower"]
    rows = []
    for j, mu in enumerate(table.mu_samples):
        if table.essential_row is None or not np.isfinite(table.essential_row[j]):
            ess = (None, None)
        else:
            ess = (table.essential_row[j], table.essential_lower[j])
        rows.append([mu, *table.curves[:, j], *ess])
    return header, rows


def intersection_rows(records_by_alpha: dict):
    header = ["alpha", "curve", "kind", "mu_star", "lambda", "residual", "classification", "bracket_lo", "bracket_hi"]
    rows = []
    for alpha, records in records_by_alpha.items():
        for r in records:
            lo, hi = r.bracket if r.bracket is not None else (None, None)
            rows.append([alpha, "inf" if r.curve is None else r.curve, r.kind, r.mu_star, r.lam,
                         r.residual, r.classification, lo, hi])
    return header, rows


def threshold_rows(records):
    header = ["curve", "side", "alpha_threshold", "witness_mu", "mechanism", "found"]
    rows = [[t.curve, "+" if t.side > 0 else "-", t.alpha_threshold if t.found else None, t.witness, t.mechanism, t.found]
            for t in records]
    return header, rows


def spectrum_rows(report, matched: dict | None = None):
    """``matched`` maps the index of a real eigenvalue in ``report.real_eigenvalues`` to its curve."""
    matched = matched or {}
    real_pos = {}
    order = np.flatnonzero(report.real_mask)
    order = order[np.argsort(report.eigenvalues[order].real, kind="stable")]
    for j, i in enumerate(order):
        real_pos[int(i)] = j
    header = ["re", "im", "residual", "matched_curve"]
    rows = []
    for i, (lam, res) in enumerate(zip(report.eigenvalues, report.residuals)):
        curve = matched.get(real_pos[i], 0) if i in real_pos else 0
        rows.append([lam.real, lam.imag, res, curve])
    return header, rows


def trace_rows(trace):
    header = ["t", "h_norm", "log_h_norm"]
    return header, [[t, h, lg] for t, h, lg in zip(trace.times, trace.h_norms, trace.log_norms)]
