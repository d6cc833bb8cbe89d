"""CSV export of estimate reports and plot data, with manifests.

All numbers are written with 17 significant digits so that reruns with the
same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .estimates import EstimateReport, log2_slope
from .fieldio import write_manifest

__all__ = ["fmt", "write_rows", "write_trials_csv", "emit_plotdata", "write_summary_csv",
           "write_report", "refit_slope"]

TRIAL_COLUMNS = ["estimate", "parameter", "trial", "lhs", "rhs", "ratio", "skipped"]


def fmt(v) -> str:
    """Deterministic text form of a scalar."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=float)
    return str(v)


def write_rows(path: str | Path, header: list, rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_trials_csv(report: EstimateReport, path: str | Path) -> Path:
    """One row per trial; extra per-trial fields become additional columns."""
    extras = sorted({k for t in report.trials for k in t.extra})
    rows = ([report.estimate, t.parameter, t.trial, t.lhs, t.rhs, t.ratio, t.skipped]
            + [t.extra.get(k, "") for k in extras] for t in report.trials)
    return write_rows(path, TRIAL_COLUMNS + extras, rows)


def emit_plotdata(report: EstimateReport, path: str | Path) -> Path:
    """Long-format ``(parameter, trial, quantity, value)`` rows; header only for no trials."""
    def rows():
        for t in report.trials:
            for q in ("lhs", "rhs", "ratio"):
                yield t.parameter, t.trial, q, getattr(t, q)
    return write_rows(path, ["parameter", "trial", "quantity", "value"], rows())


def write_summary_csv(report: EstimateReport, path: str | Path) -> Path:
    rows = [(k, report.summary[k]) for k in sorted(report.summary)]
    rows.append(("verdict", report.verdict))
    return write_rows(path, ["key", "value"], rows)


def refit_slope(path: str | Path) -> Optional[float]:
    """Least-squares slope of ``log2`` of the largest ratio per parameter, from a trials CSV."""
    best: dict = {}
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            if row["skipped"] == "true":
                continue
            x, r = float(row["parameter"]), float(row["ratio"])
            best[x] = max(best.get(x, -np.inf), r)
    if len(best) < 2:
        return None
    xs = sorted(best)
    return log2_slope(xs, [best[x] for x in xs])


def write_report(report: EstimateReport, directory: str | Path, config: Mapping,
                 stem: Optional[str] = None) -> Path:
    """Trials, plot data and summary CSVs plus a manifest carrying the config hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or report.estimate
    files = [write_trials_csv(report, directory / f"{stem}_trials.csv"),
             emit_plotdata(report, directory / f"{stem}_plot.csv"),
             write_summary_csv(report, directory / f"{stem}_summary.csv")]
    return write_manifest(directory, files, config, extra={"verdict": report.verdict,
                                                           "estimate": report.estimate},
                          name=f"{stem}_manifest.json")
