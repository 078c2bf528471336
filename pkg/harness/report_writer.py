"""
Writes sweep results to the output/ directory.
File names carry no timestamps: the same config and seed give byte-identical CSV.
"""
import json
import os
from pathlib import Path

import numpy as np
import pandas as pd

from coarray.errors import ReportIOError

FLOAT_FORMAT = "%.10g"


def default_path(name: str, suffix: str = ".csv", output_dir: str = "output") -> str:
    return os.path.join(output_dir, name + suffix)


def _prepare(path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError("cannot create directory for {}: {}".format(path, e), path=path)
    return path


def save_frame(frame: pd.DataFrame, path) -> str:
    """Write a DataFrame as CSV. Returns the file path."""
    path = _prepare(path)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ReportIOError("cannot write {}: {}".format(path, e), path=path)
    return str(path)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def save_json(payload: dict, path) -> str:
    path = _prepare(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise ReportIOError("cannot write {}: {}".format(path, e), path=path)
    return str(path)


def save_snapshots(y: np.ndarray, path) -> str:
    path = _prepare(path)
    try:
        np.save(path, y)
    except OSError as e:
        raise ReportIOError("cannot write {}: {}".format(path, e), path=path)
    return str(path)


def sidecar_path(path, suffix: str) -> str:
    """'out/snr.csv' -> 'out/snr<suffix>'."""
    path = Path(path)
    return str(path.with_name(path.stem + suffix))


def save_report(report, path, config_summary: dict = None, with_trials: bool = False) -> list:
    """
    Summary CSV at `path`, plus a JSON sidecar with the config and failure
    counts, plus the per-trial CSV when `with_trials` is set.
    """
    written = [save_frame(report.summary_frame(), path)]
    categories = {}
    for row in report.trials:
        if not row.get("ok") and row.get("target", 0) <= 0:
            cat = row.get("category") or "unknown"
            categories[cat] = categories.get(cat, 0) + 1
    payload = {
        "axis": report.axis,
        "config": config_summary or {},
        "failures": report.total_failures,
        "failure_categories": categories,
        "points": len(report.rows),
    }
    written.append(save_json(payload, sidecar_path(path, ".json")))
    if with_trials:
        written.append(save_frame(report.trial_frame(), sidecar_path(path, "_trials.csv")))
    return written
