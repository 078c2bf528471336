"""
Generator-based sweep loop used by the CLI (main.py).

Yields (event_type, data) tuples so callers can display live progress.

Event types:
    ("status",      str)          - general status message
    ("point_start", dict)         - axis, value, index of the sweep point
    ("trial_done",  dict)         - trial record summary (trial, ok, category)
    ("point_done",  dict)         - summary row of the finished point
    ("complete",    RmseReport)   - all points finished
    ("error",       CoarrayError) - fatal error; the generator stops
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed

import pandas as pd

from coarray.cp_decomposition import check_identifiable
from coarray.crb import crb_diagonal_groups, crb_matrix
from coarray.errors import CoarrayError
from coarray.geometry import difference_coarray

from .metrics import RmseReport, summarize_point, trial_rows
from .report_writer import save_frame, save_report
from .trial_executor import run_trial

logger = logging.getLogger(__name__)


def axis_column(cfg) -> str:
    return "point" if cfg.sweep == "none" else cfg.sweep


def _check_points(cfg) -> None:
    """Fail fast when a sweep point asks for more targets than the coarray can resolve."""
    m_tilde = difference_coarray(cfg.transmit()).size
    n_tilde = difference_coarray(cfg.receive()).size
    shape = (6 * m_tilde, 6 * n_tilde, 36)
    for _, point in cfg.sweep_points():
        check_identifiable(shape, int(point.get("k", cfg.k)))


def _run_point(cfg, point: dict):
    """Yields finished trial records in completion order."""
    if cfg.workers == 1:
        for i in range(cfg.trials):
            yield run_trial(cfg, i, point)
        return
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(run_trial, cfg, i, point) for i in range(cfg.trials)]
        for fut in as_completed(futures):
            yield fut.result()


def _crb_for_point(cfg, point: dict):
    try:
        return crb_diagonal_groups(crb_matrix(cfg.scene(**point)))
    except CoarrayError as e:
        logger.warning("CRB unavailable at %s: %s", point, e)
        return (float("nan"), float("nan"))


def run_sweep(cfg, out_path=None, with_trials: bool = False):
    """
    Generator that runs every trial of every sweep point and yields progress events.

    Parameters
    ----------
    cfg : RunConfig
        Scene, sweep axis and Monte Carlo sizes.
    out_path : str, optional
        Summary CSV destination; nothing is written when None.
    with_trials : bool
        Also write per-trial, per-target rows next to the summary.

    Yields
    ------
    (event_type, data) tuples - see module docstring for full list.
    """
    yield ("status", "Checking {} sweep point(s)...".format(len(cfg.sweep_points())))
    try:
        _check_points(cfg)
    except CoarrayError as e:
        yield ("error", e)
        return

    axis = axis_column(cfg)
    report = RmseReport(axis=axis)
    started = time.perf_counter()

    for index, (value, point) in enumerate(cfg.sweep_points()):
        yield ("point_start", {"axis": axis, "value": value, "index": index})
        records = []
        for record in _run_point(cfg, point):
            records.append(record)
            yield ("trial_done", {"trial": record["trial"], "ok": record["ok"], "category": record["category"]})

        # completion order depends on scheduling; aggregate in trial order
        records.sort(key=lambda r: r["trial"])
        crb_groups = _crb_for_point(cfg, point) if cfg.with_crb else None
        row = summarize_point(axis, 0 if value is None else value, records, crb_groups)
        report.rows.append(row)
        for record in records:
            report.trials.extend(trial_rows(axis, 0 if value is None else value, record))
        yield ("point_done", row)

    report.elapsed_s = time.perf_counter() - started

    if out_path is not None:
        try:
            for path in save_report(report, out_path, cfg.summary(), with_trials=with_trials):
                yield ("status", "Wrote {}".format(path))
        except CoarrayError as e:
            yield ("error", e)
            return

    yield ("complete", report)


def run_crb_sweep(cfg, out_path=None):
    """CRB-only sweep; same event protocol as run_sweep, no trials."""
    axis = axis_column(cfg)
    rows = []
    for index, (value, point) in enumerate(cfg.sweep_points()):
        yield ("point_start", {"axis": axis, "value": value, "index": index})
        try:
            result = crb_matrix(cfg.scene(**point))
        except CoarrayError as e:
            yield ("error", e)
            return
        angle, polarization = crb_diagonal_groups(result)
        row = {axis: 0 if value is None else value, "crb_angle": angle,
               "crb_polarization": polarization, "sigma2": result.sigma2}
        rows.append(row)
        yield ("point_done", row)

    report = RmseReport(axis=axis, rows=rows)
    if out_path is not None:
        try:
            yield ("status", "Wrote {}".format(save_frame(pd.DataFrame(rows), out_path)))
        except CoarrayError as e:
            yield ("error", e)
            return
    yield ("complete", report)
