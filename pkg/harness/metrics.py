"""
Scoring of estimates against truth.

Errors are reported in degrees for two groups: angles (θt, φt, θr, φr)
and polarization (γt, ηt, γr, ηr). Group RMSE is the root of the mean
squared error over trials, targets and the four parameters of the group.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from coarray.emvs_model import ANGLE_FIELDS

ANGLE_GROUP = (0, 1, 4, 5)
POLARIZATION_GROUP = (2, 3, 6, 7)
MISSING_COST = 1e6


class GroupScore(NamedTuple):
    angle: float
    polarization: float


def match_to_truth(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """
    Reorder the columns of an (8, K) estimate to the truth's target order.

    Assignment minimizes the squared (θt, θr) distance; columns with a NaN
    elevation are matched last.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    d_t = est[0][:, None] - truth[0][None, :]
    d_r = est[4][:, None] - truth[4][None, :]
    cost = d_t ** 2 + d_r ** 2
    cost = np.where(np.isfinite(cost), cost, MISSING_COST)
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(truth.shape[1], dtype=int)
    order[cols] = rows
    return est[:, order]


def _errors_deg(estimates, truths) -> np.ndarray:
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("estimate shape {} differs from truth shape {}".format(est.shape, tru.shape))
    if est.ndim == 2:
        est, tru = est[None], tru[None]
    return np.degrees(est - tru)


def rmse(estimates, truths) -> GroupScore:
    """
    Group RMSE in degrees.

    `estimates` and `truths` are (8, K) radian matrices or stacks (I, 8, K)
    over trials, rows in ANGLE_FIELDS order. An empty stack scores NaN.
    """
    err = _errors_deg(estimates, truths)
    if err.shape[0] == 0:
        return GroupScore(np.nan, np.nan)
    angle = np.sqrt(np.mean(err[:, list(ANGLE_GROUP), :] ** 2))
    polarization = np.sqrt(np.mean(err[:, list(POLARIZATION_GROUP), :] ** 2))
    return GroupScore(float(angle), float(polarization))


def bias(estimates, truths) -> np.ndarray:
    """(8, K) mean estimate minus truth over trials, in degrees."""
    err = _errors_deg(estimates, truths)
    if err.shape[0] == 0:
        return np.full(err.shape[1:], np.nan)
    return err.mean(axis=0)


def bias_norm(bias_deg: np.ndarray) -> GroupScore:
    """Root-mean-square of a bias matrix within each group."""
    b = np.asarray(bias_deg, dtype=float)
    return GroupScore(
        float(np.sqrt(np.mean(b[list(ANGLE_GROUP)] ** 2))),
        float(np.sqrt(np.mean(b[list(POLARIZATION_GROUP)] ** 2))),
    )


@dataclass
class RmseReport:
    """Per-point summary rows plus per-trial, per-target detail rows."""
    axis: str
    rows: List[dict] = field(default_factory=list)
    trials: List[dict] = field(default_factory=list)
    elapsed_s: float = 0.0

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trials)

    @property
    def total_failures(self) -> int:
        return int(sum(r["failures"] for r in self.rows))


def summarize_point(axis: str, value, records: list, crb_groups=None) -> dict:
    """One summary row from the trial records of a sweep point."""
    ok = [r for r in records if r["ok"]]
    if ok:
        est = np.stack([r["estimates"] for r in ok])
        tru = np.stack([r["truth"] for r in ok])
    else:
        k = records[0]["truth"].shape[1] if records and records[0].get("truth") is not None else 1
        est = tru = np.empty((0, 8, k))
    score = rmse(est, tru)
    b = bias(est, tru)
    b_norm = bias_norm(b)
    row = {
        axis: value,
        "rmse_angle": score.angle,
        "rmse_polarization": score.polarization,
        "bias_angle": b_norm.angle,
        "bias_polarization": b_norm.polarization,
    }
    for i, name in enumerate(ANGLE_FIELDS):
        row["bias_" + name] = float(np.mean(np.abs(b[i]))) if b.size else np.nan
    if crb_groups is not None:
        row["crb_angle"], row["crb_polarization"] = crb_groups
    row["successes"] = len(ok)
    row["failures"] = len(records) - len(ok)
    row["trials"] = len(records)
    return row


def trial_rows(axis: str, value, record: dict) -> list:
    """Per-target rows (degrees) for the scatter / detail output."""
    truth = record.get("truth")
    if truth is None:
        return [{axis: value, "trial": record["trial"], "target": -1, "ok": False,
                 "category": record.get("category")}]
    est = record.get("estimates")
    out = []
    for k in range(truth.shape[1]):
        row = {axis: value, "trial": record["trial"], "target": k, "ok": record["ok"],
               "category": record.get("category")}
        for i, name in enumerate(ANGLE_FIELDS):
            row["true_" + name] = float(np.degrees(truth[i, k]))
            row["est_" + name] = float(np.degrees(est[i, k])) if est is not None else np.nan
        out.append(row)
    return out
