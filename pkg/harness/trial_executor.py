"""
Runs one Monte Carlo trial: simulate, process, decompose, estimate, score.
Never raises; failures come back as records with `error` and `category`
so the sweep can count them and carry on.
"""
import logging

import numpy as np

from coarray.coarray_pipeline import exact_model_covariance, process_covariance
from coarray.cp_decomposition import tals
from coarray.emvs_model import generate_snapshots
from coarray.errors import CoarrayError
from coarray.parameter_estimator import estimate_all, estimate_from_snapshots

from .metrics import match_to_truth
from .utils import trial_seed

logger = logging.getLogger(__name__)


def _failed(record: dict, message: str, category: str) -> dict:
    record.update({"ok": False, "error": message, "category": category})
    return record


def run_trial(cfg, trial_index: int, point: dict = None) -> dict:
    """
    Execute trial `trial_index` of a RunConfig at one sweep point.

    Returns a dict with keys trial, seed, ok, estimates (8×K radians in
    truth order, or None), truth, fit, iterations, converged, error,
    category.
    """
    point = dict(point or {})
    seed = trial_seed(cfg.seed, trial_index)
    record = {
        "trial": trial_index, "seed": seed, "ok": False, "estimates": None, "truth": None,
        "fit": np.nan, "iterations": 0, "converged": False, "error": None, "category": None,
    }

    try:
        scene = cfg.scene(seed=seed, **point)
        record["truth"] = scene.parameter_matrix()
        tals_cfg = cfg.tals_config(scene.k, seed)
        if cfg.exact_covariance:
            out = process_covariance(exact_model_covariance(scene), scene.transmit, scene.receive)
            factors = tals(out.r5, tals_cfg)
            estimates = estimate_all(factors, out.m_tilde, out.n_tilde)
        else:
            estimates, factors = estimate_from_snapshots(
                generate_snapshots(scene), scene.transmit, scene.receive, tals_cfg
            )
    except CoarrayError as e:
        logger.info("trial %d failed: %s", trial_index, e)
        return _failed(record, str(e), e.category)
    except Exception as e:
        logger.exception("trial %d crashed", trial_index)
        return _failed(record, "{}: {}".format(type(e).__name__, e), "internal")

    record.update({"fit": factors.fit, "iterations": factors.iterations, "converged": factors.converged})
    record["estimates"] = match_to_truth(estimates.parameter_matrix(), record["truth"])

    if not factors.converged:
        return _failed(record, "TALS did not converge in {} iterations".format(factors.iterations), "convergence")
    bad = [r for r in estimates if not r.ok]
    if bad:
        return _failed(record, "target column {}: {}".format(bad[0].column, bad[0].error), bad[0].category)

    record["ok"] = True
    return record
