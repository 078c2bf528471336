"""
Closed-form angle and polarization extraction from TALS factors.

Elevation comes from the rotation invariance of the real beamspace steering
vectors,

    tan(π sinθ / 2) · Γ1 â(θ) = Γ2 â(θ),

azimuth from the Poynting vector of the block-mean spatial response, and
polarization from F(θ, φ)⁺ q. Record k is built only from column k of each
factor, so transmit and receive parameters stay paired.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .coarray_pipeline import run_pipeline
from .cp_decomposition import FactorSet, TalsConfig, tals
from .emvs_model import ANGLE_FIELDS, SnapshotMatrix, angular_matrix, poynting_angles
from .errors import CoarrayError, DegenerateResponseError, IllConditionedError, OutOfRangeError, ShapeError
from .geometry import SensorPositions

logger = logging.getLogger(__name__)

COND_LIMIT = 1e10
F_COND_LIMIT = 1e8
POLARIZATION_TOL = 1e-12


@dataclass(frozen=True)
class GammaPair:
    g1: np.ndarray
    g2: np.ndarray


@dataclass
class TargetEstimate:
    theta_t: float = np.nan
    phi_t: float = np.nan
    gamma_t: float = np.nan
    eta_t: float = np.nan
    theta_r: float = np.nan
    phi_r: float = np.nan
    gamma_r: float = np.nan
    eta_r: float = np.nan
    column: int = -1
    poynting_theta_t: float = np.nan
    poynting_theta_r: float = np.nan
    lambda_imag_t: float = 0.0
    lambda_imag_r: float = 0.0
    error: Optional[str] = None
    category: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def angles(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ANGLE_FIELDS])


@dataclass
class EstimateSet:
    records: List[TargetEstimate] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)

    def parameter_matrix(self) -> np.ndarray:
        """(8, K) in ANGLE_FIELDS order; failed records hold NaN."""
        return np.stack([r.angles() for r in self.records], axis=1)


def build_gamma(m_tilde: int) -> GammaPair:
    """(M~-1) × M~ bidiagonal selection matrices; row m uses beams m and m+1."""
    if m_tilde < 2:
        raise ShapeError("need at least two beams, got {}".format(m_tilde))
    g1 = np.zeros((m_tilde - 1, m_tilde))
    g2 = np.zeros((m_tilde - 1, m_tilde))
    for m in range(m_tilde - 1):
        for col in (m, m + 1):
            g1[m, col] = np.cos(col * np.pi / m_tilde)
            g2[m, col] = np.sin(col * np.pi / m_tilde)
    return GammaPair(g1=g1, g2=g2)


def _rotation_operator(c_factor: np.ndarray, m_tilde: int) -> np.ndarray:
    if c_factor.shape[0] != 6 * m_tilde:
        raise ShapeError("factor has {} rows, expected 6·{}".format(c_factor.shape[0], m_tilde))
    k = c_factor.shape[1]
    if k > 6 * (m_tilde - 1):
        raise IllConditionedError("K={} exceeds the rotation-invariance limit 6(M~-1)={}".format(k, 6 * (m_tilde - 1)))
    gamma = build_gamma(m_tilde)
    eye = np.eye(6)
    lhs = np.kron(gamma.g1, eye) @ c_factor
    rhs = np.kron(gamma.g2, eye) @ c_factor
    s = np.linalg.svd(lhs, compute_uv=False)
    if s[-1] <= s[0] / COND_LIMIT:
        raise IllConditionedError("(Γ1 ⊗ I6) C is rank deficient (condition {:.2e})".format(s[0] / max(s[-1], 1e-300)))
    return scipy.linalg.pinv(lhs) @ rhs


def _elevation_eigenvalues(c_factor: np.ndarray, m_tilde: int) -> np.ndarray:
    """Eigenvalues of the rotation operator, one per factor column."""
    phi = _rotation_operator(c_factor, m_tilde)
    vals, vecs = np.linalg.eig(phi)
    # eigenvector i points (mostly) along the column it belongs to
    rows, cols = linear_sum_assignment(np.abs(vecs), maximize=True)
    lam = np.empty(phi.shape[0], dtype=complex)
    lam[rows] = vals[cols]
    return lam


def estimate_elevations(c_factor: np.ndarray, m_tilde: int) -> np.ndarray:
    """θ_k = arcsin(2·arctan(Re λ_k)/π), aligned to the columns of `c_factor`."""
    return _elevations_with_residue(c_factor, m_tilde)[0]


def _elevations_with_residue(c_factor, m_tilde):
    lam = _elevation_eigenvalues(np.asarray(c_factor), m_tilde)
    if not np.all(np.isfinite(lam)):
        raise IllConditionedError("rotation operator has non-finite eigenvalues")
    return np.arcsin(2.0 * np.arctan(lam.real) / np.pi), lam.imag


def reconstruct_spatial_response(c_factor: np.ndarray, m_tilde: int) -> np.ndarray:
    """q_k = (1/M~) Σ_m rows 6m..6m+5 of column k."""
    c_factor = np.asarray(c_factor)
    if c_factor.ndim != 2 or c_factor.shape[0] != 6 * m_tilde:
        raise ShapeError("factor has shape {}, expected (6·{}, K)".format(c_factor.shape, m_tilde))
    return c_factor.reshape(m_tilde, 6, -1).mean(axis=0)


def polarization_from_response(q, theta, phi):
    f = angular_matrix(theta, phi)
    if np.linalg.cond(f) > F_COND_LIMIT:
        raise IllConditionedError("F(θ, φ) is ill-conditioned at θ={:.3g}".format(theta))
    g1, g2 = scipy.linalg.pinv(f) @ np.asarray(q).ravel()
    scale = max(abs(g1), abs(g2))
    if scale == 0:
        raise DegenerateResponseError("polarization vector vanished")
    if abs(g2) <= POLARIZATION_TOL * scale:
        return np.pi / 2, float(np.angle(g1))
    gamma = float(np.arctan(abs(g1) / abs(g2)))
    # η is undefined for γ = 0; report 0
    eta = float(np.angle(g1 / g2)) if abs(g1) > POLARIZATION_TOL * scale else 0.0
    return gamma, eta


def extract_angles_and_polarization(q, theta=None):
    """
    (θ, φ, γ, η) from one spatial response vector.

    θ and φ come from the Poynting vector; pass `theta` to use an external
    elevation (the rotation-invariance estimate) for F(θ, φ)⁺.
    """
    theta_p, phi = poynting_angles(q)
    theta_used = theta_p if theta is None else theta
    gamma, eta = polarization_from_response(q, theta_used, phi)
    return theta_used, phi, gamma, eta


def _check_range(name: str, value: float):
    if not np.isfinite(value) or not 0.0 <= value < np.pi / 2:
        raise OutOfRangeError("{} = {:.4g} rad outside [0, pi/2)".format(name, value))


def _side_estimates(c_factor, m_tilde, side):
    thetas, imag = _elevations_with_residue(c_factor, m_tilde)
    q = reconstruct_spatial_response(c_factor, m_tilde)
    out = []
    for k in range(c_factor.shape[1]):
        item = {"theta_" + side: float(thetas[k]), "lambda_imag_" + side: float(imag[k])}
        try:
            theta_p, phi = poynting_angles(q[:, k])
            item["poynting_theta_" + side] = theta_p
            gamma, eta = polarization_from_response(q[:, k], thetas[k], phi)
            item.update({"phi_" + side: phi, "gamma_" + side: gamma, "eta_" + side: eta})
            for name in ("theta_", "phi_", "gamma_", "eta_"):
                _check_range(name + side, item[name + side])
        except CoarrayError as e:
            item["_error"] = e
        out.append(item)
    return out


def estimate_all(factors: FactorSet, m_tilde: int, n_tilde: int) -> EstimateSet:
    """Transmit parameters from c_t and receive parameters from c_r, column by column."""
    transmit = _side_estimates(factors.c_t, m_tilde, "t")
    receive = _side_estimates(factors.c_r, n_tilde, "r")
    records = []
    for k, (tx, rx) in enumerate(zip(transmit, receive)):
        err = tx.pop("_error", None) or rx.pop("_error", None)
        rx.pop("_error", None)
        rec = TargetEstimate(column=k, **tx, **rx)
        if err is not None:
            rec.error = str(err)
            rec.category = err.category
            logger.warning("target column %d: %s", k, err)
        records.append(rec)
    return EstimateSet(records=records)


def estimate_from_snapshots(y: SnapshotMatrix, transmit: SensorPositions, receive: SensorPositions,
                            tals_cfg: TalsConfig):
    """Full chain: snapshots -> coarray tensor -> TALS -> paired estimates."""
    out = run_pipeline(y, transmit, receive)
    factors = tals(out.r5, tals_cfg)
    return estimate_all(factors, out.m_tilde, out.n_tilde), factors
