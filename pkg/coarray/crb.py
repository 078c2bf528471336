"""
Deterministic Cramer-Rao bound for the 8K angle/polarization parameters of a
bistatic EMVS-MIMO scene.

The bound is computed on the physical joint manifold C_tr = C_t ⊙ C_r, not on
the coarray statistics, so the coarray estimator is not expected to reach it
in underdetermined scenes.

    CRB = σ²/(2L) · [Re((Dᴴ Π⊥ D) ∘ (1_{8×8} ⊗ R_ssᵀ))]⁻¹

D stacks ∂c_k/∂α family by family (θt block, φt, γt, ηt, θr, φr, γr, ηr), so
the Hadamard mask is 1_{8×8} ⊗ R_ssᵀ to match that column order.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .emvs_model import (
    ANGLE_FIELDS,
    SceneConfig,
    angular_matrix,
    noise_variance,
    polarization_vector,
    scene_manifold,
)
from .errors import ParameterError, RankDeficiencyError
from .geometry import SensorPositions

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
ANGLE_FAMILIES = (0, 1, 4, 5)
POLARIZATION_FAMILIES = (2, 3, 6, 7)


@dataclass(frozen=True)
class CrbResult:
    matrix: np.ndarray
    sigma2: float
    snapshots: int
    k: int
    parameter_order: tuple = ANGLE_FIELDS

    def variances(self) -> np.ndarray:
        """(8, K) diagonal, rows in parameter_order."""
        return np.diag(self.matrix).reshape(8, self.k)


# --- Manifold pieces ---

def _side_column(arr: SensorPositions, theta, phi, gamma, eta) -> np.ndarray:
    a = np.exp(-1j * np.pi * arr.as_array() * np.sin(theta))
    return np.kron(a, angular_matrix(theta, phi) @ polarization_vector(gamma, eta))


def _target_column(transmit, receive, alpha) -> np.ndarray:
    return np.kron(_side_column(transmit, *alpha[:4]), _side_column(receive, *alpha[4:]))


def response_derivatives(theta, phi, gamma, eta) -> dict:
    """Analytic ∂q/∂θ, ∂q/∂φ, ∂q/∂γ, ∂q/∂η of q = F(θ, φ) g(γ, η)."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    d_theta = np.array([
        [-cp * st, 0.0], [-sp * st, 0.0], [-ct, 0.0],
        [0.0, cp * st], [0.0, sp * st], [0.0, ct],
    ], dtype=complex)
    d_phi = np.array([
        [-sp * ct, -cp], [cp * ct, -sp], [0.0, 0.0],
        [-cp, sp * ct], [-sp, -cp * ct], [0.0, 0.0],
    ], dtype=complex)
    f = angular_matrix(theta, phi)
    g = polarization_vector(gamma, eta)
    dg_gamma = np.array([np.cos(gamma) * np.exp(1j * eta), -np.sin(gamma)])
    dg_eta = np.array([1j * np.sin(gamma) * np.exp(1j * eta), 0.0])
    return {
        "theta": d_theta @ g,
        "phi": d_phi @ g,
        "gamma": f @ dg_gamma,
        "eta": f @ dg_eta,
    }


def _side_derivatives(arr: SensorPositions, theta, phi, gamma, eta):
    """∂(a ⊗ q) for the four parameters of one side."""
    p = arr.as_array()
    a = np.exp(-1j * np.pi * p * np.sin(theta))
    da = -1j * np.pi * p * np.cos(theta) * a
    q = angular_matrix(theta, phi) @ polarization_vector(gamma, eta)
    dq = response_derivatives(theta, phi, gamma, eta)
    return [
        np.kron(da, q) + np.kron(a, dq["theta"]),
        np.kron(a, dq["phi"]),
        np.kron(a, dq["gamma"]),
        np.kron(a, dq["eta"]),
    ], np.kron(a, q)


def _validate(scene: SceneConfig) -> np.ndarray:
    params = scene.parameter_matrix()
    if np.any(params <= 0) or np.any(params >= np.pi / 2):
        raise ParameterError("CRB needs every angle strictly inside (0, pi/2)")
    rows = scene.channels
    if 8 * scene.k > rows - scene.k:
        raise ParameterError("8K = {} exceeds 36MN - K = {}".format(8 * scene.k, rows - scene.k))
    return params


def manifold_derivatives(scene: SceneConfig, method: str = "finite", step: float = FD_STEP) -> np.ndarray:
    """
    D = [∂C/∂θt, ∂C/∂φt, ..., ∂C/∂ηr], shape (36MN, 8K).

    `method` is "finite" (central differences) or "analytic".
    """
    params = scene.parameter_matrix()
    k = scene.k
    d = np.zeros((scene.channels, 8 * k), dtype=complex)
    for col in range(k):
        alpha = params[:, col]
        if method == "finite":
            for fam in range(8):
                hi, lo = alpha.copy(), alpha.copy()
                hi[fam] += step
                lo[fam] -= step
                d[:, fam * k + col] = (
                    _target_column(scene.transmit, scene.receive, hi)
                    - _target_column(scene.transmit, scene.receive, lo)
                ) / (2 * step)
        elif method == "analytic":
            dt, ct = _side_derivatives(scene.transmit, *alpha[:4])
            dr, cr = _side_derivatives(scene.receive, *alpha[4:])
            for fam in range(4):
                d[:, fam * k + col] = np.kron(dt[fam], cr)
                d[:, (fam + 4) * k + col] = np.kron(ct, dr[fam])
        else:
            raise ParameterError("unknown derivative method {!r}".format(method))
    return d


def crb_matrix(scene: SceneConfig, method: str = "finite", step: float = FD_STEP) -> CrbResult:
    _validate(scene)
    k = scene.k
    c = scene_manifold(scene)
    d = manifold_derivatives(scene, method=method, step=step)
    proj = np.eye(c.shape[0]) - c @ scipy.linalg.pinv(c)
    r_ss = np.diag(scene.powers())
    fisher = np.real((d.conj().T @ proj @ d) * np.kron(np.ones((8, 8)), r_ss.T))
    fisher = (fisher + fisher.T) / 2

    evals, evecs = np.linalg.eigh(fisher)
    if evals[0] <= evals[-1] * 1e-12:
        null = evecs[:, evals <= evals[-1] * 1e-12]
        raise RankDeficiencyError(
            "Fisher matrix is singular ({} null directions)".format(null.shape[1]), null_directions=null
        )

    sigma2 = noise_variance(scene)
    crb = sigma2 / (2.0 * scene.snapshots) * np.linalg.inv(fisher)
    crb = (crb + crb.T) / 2
    logger.debug("CRB for K=%d, L=%d, sigma2=%.3g", k, scene.snapshots, sigma2)
    return CrbResult(matrix=crb, sigma2=sigma2, snapshots=scene.snapshots, k=k)


def crb_diagonal_groups(result: CrbResult):
    """Root-mean CRB in degrees for the angle and polarization groups."""
    var = result.variances()
    angle = np.degrees(np.sqrt(np.mean(var[list(ANGLE_FAMILIES)])))
    polarization = np.degrees(np.sqrt(np.mean(var[list(POLARIZATION_FAMILIES)])))
    return float(angle), float(polarization)
