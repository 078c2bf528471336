"""
From snapshots to the three-way coarray tensor.

    Y (36MN × L)
      -> 5-way snapshot tensor        (M, 6, N, 6, L)
      -> 8-way covariance tensor      (M, 6, N, 6, M, 6, N, 6)
      -> permute + group              (M², 6, N², 6, 36)
      -> coarray selection ×1 J1 ×3 J2 (M~, 6, N~, 6, 36)
      -> DFT beamspace ×1 Wt ×3 Wr     (M~, 6, N~, 6, 36)
      -> group [0,1][2,3][4]           (6M~, 6N~, 36)

No noise term is subtracted anywhere; exact_model_covariance gives the
infinite-snapshot covariance for noise-free checks.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .emvs_model import (
    SceneConfig,
    SnapshotMatrix,
    noise_variance,
    scene_manifold,
    spatial_response_matrix,
)
from .errors import ParameterError, ShapeError
from .geometry import SensorPositions, difference_coarray
from .tensor_core import DenseTensor, cp_tensor, group_modes, khatri_rao, mode_n_product, permute_modes

logger = logging.getLogger(__name__)

# [a_t, q_t, a_r, q_r, a_t*, q_t*, a_r*, q_r*] -> [a_t, a_t*, q_t, a_r, a_r*, q_r, q_t*, q_r*]
COVARIANCE_PERMUTATION = (0, 4, 1, 2, 6, 3, 5, 7)
COVARIANCE_GROUPS = ([0, 1], [2], [3, 4], [5], [6, 7])


@dataclass(frozen=True)
class BeamspaceMatrix:
    w: np.ndarray

    @property
    def size(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PipelineOutput:
    r5: DenseTensor
    m_tilde: int
    n_tilde: int


def snapshot_tensor(y: SnapshotMatrix, m: int = None, n: int = None) -> DenseTensor:
    m = y.m if m is None else m
    n = y.n if n is None else n
    data = np.asarray(y.y)
    if data.shape[0] != 36 * m * n:
        raise ShapeError("expected {} rows for M={}, N={}, got {}".format(36 * m * n, m, n, data.shape[0]))
    return DenseTensor(data.reshape(m, 6, n, 6, data.shape[1]))


def covariance_tensor(y5: DenseTensor) -> DenseTensor:
    """Sample average over snapshots of slice_l ∘ conj(slice_l)."""
    if y5.order != 5:
        raise ShapeError("snapshot tensor must be 5-way, got {}".format(y5.order))
    spatial = y5.shape[:4]
    snapshots = y5.shape[4]
    flat = y5.data.reshape(-1, snapshots)
    r = (flat @ flat.conj().T) / snapshots
    return DenseTensor(r.reshape(spatial + spatial))


def exact_model_covariance(cfg: SceneConfig) -> DenseTensor:
    """Σ_k σ²_k c_k c_kᴴ + σ²_n I, reshaped to 8 modes."""
    c = scene_manifold(cfg)
    r = (c * cfg.powers()[None, :]) @ c.conj().T
    sigma2 = noise_variance(cfg)
    if sigma2 > 0:
        r[np.diag_indices_from(r)] += sigma2
    m, n = cfg.transmit.size, cfg.receive.size
    return DenseTensor(r.reshape(m, 6, n, 6, m, 6, n, 6))


def rearrange_and_group(r: DenseTensor) -> DenseTensor:
    if r.order != 8:
        raise ShapeError("covariance tensor must be 8-way, got {}".format(r.order))
    m, six_t, n, six_r = r.shape[:4]
    if (six_t, six_r) != (6, 6) or r.shape[4:] != r.shape[:4]:
        raise ShapeError("covariance tensor shape {} is not (M,6,N,6,M,6,N,6)".format(r.shape))
    return group_modes(permute_modes(r, COVARIANCE_PERMUTATION), COVARIANCE_GROUPS)


def apply_coarray_selection(r2: DenseTensor, j1, j2) -> DenseTensor:
    if r2.order != 5:
        raise ShapeError("grouped covariance must be 5-way, got {}".format(r2.order))
    return mode_n_product(mode_n_product(r2, j1, 0), j2, 2)


def dft_beamspace(m_tilde: int) -> BeamspaceMatrix:
    """
    Rows are w_mᴴ with w_m[p] = exp(j2πpm/M~), p = -(M~-1)/2 ... (M~-1)/2.

    Applied to a contiguous steering vector the result is the real Dirichlet
    kernel sin(πM~x/2)/sin(πx/2) with x = sinθ - 2m/M~.
    """
    if m_tilde < 1 or m_tilde % 2 == 0:
        raise ParameterError("beamspace size must be a positive odd integer, got {}".format(m_tilde))
    half = (m_tilde - 1) // 2
    p = np.arange(-half, half + 1)
    m = np.arange(m_tilde)
    return BeamspaceMatrix(w=np.exp(-2j * np.pi * np.outer(m, p) / m_tilde))


def dirichlet_steering(m_tilde: int, theta) -> np.ndarray:
    """Closed form of W @ contiguous_steering, shape (M~,) or (M~, K)."""
    theta = np.asarray(theta, dtype=float)
    x = np.sin(theta)[..., None] - 2 * np.arange(m_tilde) / m_tilde
    num = np.sin(np.pi * m_tilde * x / 2)
    den = np.sin(np.pi * x / 2)
    small = np.abs(den) < 1e-12
    # limit of the kernel where sin(πx/2) vanishes (x an even integer)
    ratio = np.where(small, m_tilde * np.cos(np.pi * m_tilde * x / 2) / np.where(small, np.cos(np.pi * x / 2), 1.0),
                     num / np.where(small, 1.0, den))
    return ratio.T if ratio.ndim == 2 else ratio


def to_real_beamspace(r3: DenseTensor, w_t: BeamspaceMatrix, w_r: BeamspaceMatrix) -> DenseTensor:
    return mode_n_product(mode_n_product(r3, w_t.w, 0), w_r.w, 2)


def final_three_way(r4: DenseTensor) -> PipelineOutput:
    if r4.order != 5 or r4.shape[1] != 6 or r4.shape[3] != 6 or r4.shape[4] != 36:
        raise ShapeError("beamspace tensor shape {} is not (M~,6,N~,6,36)".format(r4.shape))
    r5 = group_modes(r4, [[0, 1], [2, 3], [4]])
    return PipelineOutput(r5=r5, m_tilde=r4.shape[0], n_tilde=r4.shape[2])


def process_covariance(r: DenseTensor, transmit: SensorPositions, receive: SensorPositions) -> PipelineOutput:
    """Algorithm steps from the 8-way covariance to the three-way tensor."""
    spec_t = difference_coarray(transmit)
    spec_r = difference_coarray(receive)
    r2 = rearrange_and_group(r)
    r3 = apply_coarray_selection(r2, spec_t.selection, spec_r.selection)
    r4 = to_real_beamspace(r3, dft_beamspace(spec_t.size), dft_beamspace(spec_r.size))
    out = final_three_way(r4)
    logger.debug("coarray tensor shape %s", out.r5.shape)
    return out


def run_pipeline(y: SnapshotMatrix, transmit: SensorPositions, receive: SensorPositions) -> PipelineOutput:
    if y.m != transmit.size or y.n != receive.size:
        raise ShapeError(
            "snapshot dims (M={}, N={}) do not match arrays ({}, {})".format(y.m, y.n, transmit.size, receive.size)
        )
    return process_covariance(covariance_tensor(snapshot_tensor(y)), transmit, receive)


def beamspace_factor(m_tilde: int, thetas, q: np.ndarray) -> np.ndarray:
    """ĉ columns â(θ_k) ⊗ q_k, shape (6M~, K)."""
    return khatri_rao(dirichlet_steering(m_tilde, thetas), q)


def closed_form_factors(cfg: SceneConfig):
    """Model factors (ĉ_t, ĉ_r, q̃) of the coarray tensor, with powers absorbed into q̃."""
    params = cfg.parameter_matrix()
    m_tilde = difference_coarray(cfg.transmit).size
    n_tilde = difference_coarray(cfg.receive).size
    q_t = spatial_response_matrix(params, "t")
    q_r = spatial_response_matrix(params, "r")
    c_t = beamspace_factor(m_tilde, params[0], q_t)
    c_r = beamspace_factor(n_tilde, params[4], q_r)
    q_kron = khatri_rao(q_t.conj(), q_r.conj()) * cfg.powers()[None, :]
    return c_t, c_r, q_kron


def closed_form_r5(cfg: SceneConfig) -> DenseTensor:
    """Noise-free Σ_k σ²_k ĉ_tk ∘ ĉ_rk ∘ q̃_k."""
    return cp_tensor(closed_form_factors(cfg))
