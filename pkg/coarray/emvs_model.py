"""
Electromagnetic vector sensor responses and the post-matched-filter scene
simulator.

A six-component EMVS (three dipoles, three loops) sees a target at elevation
theta, azimuth phi with polarization (gamma, eta) as q = F(theta, phi) g(gamma, eta).
The bistatic snapshot model stacks (a_t ⊗ q_t) ⊗ (a_r ⊗ q_r) per target.
"""
import logging
from dataclasses import dataclass, field, fields
from typing import List

import numpy as np

from .errors import AzimuthUndefinedError, DegenerateResponseError, ParameterError
from .geometry import SensorPositions
from .tensor_core import khatri_rao

logger = logging.getLogger(__name__)

ANGLE_FIELDS = ("theta_t", "phi_t", "gamma_t", "eta_t", "theta_r", "phi_r", "gamma_r", "eta_r")
AZIMUTH_TOL = 1e-12


@dataclass(frozen=True)
class TargetParams:
    """One target; all angles in radians, power linear."""
    theta_t: float
    phi_t: float
    gamma_t: float
    eta_t: float
    theta_r: float
    phi_r: float
    gamma_r: float
    eta_r: float
    power: float = 1.0

    def __post_init__(self):
        for name in ANGLE_FIELDS:
            val = getattr(self, name)
            if not np.isfinite(val) or not 0.0 <= val < np.pi / 2:
                raise ParameterError("{} = {} rad lies outside [0, pi/2)".format(name, val))
        if not self.power > 0:
            raise ParameterError("target power must be positive, got {}".format(self.power))

    def angles(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ANGLE_FIELDS])

    @classmethod
    def from_degrees(cls, values, power=1.0):
        vals = np.deg2rad(np.asarray(values, dtype=float))
        return cls(*vals.tolist(), power=power)


@dataclass(frozen=True)
class SpatialResponse:
    q: np.ndarray
    f: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class SceneConfig:
    transmit: SensorPositions
    receive: SensorPositions
    targets: List[TargetParams]
    snapshots: int = 200
    snr_db: float = 10.0
    rng_seed: int = 0
    noiseless: bool = field(default=False)

    def __post_init__(self):
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise ParameterError("snapshot count must be a positive integer, got {}".format(self.snapshots))
        if len(self.targets) < 1:
            raise ParameterError("a scene needs at least one target")
        if not np.isfinite(self.snr_db):
            raise ParameterError("SNR must be finite, got {}".format(self.snr_db))

    @property
    def k(self) -> int:
        return len(self.targets)

    @property
    def channels(self) -> int:
        return 36 * self.transmit.size * self.receive.size

    def parameter_matrix(self) -> np.ndarray:
        """(8, K) array of true angles, rows in ANGLE_FIELDS order."""
        return np.stack([t.angles() for t in self.targets], axis=1)

    def powers(self) -> np.ndarray:
        return np.array([t.power for t in self.targets])

    def replace(self, **changes) -> "SceneConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SceneConfig(**values)


@dataclass(frozen=True)
class SnapshotMatrix:
    y: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        if self.y.ndim != 2 or self.y.shape[0] != 36 * self.m * self.n:
            raise ParameterError(
                "snapshot matrix must have 36·M·N = {} rows, got shape {}".format(36 * self.m * self.n, self.y.shape)
            )

    @property
    def snapshots(self) -> int:
        return self.y.shape[1]


# --- Spatial response ---

def angular_matrix(theta, phi) -> np.ndarray:
    """F(theta, phi), the 6 × 2 spatial angular location matrix."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return np.array([
        [cp * ct, -sp],
        [sp * ct, cp],
        [-st, 0.0],
        [-sp, -cp * ct],
        [cp, -sp * ct],
        [0.0, st],
    ], dtype=complex)


def polarization_vector(gamma, eta) -> np.ndarray:
    return np.array([np.sin(gamma) * np.exp(1j * eta), np.cos(gamma)])


def spatial_response(theta, phi, gamma, eta) -> SpatialResponse:
    f = angular_matrix(theta, phi)
    g = polarization_vector(gamma, eta)
    return SpatialResponse(q=f @ g, f=f, g=g)


def poynting_vector(q) -> np.ndarray:
    """Normalized (e/|e|) × (h*/|h|); real for a single plane wave."""
    q = np.asarray(q, dtype=complex).ravel()
    if q.size != 6:
        raise ParameterError("an EMVS response has 6 entries, got {}".format(q.size))
    e, h = q[:3], q[3:]
    e_norm, h_norm = np.linalg.norm(e), np.linalg.norm(h)
    if e_norm == 0 or h_norm == 0:
        raise DegenerateResponseError("electric or magnetic half of the response is zero")
    return np.cross(e / e_norm, h.conj() / h_norm)


def poynting_angles(q):
    """
    Elevation and azimuth from the normalized Poynting vector.

    Raises AzimuthUndefinedError at boresight, where u and v both vanish.
    The error carries the elevation as `theta`.
    """
    u, v, w = poynting_vector(q).real
    theta = float(np.arccos(np.clip(w, -1.0, 1.0)))
    if abs(u) < AZIMUTH_TOL and abs(v) < AZIMUTH_TOL:
        err = AzimuthUndefinedError("azimuth undefined at elevation {:.3g} rad".format(theta))
        err.theta = theta
        raise err
    phi = float(np.arctan2(v, u))
    return theta, phi


# --- Array manifolds ---

def steering_vector(arr: SensorPositions, theta) -> np.ndarray:
    """Entry p is exp(-jπ·p·sinθ) for integer half-wavelength position p."""
    if not np.all(np.isfinite(theta)):
        raise ParameterError("steering angle must be finite, got {}".format(theta))
    return np.exp(-1j * np.pi * arr.as_array() * np.sin(theta))


def steering_matrix(arr: SensorPositions, thetas) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    return np.exp(-1j * np.pi * np.outer(arr.as_array(), np.sin(thetas)))


def spatial_response_matrix(params: np.ndarray, side: str = "t") -> np.ndarray:
    """6 × K matrix of q vectors from an (8, K) parameter matrix."""
    offset = 0 if side == "t" else 4
    theta, phi, gamma, eta = params[offset:offset + 4]
    return np.stack(
        [spatial_response(*vals).q for vals in zip(theta, phi, gamma, eta)], axis=1
    )


def side_manifold(arr: SensorPositions, params: np.ndarray, side: str = "t") -> np.ndarray:
    """C_t = A_t ⊙ Q_t (or C_r), shape (6·|S|, K)."""
    offset = 0 if side == "t" else 4
    return khatri_rao(steering_matrix(arr, params[offset]), spatial_response_matrix(params, side))


def joint_manifold(transmit: SensorPositions, receive: SensorPositions, params: np.ndarray) -> np.ndarray:
    """C_tr = C_t ⊙ C_r, shape (36MN, K)."""
    return khatri_rao(side_manifold(transmit, params, "t"), side_manifold(receive, params, "r"))


def scene_manifold(cfg: SceneConfig) -> np.ndarray:
    return joint_manifold(cfg.transmit, cfg.receive, cfg.parameter_matrix())


# --- Simulation ---

def noise_variance(cfg: SceneConfig) -> float:
    """Per-channel noise variance; signal power is averaged over all channels."""
    if cfg.noiseless:
        return 0.0
    c = scene_manifold(cfg)
    signal_power = float(np.sum(np.abs(c) ** 2 @ cfg.powers())) / cfg.channels
    return signal_power / 10.0 ** (cfg.snr_db / 10.0)


def source_signals(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Constant-modulus random-phase sources, rows sqrt(power)·exp(jψ)."""
    psi = rng.uniform(0.0, 2 * np.pi, size=(cfg.k, cfg.snapshots))
    return np.sqrt(cfg.powers())[:, None] * np.exp(1j * psi)


def generate_snapshots(cfg: SceneConfig) -> SnapshotMatrix:
    rng = np.random.default_rng(cfg.rng_seed)
    c = scene_manifold(cfg)
    s = source_signals(cfg, rng)
    y = c @ s
    sigma2 = noise_variance(cfg)
    if sigma2 > 0:
        shape = y.shape
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        y = y + np.sqrt(sigma2 / 2.0) * noise
    logger.debug(
        "simulated %d x %d snapshots, K=%d, noise variance %.3g", y.shape[0], y.shape[1], cfg.k, sigma2
    )
    return SnapshotMatrix(y=y, m=cfg.transmit.size, n=cfg.receive.size)
