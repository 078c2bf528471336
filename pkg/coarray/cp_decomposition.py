"""
Trilinear alternating least squares (TALS) for the three-way coarray tensor,
plus the identifiability limits on the number of targets.

Each sweep solves the three least-squares problems

    A = X_(0) pinv(B ⊙ C)ᵀ,  B = X_(1) pinv(A ⊙ C)ᵀ,  C = X_(2) pinv(A ⊙ B)ᵀ

through the Gram form pinv(K)ᵀ = conj(K) (Kᵀ conj(K))⁻¹, where the Gram
matrix is a Hadamard product of per-factor Gram matrices. A Gram matrix
past GRAM_COND_LIMIT is pseudo-inverted instead of solved.

Starting points:
    random  complex Gaussian factors
    svd     leading left singular vectors of each unfolding, jittered on
            every restart after the first
    gevd    direct fit from a generalized eigenvalue problem on two random
            mode-2 combinations of the tensor compressed to K×K×L; exact for
            noise-free data when the first two factors have full column rank
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import pinv
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, DegenerateIterationError, IdentifiabilityError, ParameterError, ShapeError
from .tensor_core import DenseTensor, cp_tensor, khatri_rao, mode_n_product, unfold

logger = logging.getLogger(__name__)

GRAM_COND_LIMIT = 1e13
SVD_JITTER = 0.1
INIT_METHODS = ("random", "svd", "gevd")


@dataclass(frozen=True)
class TalsConfig:
    k: int
    max_iter: int = 500
    tol: float = 1e-8
    restarts: int = 5
    rng_seed: int = 0
    init: str = "random"
    fit_floor: float = 1e-10

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError("target count k must be a positive integer, got {}".format(self.k))
        if not self.tol > 0:
            raise ParameterError("tol must be positive, got {}".format(self.tol))
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1, got {}".format(self.restarts))
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1, got {}".format(self.max_iter))
        if self.init not in INIT_METHODS:
            raise ParameterError("init must be one of {}, got {!r}".format(INIT_METHODS, self.init))


@dataclass(frozen=True)
class FactorSet:
    """Column k of c_t, c_r and q_kron belong to the same target."""
    c_t: np.ndarray
    c_r: np.ndarray
    q_kron: np.ndarray
    fit: float = 0.0
    iterations: int = 0
    converged: bool = True
    history: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.c_t.shape[1]

    def factors(self) -> tuple:
        return self.c_t, self.c_r, self.q_kron

    def permuted(self, perm) -> "FactorSet":
        perm = list(perm)
        return FactorSet(
            c_t=self.c_t[:, perm], c_r=self.c_r[:, perm], q_kron=self.q_kron[:, perm],
            fit=self.fit, iterations=self.iterations, converged=self.converged, history=self.history,
        )


class TargetLimits(NamedTuple):
    k_kruskal: int
    k_rotation: tuple
    k_max: int


def kruskal_max_targets(m_tilde: int, n_tilde: int) -> TargetLimits:
    """
    k_kruskal assumes the maximal κ-ranks 6M~, 6N~ and 36; it overstates
    uniqueness once K > 36. k_rotation holds the transmit and receive
    rotation-invariance limits; k_max is the binding one.
    """
    if m_tilde < 2 or n_tilde < 2:
        raise ParameterError("contiguous coarray sizes must be >= 2, got ({}, {})".format(m_tilde, n_tilde))
    k_kruskal = (6 * m_tilde + 6 * n_tilde + 34) // 2
    k_rotation = (6 * (m_tilde - 1), 6 * (n_tilde - 1))
    return TargetLimits(k_kruskal=k_kruskal, k_rotation=k_rotation, k_max=min(k_rotation))


def check_identifiable(shape, k: int) -> None:
    i, j, l = shape
    if i % 6 == 0 and j % 6 == 0 and l == 36:
        limits = kruskal_max_targets(i // 6, j // 6)
        if k > limits.k_max:
            raise IdentifiabilityError(
                "K={} exceeds the identifiable maximum {} for M~={}, N~={}".format(k, limits.k_max, i // 6, j // 6)
            )
        return
    if min(i, k) + min(j, k) + min(l, k) < 2 * k + 2:
        raise IdentifiabilityError("K={} violates the Kruskal condition for a {} tensor".format(k, shape))


# --- Model helpers ---

def reconstruct(factors: FactorSet) -> DenseTensor:
    return cp_tensor(factors.factors())


def relative_fit(x: DenseTensor, factors) -> float:
    a, b, c = factors.factors() if isinstance(factors, FactorSet) else factors
    resid = unfold(x, 2) - c @ khatri_rao(a, b).T
    return float(np.linalg.norm(resid) / np.linalg.norm(x.data))


def _ls_update(x_unf: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    kr = khatri_rao(first, second)
    gram = (first.T @ first.conj()) * (second.T @ second.conj())
    if not np.all(np.isfinite(gram)):
        raise DegenerateIterationError("non-finite Gram matrix in the least-squares update")
    rhs = x_unf @ kr.conj()
    if np.linalg.cond(gram) > GRAM_COND_LIMIT:
        logger.debug("Khatri-Rao product is numerically rank deficient, using the pseudo-inverse")
        return rhs @ pinv(gram)
    return np.linalg.solve(gram.T, rhs.T).T


def _crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _gevd_factors(x: DenseTensor, k: int, rng: np.random.Generator) -> list:
    u_a = np.linalg.svd(unfold(x, 0), full_matrices=False)[0][:, :k]
    u_b = np.linalg.svd(unfold(x, 1), full_matrices=False)[0][:, :k]
    # core[:, :, l] = Ã diag(C[l]) B̃ᵀ with Ã = U_aᴴ A, B̃ = U_bᴴ B
    core = mode_n_product(mode_n_product(x, u_a.conj().T, 0), u_b.conj().T, 1).data
    w = _crandn(rng, x.shape[2], 2)
    s1, s2 = core @ w[:, 0], core @ w[:, 1]
    try:
        pencil = np.linalg.solve(s2.T, s1.T).T
        _, a_core = np.linalg.eig(pencil)
        t = np.linalg.solve(a_core, core.reshape(k, -1)).reshape(core.shape)
    except np.linalg.LinAlgError as e:
        raise DegenerateIterationError("singular slice pencil in the GEVD start: {}".format(e))

    # t[r] = b̃_r c_rᵀ up to noise
    b_core = np.empty((k, k), dtype=complex)
    c = np.empty((x.shape[2], k), dtype=complex)
    for r in range(k):
        u, s, vh = np.linalg.svd(t[r], full_matrices=False)
        b_core[:, r] = u[:, 0] * s[0]
        c[:, r] = vh[0]
    return [u_a @ a_core, u_b @ b_core, c]


def initial_factors(x: DenseTensor, k: int, init: str, rng: np.random.Generator, jitter: float = 0.0) -> list:
    """
    Starting (A, B, C) for one TALS run.

    `jitter` scales a random perturbation added to the SVD start so that
    restarts from the same tensor differ. The GEVD start draws its slice
    weights from `rng` and falls back to random factors when K exceeds
    either of the first two dimensions.
    """
    if init == "gevd":
        if k <= min(x.shape[0], x.shape[1]):
            return _gevd_factors(x, k, rng)
        logger.debug("GEVD start needs K <= %d, using random factors", min(x.shape[0], x.shape[1]))
    factors = []
    for mode, dim in enumerate(x.shape):
        rand = _crandn(rng, dim, k)
        if init == "svd":
            u, _, _ = np.linalg.svd(unfold(x, mode), full_matrices=False)
            width = min(k, u.shape[1])
            rand[:, :width] = u[:, :width] + jitter * rand[:, :width] / np.sqrt(dim)
        factors.append(rand)
    return factors


def _normalize_columns(a, b, c):
    """Equal column norms across factors; phases pushed into the third factor."""
    a, b, c = a.copy(), b.copy(), c.copy()
    for r in range(a.shape[1]):
        na, nb, nc = (np.linalg.norm(f[:, r]) for f in (a, b, c))
        if na == 0 or nb == 0 or nc == 0:
            continue
        ph_a = np.exp(1j * np.angle(a[np.argmax(np.abs(a[:, r])), r]))
        ph_b = np.exp(1j * np.angle(b[np.argmax(np.abs(b[:, r])), r]))
        s = (na * nb * nc) ** (1.0 / 3.0)
        a[:, r] *= s / (na * ph_a)
        b[:, r] *= s / (nb * ph_b)
        c[:, r] *= na * ph_a * nb * ph_b / s ** 2
    return a, b, c


def _single_run(x: DenseTensor, cfg: TalsConfig, rng: np.random.Generator, jitter: float = 0.0) -> FactorSet:
    x0, x1, x2 = unfold(x, 0), unfold(x, 1), unfold(x, 2)
    x_norm = np.linalg.norm(x.data)
    if x_norm == 0:
        raise DegenerateIterationError("cannot decompose an all-zero tensor")
    a, b, c = initial_factors(x, cfg.k, cfg.init, rng, jitter)

    history = []
    converged = False
    for it in range(1, cfg.max_iter + 1):
        a = _ls_update(x0, b, c)
        b = _ls_update(x1, a, c)
        c = _ls_update(x2, a, b)
        fit = float(np.linalg.norm(x2 - c @ khatri_rao(a, b).T) / x_norm)
        history.append(fit)
        logger.debug("TALS iteration %d: relative fit %.3e", it, fit)
        if fit < cfg.fit_floor:
            converged = True
            break
        if len(history) > 1 and abs(history[-2] - fit) <= cfg.tol * history[-2]:
            converged = True
            break

    a, b, c = _normalize_columns(a, b, c)
    return FactorSet(
        c_t=a, c_r=b, q_kron=c, fit=history[-1], iterations=len(history),
        converged=converged, history=tuple(history),
    )


def tals(r5: DenseTensor, cfg: TalsConfig) -> FactorSet:
    """Best of `cfg.restarts` TALS runs by final relative fit."""
    if r5.order != 3:
        raise ShapeError("TALS needs a three-way tensor, got order {}".format(r5.order))
    check_identifiable(r5.shape, cfg.k)

    best = None
    failures = []
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.rng_seed, restart])
        try:
            run = _single_run(r5, cfg, rng, SVD_JITTER if restart else 0.0)
        except DegenerateIterationError as e:
            logger.warning("TALS restart %d degenerated: %s", restart, e)
            failures.append(str(e))
            continue
        logger.debug("TALS restart %d: fit %.3e after %d iterations", restart, run.fit, run.iterations)
        if best is None or run.fit < best.fit:
            best = run
        if run.fit < cfg.fit_floor:
            break

    if best is None:
        raise ConvergenceError("all {} TALS restarts degenerated: {}".format(cfg.restarts, failures[-1]))
    if not best.converged:
        logger.warning("TALS stopped at max_iter=%d with fit %.3e", cfg.max_iter, best.fit)
    return best


# --- Evaluation support ---

def congruence_matrix(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """|<e_i, t_j>| / (|e_i| |t_j|) for every column pair."""
    en = est / np.linalg.norm(est, axis=0, keepdims=True)
    tn = truth / np.linalg.norm(truth, axis=0, keepdims=True)
    return np.abs(en.conj().T @ tn)


def match_factors(est: FactorSet, truth: FactorSet):
    """
    Optimal column assignment of `est` to `truth`.

    Returns (perm, congruences): est column perm[j] matches truth column j,
    and congruences[f, j] is the normalized correlation for factor f.
    """
    if est.k != truth.k:
        raise ParameterError("factor sets have different K ({} vs {})".format(est.k, truth.k))
    per_factor = [congruence_matrix(e, t) for e, t in zip(est.factors(), truth.factors())]
    score = sum(per_factor)
    rows, cols = linear_sum_assignment(score, maximize=True)
    perm = np.empty(truth.k, dtype=int)
    perm[cols] = rows
    congruences = np.stack([np.clip(m[perm, np.arange(truth.k)], 0.0, 1.0) for m in per_factor])
    return perm, congruences
