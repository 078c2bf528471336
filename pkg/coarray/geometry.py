"""
Coprime linear arrays and their difference coarrays.

Positions are integer indices on a half-wavelength grid. The coarray helpers
return the lag set, the weight function, the central contiguous segment
[-h, h] and the selection matrix J that averages duplicated lags of a
vectorized a ⊗ a* product down to one entry per contiguous lag.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from math import gcd
from typing import NamedTuple

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)

ROLES = ("transmit", "receive")


@dataclass(frozen=True)
class SensorPositions:
    """Sorted, distinct element positions of a coprime array."""
    positions: tuple
    m1: int
    m2: int
    role: str = "transmit"

    @property
    def size(self) -> int:
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)


@dataclass(frozen=True)
class CoarraySpec:
    diff_set: tuple
    weights: dict
    h: int
    selection: np.ndarray = field(repr=False, compare=False)

    @property
    def central_ula(self) -> tuple:
        return tuple(range(-self.h, self.h + 1))

    @property
    def size(self) -> int:
        """|U|, the number of contiguous virtual elements."""
        return 2 * self.h + 1


class Aperture(NamedTuple):
    num_physical: int
    num_contiguous: int
    num_unique_lags: int


def build_coprime_array(m1: int, m2: int, role: str = "transmit") -> SensorPositions:
    """
    Union of {m1·k : 0 <= k < m2} and {m2·k : 0 <= k < 2·m1}.

    (3, 4) gives the 9-element transmit array and (3, 5) the 10-element
    receive array of the reference scene.
    """
    if role not in ROLES:
        raise ParameterError("role must be one of {}, got {!r}".format(ROLES, role))
    if int(m1) != m1 or int(m2) != m2:
        raise ParameterError("coprime pair must be integers, got ({}, {})".format(m1, m2))
    m1, m2 = int(m1), int(m2)
    if m1 < 1 or m2 < 2:
        raise ParameterError("need m1 >= 1 and m2 >= 2, got ({}, {})".format(m1, m2))
    if m1 >= m2:
        raise ParameterError("need m1 < m2, got ({}, {})".format(m1, m2))
    if gcd(m1, m2) != 1:
        raise ParameterError("({}, {}) is not a coprime pair".format(m1, m2))

    first = {m1 * k for k in range(m2)}
    second = {m2 * k for k in range(2 * m1)}
    positions = tuple(sorted(first | second))
    logger.debug("%s coprime array (%d, %d): %d elements", role, m1, m2, len(positions))
    return SensorPositions(positions=positions, m1=m1, m2=m2, role=role)


def contiguous_size_closed_form(m1: int, m2: int) -> int:
    """
    |U| = 2·m1·m2 + 2·m1 - 1.

    Lags ±(m1·m2 + m1) are always holes, so the segment is
    [-(m1·m2 + m1 - 1), m1·m2 + m1 - 1]: (3, 4) gives 29 and (3, 5) gives 35.
    """
    return 2 * m1 * m2 + 2 * m1 - 1


def _lag_grid(arr: SensorPositions) -> np.ndarray:
    # lag of the pair (direct p, conjugated q) is pos[q] - pos[p]; flattened
    # row-major, so index p * |S| + q matches numpy.kron(a, a.conj())
    pos = np.asarray(arr.positions, dtype=int)
    return (pos[None, :] - pos[:, None]).ravel()


def _central_half_width(lags: set) -> int:
    h = 0
    while (h + 1) in lags and -(h + 1) in lags:
        h += 1
    return h


def build_selection_matrix(arr: SensorPositions, weights: dict = None, h: int = None) -> np.ndarray:
    """
    Selection matrix J of shape (|U|, |S|²).

    Row i belongs to lag u_i = -h + i. It holds 1/w(u_i) at every vectorized
    pair index whose lag is u_i, so J @ kron(a, a.conj()) is the contiguous
    virtual-array steering vector. Lags outside [-h, h] are dropped.
    """
    lags = _lag_grid(arr)
    if weights is None:
        weights = dict(Counter(lags.tolist()))
    if h is None:
        h = _central_half_width(set(weights))

    size = arr.size
    J = np.zeros((2 * h + 1, size * size))
    for i, u in enumerate(range(-h, h + 1)):
        cols = np.flatnonzero(lags == u)
        J[i, cols] = 1.0 / weights[u]
    return J


def difference_coarray(arr: SensorPositions) -> CoarraySpec:
    if arr.size == 0:
        raise ParameterError("cannot build the coarray of an empty array")

    lags = _lag_grid(arr)
    weights = dict(sorted(Counter(lags.tolist()).items()))
    diff_set = tuple(weights)
    h = _central_half_width(set(diff_set))
    selection = build_selection_matrix(arr, weights=weights, h=h)
    logger.debug(
        "%s coarray: %d unique lags, contiguous [-%d, %d]",
        arr.role, len(diff_set), h, h,
    )
    return CoarraySpec(diff_set=diff_set, weights=weights, h=h, selection=selection)


def coarray_aperture(arr: SensorPositions) -> Aperture:
    spec = difference_coarray(arr)
    return Aperture(
        num_physical=arr.size,
        num_contiguous=spec.size,
        num_unique_lags=len(spec.diff_set),
    )


def contiguous_steering(h: int, theta) -> np.ndarray:
    """
    Virtual ULA steering vector [e^{-jπh sinθ}, ..., e^{jπh sinθ}].

    `theta` may be a scalar (returns a vector) or a 1-D array (returns a
    (2h+1, K) matrix).
    """
    u = np.arange(-h, h + 1)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        return np.exp(1j * np.pi * u * np.sin(theta))
    return np.exp(1j * np.pi * np.outer(u, np.sin(theta)))
