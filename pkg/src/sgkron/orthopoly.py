"""Univariate orthonormal polynomial families.

Two families cover both diffusion models: Legendre polynomials,
orthonormal for the uniform density 1/2 on [-1, 1], and probabilists'
Hermite polynomials, orthonormal for the standard Gaussian on the real
line.  Both measures are symmetric, so the three-term recurrence

    y * P_{j-1}(y) = c_j * P_j(y) + c_{j-1} * P_{j-2}(y)

has no offset terms, which is what makes the parametric Gram matrices
sparse.  P_0 is identically 1 for both families (unit-mass densities).
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np


class PolyFamily(Enum):
    LEGENDRE_UNIFORM = "legendre_uniform"
    HERMITE_GAUSSIAN = "hermite_gaussian"


LEGENDRE = PolyFamily.LEGENDRE_UNIFORM
HERMITE = PolyFamily.HERMITE_GAUSSIAN


def recurrence_c(family: PolyFamily, j: int) -> float:
    """Recurrence coefficient c_j, j >= 1.

    Closed forms: Legendre c_j = j / sqrt(4 j^2 - 1), Hermite c_j = sqrt(j).
    Both are validated against quadrature oracles in the test suite rather
    than trusted.
    """
    if j < 1:
        raise ValueError("c_0 is an internal normalization; j must be >= 1")
    if family is PolyFamily.LEGENDRE_UNIFORM:
        return j / math.sqrt(4.0 * j * j - 1.0)
    if family is PolyFamily.HERMITE_GAUSSIAN:
        return math.sqrt(float(j))
    raise ValueError(f"unknown family {family!r}")


def evaluate(family: PolyFamily, j: int, y):
    """Evaluate the orthonormal P_j at y (scalar or array) by forward recurrence."""
    if j < 0:
        raise ValueError("degree must be >= 0")
    y_arr = np.asarray(y, dtype=float)
    p_prev = np.zeros_like(y_arr)
    p = np.ones_like(y_arr)
    c_prev = 0.0
    for i in range(1, j + 1):
        c = recurrence_c(family, i)
        p, p_prev = (y_arr * p - c_prev * p_prev) / c, p
        c_prev = c
    if np.isscalar(y) or y_arr.ndim == 0:
        return float(p)
    return p


def hermite_triple(i: int, j: int, l: int) -> float:
    """Triple product <P_i P_j, P_l> for the orthonormal Hermite family.

    Zero when i+j+l is odd or any triangle inequality fails; otherwise

        sqrt(i! j! l!) / ((s-i)! (s-j)! (s-l)!),   s = (i+j+l)/2,

    evaluated with log-factorials so large degrees cannot overflow.
    """
    if min(i, j, l) < 0:
        raise ValueError("degrees must be nonnegative")
    total = i + j + l
    if total % 2 == 1:
        return 0.0
    s = total // 2
    if s < i or s < j or s < l:
        return 0.0
    lg = math.lgamma
    log_val = (
        0.5 * (lg(i + 1) + lg(j + 1) + lg(l + 1))
        - lg(s - i + 1)
        - lg(s - j + 1)
        - lg(s - l + 1)
    )
    return math.exp(log_val)
