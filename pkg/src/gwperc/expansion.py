"""Quenched expansion martingales.

M_n^{(i)} combines subset statistics of one tree with the annealed
coefficients r_{j,d}; its limit M^{(i)} is the eps^i coefficient of the
tree's own survival probability g(T, p_c + eps).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .annealed import ExpansionCoefficients, composition_constants, expansion_coefficients
from .errors import CapError
from .offspring import OffspringDistribution, critical_parameter
from .subsetstats import SubsetStatTable, expected_first_level, predictable_increment

DEFAULT_MAX_ORDER = 6
DEFAULT_DELTA = 0.25


def _martingale_row(X, coeffs, order, pc, mu):
    """M^{(i)} for i = 1..order from one table X[j, k]; index 0 unused."""
    out = np.zeros(order + 1)
    P = coeffs.powers
    for i in range(1, order + 1):
        s = 0.0
        for j in range(1, i + 1):
            sign = 1.0 if j % 2 else -1.0
            for d in range(j, i + 1):
                s += sign * pc**d * P[j, d] * X[j, i - d]
        out[i] = mu**i * s
    return out


@dataclass(frozen=True)
class ExpansionMartingale:
    """``M[n, i]`` for 0 <= n <= n_max and 1 <= i <= order (column 0 unused)."""

    M: np.ndarray
    order: int
    coeffs: ExpansionCoefficients
    stats: SubsetStatTable | None = None

    @property
    def n_max(self) -> int:
        return self.M.shape[0] - 1

    def window_depth(self, eps: float, delta: float = DEFAULT_DELTA) -> int:
        """n(eps) = ceil(eps^-delta), the depth used by the windowed prediction."""
        return math.ceil(eps ** (-delta))


def expansion_martingale(stats: SubsetStatTable, coeffs: ExpansionCoefficients, order: int,
                         dist: OffspringDistribution | None = None) -> ExpansionMartingale:
    """Assemble M_n^{(i)} for every n in the table."""
    if stats.J < order or stats.Kc < order - 1:
        raise CapError(f"order {order} needs J >= {order} and Kc >= {order - 1}; "
                       f"table has J={stats.J}, Kc={stats.Kc}")
    if coeffs.k < order:
        raise CapError(f"order {order} needs expansion coefficients to order {order}, have {coeffs.k}")
    if order > DEFAULT_MAX_ORDER:
        warnings.warn(f"order {order} exceeds {DEFAULT_MAX_ORDER}; coefficients grow fast and need moments of "
                      f"order {order + 1}", RuntimeWarning, stacklevel=2)
    dist = dist if dist is not None else stats.tree.offspring
    pc = critical_parameter(dist)
    M = np.array([_martingale_row(X, coeffs, order, pc, dist.mean) for X in stats.X])
    return ExpansionMartingale(M, order, coeffs, stats)


def mean_first_level_martingale(dist: OffspringDistribution, order: int) -> np.ndarray:
    """E M_1^{(i)} from the closed-form first-level means of X; equals r_i."""
    coeffs = expansion_coefficients(dist, order)
    X = expected_first_level(dist, order, order - 1)
    return _martingale_row(X, coeffs, order, critical_parameter(dist), dist.mean)


def predictable_part(stats: SubsetStatTable, coeffs: ExpansionCoefficients, order: int,
                     dist: OffspringDistribution) -> np.ndarray:
    """Non-martingale part of M_{n+1}^{(i)} - M_n^{(i)} for each n < n_max.

    It is the same linear form as M applied to deltaA_{n+1}; it vanishes
    identically, which is what makes M a martingale.
    """
    if stats.J < order or stats.Kc < order - 1:
        raise CapError(f"order {order} needs J >= {order} and Kc >= {order - 1}")
    c = composition_constants(dist, stats.J).c
    pc = critical_parameter(dist)
    rows = [_martingale_row(predictable_increment(X, c), coeffs, order, pc, dist.mean) for X in stats.X[:-1]]
    return np.array(rows).reshape(-1, order + 1)


def verify_constants_identity(dist: OffspringDistribution, i: int) -> float:
    """max over 1 <= a, b <= i of |LHS - RHS| in the identity
    sum_{d,j} (-1)^(j-1) p_c^d r_{j,d} c_{j,a} binom(j, b-d) = (-1)^(a+1) p_c^b r_{a,b}."""
    coeffs = expansion_coefficients(dist, i)
    c = composition_constants(dist, i).c
    P = coeffs.powers
    pc = critical_parameter(dist)
    worst = 0.0
    for a in range(1, i + 1):
        for b in range(1, i + 1):
            lhs = 0.0
            for d in range(1, i + 1):
                for j in range(1, i + 1):
                    if b - d < 0:
                        continue
                    lhs += (-1.0) ** (j - 1) * pc**d * P[j, d] * c[j, a] * math.comb(j, b - d)
            rhs = (-1.0) ** (a + 1) * pc**b * P[a, b]
            worst = max(worst, abs(lhs - rhs))
    return worst


def predict_quenched_survival(mart: ExpansionMartingale, eps: float, order: int | None = None,
                              window: bool = False, delta: float = DEFAULT_DELTA) -> float:
    """sum_i M^{(i)} eps^i using M at the deepest level (or at n(eps) when ``window``)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return 0.0
    order = mart.order if order is None else order
    n = mart.n_max
    if window:
        n = mart.window_depth(eps, delta)
        if n > mart.n_max:
            raise CapError(f"window depth {n} exceeds the computed depth {mart.n_max}")
    return float(sum(mart.M[n, i] * eps**i for i in range(1, order + 1)))
