"""Annealed survival probability g(p) and its near-critical constants.

g(p) is the probability that the root of a Galton-Watson tree has an
infinite open cluster under Bernoulli(p) bond percolation. Writing
``p = p_c + eps``, g admits a Taylor expansion ``sum_j r_j eps^j`` whose
coefficients come from a recursion over integer compositions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, MomentUnavailableError, SubcriticalError
from .offspring import (
    OffspringDistribution,
    critical_parameter,
    factorial_moment,
    one_minus_pgf,
    pgf,
)

# below this distance from p_c the solver is replaced by the series
NEAR_CRITICAL = 1e-8
BISECT_WIDTH = 1e-3
MAX_ITER = 200


# ---------------------------------------------------------------------------
# compositions


@lru_cache(maxsize=None)
def compositions(weight: int, parts: int) -> tuple:
    """Strict compositions of ``weight`` into ``parts`` positive integers, lexicographic."""
    if parts == 0:
        return ((),) if weight == 0 else ()
    if weight < parts:
        return ()
    out = []
    for first in range(1, weight - parts + 2):
        for rest in compositions(weight - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def compositions_up_to(weight: int):
    """All compositions of weight <= ``weight``, the empty one included."""
    for w in range(weight + 1):
        for parts in range(w + 1) if w else (0,):
            yield from compositions(w, parts)


# ---------------------------------------------------------------------------
# survival fixed point


def _residual(dist, p, s):
    return s - one_minus_pgf(dist, p * s)


def annealed_survival(dist: OffspringDistribution, p: float, tol: float = 1e-14) -> float:
    """Root of ``s = 1 - phi(1 - p s)`` in (0, 1]; 0 at or below p_c."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    pc = critical_parameter(dist)
    if p <= pc:
        return 0.0
    if p - pc < NEAR_CRITICAL:
        return _series_value(dist, p - pc)
    lo, hi = 0.5, 1.0
    it = 0
    while _residual(dist, p, lo) >= 0:
        hi, lo = lo, lo / 2
        it += 1
        if it > 1000:
            raise ConvergenceError("could not bracket the survival probability", _residual(dist, p, lo))
    if _residual(dist, p, hi) < 0:  # p == 1 with p_0 == 0 makes s = 1 exact
        return 1.0
    while hi - lo > BISECT_WIDTH * max(lo, 1e-300) and hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _residual(dist, p, mid) < 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        f = _residual(dist, p, s)
        df = 1.0 - p * pgf(dist, 1, 1.0 - p * s)
        step = f / df
        s_new = min(max(s - step, lo), hi)
        if abs(s_new - s) <= tol * 1e-2 * max(1.0, s) or f == 0.0:
            s = s_new
            break
        s = s_new
    res = _residual(dist, p, s)
    if abs(res) > max(tol, 4 * np.finfo(float).eps * s):
        raise ConvergenceError(f"Newton polish stalled at s={s}", res)
    return s


def _series_value(dist, eps):
    k = max(1, min(4, dist.max_exact_moment - 1))
    coef = expansion_coefficients(dist, k)
    return float(sum(r * eps ** (j + 1) for j, r in enumerate(coef.r)))


def critical_slope(dist: OffspringDistribution) -> float:
    """K = 2 / (p_c^3 phi''(1)), the derivative of g at p_c from above."""
    second = pgf(dist, 2, 1.0)
    if second <= 0.0:
        raise SubcriticalError("phi''(1) = 0: degenerate offspring law")
    return 2.0 / (critical_parameter(dist) ** 3 * second)


# ---------------------------------------------------------------------------
# expansion coefficients


@dataclass(frozen=True)
class ExpansionCoefficients:
    """g(p_c + eps) = sum_j r_j eps^j + O(eps^(k+1)) and its powers.

    ``r[j-1]`` is r_j. ``powers[m, j]`` is r_{m,j}, the eps^j coefficient of
    g(p_c + eps)^m; row and column 0 are unused zeros.
    """

    r: tuple
    powers: np.ndarray
    k: int

    def coefficient(self, j: int) -> float:
        return self.r[j - 1]

    def power(self, m: int, j: int) -> float:
        return float(self.powers[m, j])

    def value(self, eps: float, order: int | None = None) -> float:
        order = self.k if order is None else order
        return float(sum(self.r[j - 1] * eps**j for j in range(1, order + 1)))


def _truncated_powers(r, k):
    base = np.zeros(k + 1)
    base[1:] = r
    powers = np.zeros((k + 1, k + 1))
    cur = np.zeros(k + 1)
    cur[0] = 1.0
    for m in range(1, k + 1):
        cur = np.convolve(cur, base)[: k + 1]
        powers[m] = cur
    return powers


def expansion_coefficients(dist: OffspringDistribution, k: int) -> ExpansionCoefficients:
    """r_1..r_k by the composition recursion; needs factorial moments up to k+1."""
    if k < 1:
        raise ValueError("order must be at least 1")
    if k + 1 > dist.max_exact_moment:
        raise MomentUnavailableError(k + 1, dist.max_exact_moment)
    pc = critical_parameter(dist)
    m = [0.0] + [factorial_moment(dist, i) for i in range(1, k + 2)]
    pref = 1.0 / (pc * pc * m[2])  # 2 / (p_c^2 phi''(1)) with phi''(1) = 2 m_2
    r = []
    for j in range(1, k + 1):
        total = 0.0
        for a in compositions_up_to(j):
            if a == (j,):
                continue
            ell, size = len(a), sum(a)
            t = j - size
            if t < 0 or t > ell + 1:
                continue
            prod = 1.0
            for part in a:
                prod *= r[part - 1]
            sign = -1.0 if ell % 2 else 1.0
            total += prod * math.comb(ell + 1, t) * pc ** (size + ell + 1 - j) * sign * m[ell + 1]
        r.append(pref * total)
    return ExpansionCoefficients(tuple(r), _truncated_powers(r, k), k)


# ---------------------------------------------------------------------------
# composition constants


@dataclass(frozen=True)
class CompositionConstants:
    """c[j, i] = p_c^j * sum over compositions alpha of j into i parts of prod m_alpha."""

    c: np.ndarray
    j_max: int

    def __call__(self, j: int, i: int) -> float:
        return float(self.c[j, i])


def composition_constants(dist: OffspringDistribution, j_max: int) -> CompositionConstants:
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    if j_max > dist.max_exact_moment:
        raise MomentUnavailableError(j_max, dist.max_exact_moment)
    pc = critical_parameter(dist)
    m = [0.0] + [factorial_moment(dist, i) for i in range(1, j_max + 1)]
    c = np.zeros((j_max + 1, j_max + 1))
    for j in range(1, j_max + 1):
        for i in range(1, j + 1):
            c[j, i] = pc**j * sum(math.prod(m[a] for a in alpha) for alpha in compositions(j, i))
    return CompositionConstants(c, j_max)


# ---------------------------------------------------------------------------
# the thinned (percolated, conditioned on survival) offspring law


def single_child_prob(dist: OffspringDistribution, p: float) -> float:
    """A_p = p phi'(1 - p g(p)): the root of the surviving skeleton has one child."""
    g = annealed_survival(dist, p)
    if g == 0.0:
        raise SubcriticalError("A_p is defined only above p_c")
    return p * pgf(dist, 1, 1.0 - p * g)


def annealed_branch_prob(dist: OffspringDistribution, p: float) -> float:
    """g_2(p) = g(p)(1 - A_p): the root's cluster contains two disjoint infinite rays."""
    if p <= critical_parameter(dist):
        return 0.0
    g = annealed_survival(dist, p)
    return g * (1.0 - p * pgf(dist, 1, 1.0 - p * g))


def thinned_pgf(dist: OffspringDistribution, p: float, z: float) -> float:
    """phi_p(z) = (phi(1 - p g (1 - z)) - phi(1 - p g)) / g, written cancellation-free."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    g = annealed_survival(dist, p)
    if g == 0.0:
        raise SubcriticalError("phi_p is defined only above p_c")
    s = p * g
    return (one_minus_pgf(dist, s) - one_minus_pgf(dist, s * (1.0 - z))) / g


def thinned_offspring_pmf(dist: OffspringDistribution, p: float) -> np.ndarray:
    """pmf of the surviving-children count of a surviving vertex; index = count."""
    g = annealed_survival(dist, p)
    if g == 0.0:
        raise SubcriticalError("the thinned law is defined only above p_c")
    s = p * g
    out = np.zeros(dist.probs.size)
    for n in range(1, dist.probs.size):
        if dist.probs[n] == 0.0:
            continue
        k = np.arange(1, n + 1)
        out[1: n + 1] += dist.probs[n] * np.array([math.comb(n, int(i)) for i in k]) * s**k * (1 - s) ** (n - k)
    return out / g
