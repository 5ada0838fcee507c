"""Subset statistics of a tree and their Doob decomposition.

For a tree T and a level n, X_n^{(j,k)} sums ``binom(m, k) p_c^m`` over all
j-element subsets of the level-n vertices, where m is the number of edges
of the smallest rooted subtree containing the subset. The j=1, k=0 entry is
the normalized population W_n.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .annealed import composition_constants
from .errors import CapError, CombinatorialBudgetError
from .gwtree import SampledTree
from .offspring import OffspringDistribution, critical_parameter

BRUTE_FORCE_BUDGET = 10**7


@dataclass(frozen=True)
class SubsetStatTable:
    """``X[n, j, k]`` for 0 <= n <= n_max, j <= J, k <= Kc; row j = 0 is zero."""

    X: np.ndarray
    J: int
    Kc: int
    tree: SampledTree | None = None

    @property
    def n_max(self) -> int:
        return self.X.shape[0] - 1

    def value(self, n: int, j: int, k: int) -> float:
        if j > self.J or k > self.Kc:
            raise CapError(f"X^({j},{k}) requested but the table stops at J={self.J}, Kc={self.Kc}")
        return float(self.X[n, j, k])


def _check_caps(J, Kc):
    if J < 1:
        raise ValueError("J must be at least 1")
    if Kc < 0:
        raise ValueError("Kc must be nonnegative")


def _dary_tables(d, pc, n_max, J, Kc):
    """Root tables of the deterministic d-ary tree for every depth 0..n_max.

    All vertices at the same height share one table, so the table at height
    h is the d-th truncated power of the lifted table at height h-1.
    """
    from ._kernels._numpy import _conv, _lift

    S = np.zeros((1, J + 1, Kc + 1))
    S[0, 0, 0] = 1.0
    S[0, 1, 0] = 1.0
    out = [S[0].copy()]
    for _ in range(n_max):
        L = _lift(S, pc)
        acc = np.zeros_like(L)
        acc[0, 0, 0] = 1.0
        for _ in range(d):
            acc = _conv(acc, L, J, Kc)
        S = acc
        out.append(S[0].copy())
    return np.array(out)


def stats_from_degrees(deg_all, level_start, n_max, pc, J, Kc, levels=None) -> np.ndarray:
    """DP core on a tree given by per-level degree arrays (levels 0..n_max-1 needed)."""
    dp = _kernels.get("subset_dp")
    X = np.zeros((n_max + 1, J + 1, Kc + 1))
    deg_all = np.ascontiguousarray(deg_all, dtype=np.int64)
    level_start = np.ascontiguousarray(level_start, dtype=np.int64)
    for n in range(n_max + 1) if levels is None else levels:
        X[n] = dp(deg_all, level_start, n, float(pc), J, Kc)
    X[:, 0, :] = 0.0
    return X


def subset_stats(tree: SampledTree, n: int, J: int, Kc: int, levels=None) -> SubsetStatTable:
    """X_m^{(j,k)} for m = 0..n (or only the listed ``levels``) by a bottom-up sweep per level."""
    _check_caps(J, Kc)
    if n > tree.depth:
        raise ValueError(f"n={n} exceeds the tree depth {tree.depth}")
    dist = tree.offspring
    pc = critical_parameter(dist)
    if dist.is_deterministic:
        X = _dary_tables(dist.max_degree, pc, n, J, Kc)
        X[:, 0, :] = 0.0
        if levels is not None:
            mask = np.ones(n + 1, bool)
            mask[list(levels)] = False
            X[mask] = 0.0
        return SubsetStatTable(X, J, Kc, tree)
    deg_all, starts = tree.degree_arrays(n)
    return SubsetStatTable(stats_from_degrees(deg_all, starts, n, pc, J, Kc, levels), J, Kc, tree)


def brute_force_subset_stats(tree: SampledTree, n: int, J: int, Kc: int) -> SubsetStatTable:
    """Direct enumeration of subsets; spanning-subtree sizes from consecutive meets."""
    _check_caps(J, Kc)
    pc = critical_parameter(tree.offspring)
    X = np.zeros((n + 1, J + 1, Kc + 1))
    for level in range(n + 1):
        paths = [v.path for v in tree.vertex_ids(level)]  # lexicographic order
        work = sum(math.comb(len(paths), j) for j in range(1, J + 1))
        if work > BRUTE_FORCE_BUDGET:
            raise CombinatorialBudgetError(f"{work} subsets at level {level} exceed the budget")
        for j in range(1, J + 1):
            for subset in itertools.combinations(paths, j):
                m = level
                for a, b in zip(subset, subset[1:]):
                    m += level - _common_prefix(a, b)
                weight = pc**m
                for k in range(Kc + 1):
                    X[level, j, k] += math.comb(m, k) * weight
    return SubsetStatTable(X, J, Kc, tree)


def _common_prefix(a, b):
    k = 0
    for x, y in zip(a, b):
        if x != y:
            break
        k += 1
    return k


# ---------------------------------------------------------------------------
# Doob decomposition


@dataclass(frozen=True)
class DoobParts:
    """Predictable increments ``deltaA[n]`` (deltaA[0] = 0) and martingale part ``Y``."""

    deltaA: np.ndarray
    Y: np.ndarray


def predictable_increment(X_prev: np.ndarray, c: np.ndarray) -> np.ndarray:
    """deltaA_{m+1}^{(j,k)} from the level-m table:
    -X^{(j,k)} + sum_i c_{j,i} sum_d binom(j, k-d) X^{(i,d)}."""
    J, Kc = X_prev.shape[0] - 1, X_prev.shape[1] - 1
    out = -X_prev.copy()
    for j in range(1, J + 1):
        for k in range(Kc + 1):
            s = 0.0
            for i in range(1, j + 1):
                for d in range(k + 1):
                    s += c[j, i] * math.comb(j, k - d) * X_prev[i, d]
            out[j, k] += s
    out[0] = 0.0
    return out


def _compensator_step(X_prev, c):
    """The same increment with the i=j, d=k term cancelled by hand."""
    J, Kc = X_prev.shape[0] - 1, X_prev.shape[1] - 1
    out = np.zeros_like(X_prev)
    for j in range(1, J + 1):
        for k in range(Kc + 1):
            s = 0.0
            for d in range(k):
                s += math.comb(j, k - d) * X_prev[j, d]
            for i in range(1, j):
                for d in range(k + 1):
                    s += c[j, i] * math.comb(j, k - d) * X_prev[i, d]
            out[j, k] = s
    return out


def doob_decomposition(stats: SubsetStatTable, dist: OffspringDistribution) -> DoobParts:
    """Split X into the martingale Y and the predictable compensator A."""
    c = composition_constants(dist, stats.J).c
    X = stats.X
    deltaA = np.zeros_like(X)
    Y = np.zeros_like(X)
    comp = np.zeros_like(X[0])
    Y[0] = X[0]
    for n in range(1, X.shape[0]):
        deltaA[n] = predictable_increment(X[n - 1], c)
        comp = comp + _compensator_step(X[n - 1], c)
        Y[n] = X[n] - comp
    return DoobParts(deltaA, Y)


def doob_residual(stats: SubsetStatTable, parts: DoobParts) -> float:
    """max relative |X_n - Y_n - sum_{m<=n} deltaA_m| over the table."""
    recon = parts.Y + np.cumsum(parts.deltaA, axis=0)
    scale = np.maximum(np.abs(stats.X), 1.0)
    return float(np.max(np.abs(stats.X - recon) / scale))


def growth_constants(dist: OffspringDistribution, J: int, Kc: int) -> np.ndarray:
    """c'_{j,k} with X_n^{(j,k)} ~ c'_{j,k} n^(j+k-1) W; row 0 unused."""
    c = composition_constants(dist, max(J, 1)).c
    cp = np.zeros((J + 1, Kc + 1))
    for k in range(Kc + 1):
        cp[1, k] = 1.0 / math.factorial(k)
    for j in range(2, J + 1):
        cp[j, 0] = c[j, j - 1] * cp[j - 1, 0] / (j - 1)
        for k in range(1, Kc + 1):
            cp[j, k] = (j * cp[j, k - 1] + c[j, j - 1] * cp[j - 1, k]) / (j + k - 1)
    return cp


def expected_first_level(dist: OffspringDistribution, J: int, Kc: int) -> np.ndarray:
    """E X_1^{(j,k)} = binom(j, k) c_{j,1}."""
    c = composition_constants(dist, J).c
    out = np.zeros((J + 1, Kc + 1))
    for j in range(1, J + 1):
        for k in range(Kc + 1):
            out[j, k] = math.comb(j, k) * c[j, 1]
    return out


def resample_last_level(tree: SampledTree, n: int, rng: np.random.Generator):
    """Degree arrays for levels 0..n with the level-n degrees redrawn.

    Used to average over one-level extensions of a frozen level-n tree.
    """
    deg_all, starts = tree.degree_arrays(n)
    size = tree.population(n)
    fresh = np.searchsorted(tree.offspring.cdf, rng.random(size), side="right").astype(np.int64) + 1
    return np.concatenate([deg_all, fresh]), np.append(starts, starts[-1] + size)
