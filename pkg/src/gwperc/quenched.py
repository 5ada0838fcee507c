"""Survival of percolation on one fixed tree, exact and by simulation.

``g_n(T, p)`` is the probability that the root is joined to level n by open
edges. The branching depth |B| is the number of edges from the root to the
first vertex where the open subtree reaching level n splits. Summed over
replicates it gives the derivative: d/dp g_n = E[|B|; survival] / p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import _hash
from .annealed import single_child_prob
from .gwtree import SampledTree

RUSSO_STEP = 1e-3
BRANCH_TAIL = 1e-4


def _ps(p):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(p, dtype=float)))


def _check_depth(tree, n):
    if n < 0 or n > tree.depth:
        raise ValueError(f"n={n} must lie in [0, {tree.depth}]")


def survival_to_depth(tree: SampledTree, p: float, n: int) -> float:
    """Exact P_T(root connected to level n) by the backward recursion q_v = 1 - prod(1 - p q_u)."""
    return float(survival_to_depth_many(tree, [p], n)[0])


def survival_to_depth_many(tree: SampledTree, ps, n: int) -> np.ndarray:
    """The same recursion for several p in a single traversal."""
    _check_depth(tree, n)
    ps = _ps(ps)
    if np.any((ps < 0) | (ps > 1)):
        raise ValueError("p must lie in [0, 1]")
    return np.asarray(_kernels.get("survival_stream")(tree.root_key, n, np.ascontiguousarray(tree.offspring.cdf), ps))


@dataclass(frozen=True)
class SurvivalCurve:
    p: np.ndarray
    g: np.ndarray
    n: int
    tree: SampledTree


def quenched_curve(tree: SampledTree, p_grid, n: int) -> SurvivalCurve:
    grid = _ps(p_grid)
    if np.any((grid <= 0) | (grid > 1)):
        raise ValueError("grid points must lie in (0, 1]")
    return SurvivalCurve(grid, survival_to_depth_many(tree, grid, n), n, tree)


def mc_survival(tree: SampledTree, p: float, n: int, reps: int, seed: int):
    """Survival frequency over ``reps`` fresh percolation configurations and its binomial s.e."""
    _check_depth(tree, n)
    if reps < 1:
        raise ValueError("reps must be positive")
    salts = _hash.replicate_salts(seed, reps)
    hits = _kernels.get("mc_survival")(tree.root_key, n, np.ascontiguousarray(tree.offspring.cdf), salts, float(p))
    est = float(np.mean(hits))
    return est, math.sqrt(est * (1 - est) / reps)


@dataclass(frozen=True)
class BranchingDepthSample:
    """Per-replicate branching depths (-1 where the root does not reach level n).

    Iterating yields ``(estimate, se, survivors)`` where the estimate is the
    mean of |B| with non-surviving replicates scored 0.
    """

    outcomes: np.ndarray
    p: float
    n: int

    @property
    def survivors(self) -> int:
        return int(np.count_nonzero(self.outcomes >= 0))

    @property
    def defined(self) -> bool:
        return self.survivors > 0

    @property
    def scores(self) -> np.ndarray:
        return np.where(self.outcomes >= 0, self.outcomes, 0).astype(float)

    @property
    def estimate(self) -> float:
        return float(self.scores.mean()) if self.defined else float("nan")

    @property
    def se(self) -> float:
        s = self.scores
        return float(s.std(ddof=1) / math.sqrt(s.size)) if self.defined and s.size > 1 else float("nan")

    def __iter__(self):
        return iter((self.estimate, self.se, self.survivors))


def mc_branching_depth(tree: SampledTree, p: float, n: int, reps: int, seed: int) -> BranchingDepthSample:
    _check_depth(tree, n)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    salts = _hash.replicate_salts(seed, reps)
    out = _kernels.get("mc_branching_depth")(tree.root_key, n, np.ascontiguousarray(tree.offspring.cdf), salts, float(p))
    return BranchingDepthSample(np.asarray(out), float(p), n)


def default_depth(dist, p: float, tail: float = BRANCH_TAIL) -> int:
    """Smallest n with A_p^(n/2) < tail, so truncation barely moves |B|."""
    a = single_child_prob(dist, p)
    if a <= 0.0:
        return 1
    return max(1, math.floor(2 * math.log(tail) / math.log(a)) + 1)


@dataclass(frozen=True)
class RussoResult:
    """Finite-difference derivative of g_n against E|B|/p from simulation."""

    p: float
    n: int
    fd_derivative: float
    russo_estimate: float
    se: float
    discretization: float
    passed: bool

    def to_dict(self):
        return {
            "p": self.p, "n": self.n,
            "fd_derivative": self.fd_derivative, "russo_estimate": self.russo_estimate,
            "se": self.se, "discretization": self.discretization, "pass": self.passed,
        }


def russo_checks(tree: SampledTree, ps, n: int, reps: int, seed: int, h: float = RUSSO_STEP,
                 sigmas: float = 3.0) -> list:
    """Compare (g_n(p+h) - g_n(p-h)) / 2h with p^-1 E[|B|; survival] at each p.

    The difference quotient is exact, so the combined s.e. is the Monte Carlo
    one. Its O(h^2) error is estimated by Richardson from the 2h quotient and
    reported separately; ``passed`` allows sigmas * se plus that term. All
    exact evaluations share one traversal of the tree.
    """
    ps = [float(p) for p in np.atleast_1d(ps)]
    grid = np.array([[p - 2 * h, p - h, p + h, p + 2 * h] for p in ps]).ravel()
    g = survival_to_depth_many(tree, grid, n).reshape(len(ps), 4)
    out = []
    for p, row in zip(ps, g):
        fd = (row[2] - row[1]) / (2 * h)
        fd2 = (row[3] - row[0]) / (4 * h)
        disc = abs(fd2 - fd) / 3.0
        sample = mc_branching_depth(tree, p, n, reps, seed)
        est, se = sample.estimate / p, sample.se / p
        ok = bool(sample.defined and abs(fd - est) <= sigmas * se + disc)
        out.append(RussoResult(p, n, float(fd), float(est), float(se), float(disc), ok))
    return out


def russo_check(tree: SampledTree, p: float, n: int, reps: int, seed: int, h: float = RUSSO_STEP,
                sigmas: float = 3.0) -> RussoResult:
    return russo_checks(tree, [p], n, reps, seed, h, sigmas)[0]
