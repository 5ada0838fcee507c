import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc.gwtree import percolate, sample_tree
from gwperc.offspring import one_or_three
from gwperc.quenched import (
    default_depth,
    mc_branching_depth,
    mc_survival,
    quenched_curve,
    russo_check,
    russo_checks,
    survival_to_depth,
    survival_to_depth_many,
)


def binary_gn(p, n):
    q = 1.0
    for _ in range(n):
        q = 1 - (1 - p * q) ** 2
    return q


@pytest.mark.parametrize("p", [0.3, 0.5, 0.75, 0.99])
def test_binary_recursion(bin_dist, p):
    t = sample_tree(bin_dist, 12, 0, lazy=True)
    assert survival_to_depth(t, p, 12) == pytest.approx(binary_gn(p, 12), abs=1e-14)


def test_trivial_values(mixed_dist):
    t = sample_tree(mixed_dist, 8, 1, lazy=True)
    assert survival_to_depth(t, 0.7, 0) == 1.0
    assert survival_to_depth(t, 1.0, 8) == 1.0
    assert survival_to_depth(t, 0.0, 8) == 0.0
    with pytest.raises(ValueError):
        survival_to_depth(t, 0.7, 9)


@given(st.integers(0, 10**6), st.integers(1, 10))
def test_monotone_in_p_and_depth(seed, n):
    t = sample_tree(one_or_three(), n + 1, seed, lazy=True)
    grid = np.linspace(0.05, 1.0, 12)
    g = survival_to_depth_many(t, grid, n)
    assert np.all(np.diff(g) >= -1e-15)
    assert np.all(survival_to_depth_many(t, grid, n + 1) <= g + 1e-15)


def test_exact_matches_coupled_percolation(mixed_dist):
    """Averaging the open-path indicator over fresh trees' uniforms gives E g_n."""
    n, p = 6, 0.7
    hits, exact = [], []
    for seed in range(3000):
        t = sample_tree(mixed_dist, n, seed)
        hits.append(percolate(t, p)[n].any())
        exact.append(survival_to_depth(t, p, n))
    se = np.std(hits) / math.sqrt(len(hits))
    assert abs(np.mean(hits) - np.mean(exact)) < 4 * se


def test_mc_survival_agrees(mixed_dist):
    t = sample_tree(mixed_dist, 15, 2, lazy=True)
    est, se = mc_survival(t, 0.7, 15, 40_000, seed=3)
    assert abs(est - survival_to_depth(t, 0.7, 15)) < 4 * se
    assert mc_survival(t, 0.7, 15, 1000, seed=3) == mc_survival(t, 0.7, 15, 1000, seed=3)


def test_branching_depth_sample(bin_dist):
    t = sample_tree(bin_dist, 10, 0, lazy=True)
    sample = mc_branching_depth(t, 0.75, 10, 5000, seed=1)
    assert sample.outcomes.min() >= -1 and sample.outcomes.max() <= 10
    assert sample.survivors == np.count_nonzero(sample.outcomes >= 0)
    est, se, surv = sample
    assert est == pytest.approx(sample.scores.mean())
    dead = mc_branching_depth(t, 0.05, 10, 200, seed=1)
    assert not dead.defined and math.isnan(dead.estimate)


def test_russo_binary(bin_dist):
    n = default_depth(bin_dist, 0.75)
    t = sample_tree(bin_dist, n, 0, lazy=True)
    res = russo_check(t, 0.75, n, 50_000, seed=2)
    assert abs(res.fd_derivative - res.russo_estimate) <= 3 * res.se + res.discretization
    assert set(res.to_dict()) == {"p", "n", "fd_derivative", "russo_estimate", "se", "discretization", "pass"}


def test_russo_batch_matches_single(mixed_dist):
    t = sample_tree(mixed_dist, 12, 5, lazy=True)
    many = russo_checks(t, [0.7, 0.8], 12, 3000, seed=4)
    assert many[1] == russo_check(t, 0.8, 12, 3000, seed=4)


def test_curve(mixed_dist):
    t = sample_tree(mixed_dist, 6, 0, lazy=True)
    c = quenched_curve(t, [0.6, 0.8], 6)
    assert c.g.shape == (2,) and c.n == 6
    with pytest.raises(ValueError):
        quenched_curve(t, [0.0], 6)
