import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc.annealed import composition_constants
from gwperc.errors import CapError, CombinatorialBudgetError
from gwperc.gwtree import sample_tree
from gwperc.offspring import OffspringDistribution, critical_parameter, one_or_three
from gwperc.subsetstats import (
    brute_force_subset_stats,
    doob_decomposition,
    doob_residual,
    expected_first_level,
    growth_constants,
    predictable_increment,
    resample_last_level,
    stats_from_degrees,
    subset_stats,
)

DISTS = [one_or_three(), OffspringDistribution.geometric(0.5, truncate=8)]


@given(st.sampled_from(DISTS), st.integers(0, 10**6), st.integers(0, 4), st.integers(1, 3), st.integers(0, 3))
def test_dp_equals_brute_force(dist, seed, n, J, Kc):
    tree = sample_tree(dist, n, seed)
    fast = subset_stats(tree, n, J, Kc).X
    slow = brute_force_subset_stats(tree, n, J, Kc).X
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-300)


def test_simple_values(bin_dist):
    t = sample_tree(bin_dist, 3, 0)
    X = subset_stats(t, 3, 2, 1)
    # single vertices: 2^n vertices times (1/2)^n
    assert [X.value(n, 1, 0) for n in range(4)] == [1.0, 1.0, 1.0, 1.0]
    assert X.value(1, 2, 0) == 0.25  # the two children span 2 edges
    assert X.value(2, 1, 1) == 2.0  # binom(2,1) per vertex, weight 1/4, four vertices
    with pytest.raises(CapError):
        X.value(1, 3, 0)


def test_dary_fast_path_matches_general(bin_dist):
    t = sample_tree(bin_dist, 6, 0)
    deg, starts = t.degree_arrays(6)
    general = stats_from_degrees(deg, starts, 6, 0.5, 3, 2)
    np.testing.assert_allclose(subset_stats(t, 6, 3, 2).X, general, rtol=1e-13)


def test_levels_subset(mixed_dist):
    t = sample_tree(mixed_dist, 6, 4)
    full = subset_stats(t, 6, 2, 1).X
    part = subset_stats(t, 6, 2, 1, levels=[2, 5]).X
    np.testing.assert_array_equal(part[[2, 5]], full[[2, 5]])
    assert not part[3].any()


def test_budget(mixed_dist):
    t = sample_tree(mixed_dist, 14, 0)
    with pytest.raises(CombinatorialBudgetError):
        brute_force_subset_stats(t, 14, 3, 0)


@given(st.integers(0, 10**6))
def test_doob_identity(seed):
    d = one_or_three()
    stats = subset_stats(sample_tree(d, 10, seed), 10, 3, 2)
    parts = doob_decomposition(stats, d)
    assert doob_residual(stats, parts) < 1e-10
    assert not parts.deltaA[0].any()


def test_compensator_forms_agree(mixed_dist):
    from gwperc.subsetstats import _compensator_step

    c = composition_constants(mixed_dist, 3).c
    X = subset_stats(sample_tree(mixed_dist, 7, 2), 7, 3, 2).X[7]
    np.testing.assert_allclose(predictable_increment(X, c), _compensator_step(X, c), rtol=1e-10, atol=1e-12)


def test_one_level_extension_is_compensated(mixed_dist):
    """Averaging X_{n+1} over fresh last-level degrees gives X_n + deltaA_{n+1}."""
    n, J, Kc = 5, 3, 2
    tree = sample_tree(mixed_dist, n, 8)
    X_n = subset_stats(tree, n, J, Kc).X[n]
    pc = critical_parameter(mixed_dist)
    rng = np.random.default_rng(0)
    samples = []
    for _ in range(4000):
        deg, starts = resample_last_level(tree, n, rng)
        samples.append(stats_from_degrees(deg, starts, n + 1, pc, J, Kc, levels=[n + 1])[n + 1])
    samples = np.array(samples)
    mean, se = samples.mean(0), samples.std(0, ddof=1) / np.sqrt(len(samples))
    target = X_n + predictable_increment(X_n, composition_constants(mixed_dist, J).c)
    assert np.all(np.abs(mean - target)[1:] <= 4 * se[1:] + 1e-12)


def test_first_level_means(mixed_dist):
    J, Kc = 3, 2
    X1 = np.mean([subset_stats(sample_tree(mixed_dist, 1, s), 1, J, Kc).X[1] for s in range(20000)], axis=0)
    np.testing.assert_allclose(X1[1:], expected_first_level(mixed_dist, J, Kc)[1:], rtol=0.03)


def test_growth_binary(bin_dist):
    cp = growth_constants(bin_dist, 3, 1)
    assert cp[2, 0] == pytest.approx(0.25)
    X = subset_stats(sample_tree(bin_dist, 256, 0, lazy=True), 256, 2, 0).X
    assert X[256, 2, 0] / 256 == pytest.approx(0.25, rel=0.02)
