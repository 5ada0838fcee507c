import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc.annealed import (
    annealed_branch_prob,
    annealed_survival,
    composition_constants,
    compositions,
    critical_slope,
    expansion_coefficients,
    single_child_prob,
    thinned_offspring_pmf,
    thinned_pgf,
)
from gwperc.offspring import OffspringDistribution, critical_parameter, one_or_three


def binary_g(p):
    return (2 * p - 1) / p**2


def test_binary_closed_form(bin_dist):
    for p in (0.5, 0.51, 0.6, 0.75, 0.9, 1.0):
        assert annealed_survival(bin_dist, p) == pytest.approx(max(binary_g(p), 0), abs=1e-13)
    assert annealed_survival(bin_dist, 0.4) == 0.0


def test_geometric_closed_form(geo_dist):
    # thinned geometric: g = 1 - (1 - p) q / (p (1 - q)) ... solved directly below
    for p in (0.55, 0.75, 0.95):
        g = annealed_survival(geo_dist, p)
        assert 1 - g == pytest.approx(sum(geo_dist.probs[n] * (1 - p * g) ** n for n in range(geo_dist.probs.size)),
                                      abs=1e-13)
    assert annealed_survival(geo_dist, 0.75) == pytest.approx(2 / 3, abs=1e-12)


def test_coefficients(bin_dist, geo_dist):
    assert expansion_coefficients(bin_dist, 3).r == pytest.approx((8, -32, 96), abs=1e-9)
    assert expansion_coefficients(geo_dist, 3).r == pytest.approx((4, -8, 16), abs=1e-9)
    assert critical_slope(bin_dist) == pytest.approx(8)
    assert critical_slope(geo_dist) == pytest.approx(4)


def test_binary_series_exact(bin_dist):
    # (2p-1)/p^2 at p = 1/2 + e is 8e/(1+2e)^2 = sum (-1)^(j+1) j 2^(j+2) e^j
    co = expansion_coefficients(bin_dist, 6)
    for j in range(1, 7):
        assert co.coefficient(j) == pytest.approx((-1) ** (j + 1) * j * 2 ** (j + 2), rel=1e-12)


@pytest.mark.parametrize("dist", [OffspringDistribution.deterministic(2), OffspringDistribution.geometric(0.5),
                                  one_or_three(), OffspringDistribution.finite({1: 0.3, 2: 0.3, 5: 0.4})])
def test_series_order_of_error(dist):
    pc = critical_parameter(dist)
    co = expansion_coefficients(dist, 4)
    for order in (1, 2, 3, 4):
        errs = [abs(annealed_survival(dist, pc + e) - co.value(e, order)) for e in (2e-3, 1e-3)]
        # error shrinks like eps^(order+1)
        assert errs[1] < errs[0] * 0.5 ** (order + 0.5) or errs[1] < 1e-14


def test_compositions():
    assert compositions(4, 2) == ((1, 3), (2, 2), (3, 1))
    for w in range(1, 8):
        for k in range(1, w + 1):
            assert len(compositions(w, k)) == math.comb(w - 1, k - 1)


@given(st.floats(0.55, 0.99))
def test_thinned_law(p):
    d = one_or_three()
    g = annealed_survival(d, p)
    pmf = thinned_offspring_pmf(d, p)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert pmf[0] == 0.0
    assert pmf[1] == pytest.approx(single_child_prob(d, p), abs=1e-12)
    assert annealed_branch_prob(d, p) == pytest.approx(g * (1 - pmf[1]), abs=1e-12)
    z = 0.3
    assert thinned_pgf(d, p, z) == pytest.approx(sum(pmf[k] * z**k for k in range(pmf.size)), abs=1e-12)
    assert g > 0


@given(st.floats(0.52, 0.99), st.floats(0.0, 0.01))
def test_survival_monotone(p, dp):
    d = OffspringDistribution.geometric(0.5)
    assert annealed_survival(d, p) <= annealed_survival(d, min(p + dp, 1.0)) + 1e-14


def test_near_critical_asymptotics(test_dist):
    d = test_dist
    pc, mu, eps = critical_parameter(d), d.mean, 1e-3
    assert 0.98 <= (1 - single_child_prob(d, pc + eps)) / (mu * eps) <= 1.02
    assert 0.95 <= annealed_branch_prob(d, pc + eps) / (critical_slope(d) * mu * eps**2) <= 1.05


def test_composition_constants_shape(mixed_dist):
    cc = composition_constants(mixed_dist, 4)
    assert cc.c.shape == (5, 5)
    # c_{1,1} = p_c * mean
    assert cc.c[1, 1] == pytest.approx(1.0)
