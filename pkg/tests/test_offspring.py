import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc.errors import InvalidDistributionError, MomentUnavailableError, SubcriticalError
from gwperc.offspring import (
    OffspringDistribution,
    critical_parameter,
    factorial_moment,
    one_minus_pgf,
    pgf,
    sample_offspring,
    sample_offspring_array,
)


def test_binary_basics(bin_dist):
    assert bin_dist.mean == 2.0
    assert critical_parameter(bin_dist) == 0.5
    assert pgf(bin_dist, 0, 0.3) == pytest.approx(0.09)
    assert pgf(bin_dist, 2, 0.3) == pytest.approx(2.0)
    assert factorial_moment(bin_dist, 2) == 1.0
    assert factorial_moment(bin_dist, 3) == 0.0
    assert bin_dist.is_deterministic


def test_geometric_moments(geo_dist):
    assert geo_dist.mean == pytest.approx(2.0, abs=1e-12)
    # untruncated: q^(r-1) / (1-q)^r
    for r in range(1, geo_dist.max_exact_moment + 1):
        assert factorial_moment(geo_dist, r) == pytest.approx(0.5 ** (r - 1) / 0.5**r, rel=1e-9)
    assert geo_dist.max_exact_moment == 6
    with pytest.raises(MomentUnavailableError):
        factorial_moment(geo_dist, geo_dist.max_exact_moment + 1)


@pytest.mark.parametrize("pmf, err", [
    ({1: 1.0}, SubcriticalError),
    ({1: 0.5, 2: 0.4}, InvalidDistributionError),
    ({0: 0.1, 2: 0.9}, InvalidDistributionError),
    ({1: -0.5, 3: 1.5}, InvalidDistributionError),
    ({"x": 1.0}, InvalidDistributionError),
])
def test_invalid(pmf, err):
    with pytest.raises(err):
        OffspringDistribution.finite(pmf)


def test_json_roundtrip(mixed_dist, geo_dist, tmp_path):
    for d in (mixed_dist, geo_dist):
        again = OffspringDistribution.from_json(d.to_json())
        assert np.array_equal(again.probs, d.probs)
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"type": "finite", "pmf": [["2", 1.0]]}))
    assert OffspringDistribution.from_json(path).mean == 2.0
    with pytest.raises(InvalidDistributionError):
        OffspringDistribution.from_json({"type": "poisson"})


def test_sampling_inverse_cdf(mixed_dist):
    assert sample_offspring(mixed_dist, 0.0) == 1
    assert sample_offspring(mixed_dist, 0.4999) == 1
    assert sample_offspring(mixed_dist, 0.5) == 3
    u = np.random.default_rng(0).random(200_000)
    draws = sample_offspring_array(mixed_dist, u)
    assert abs(draws.mean() - 2.0) < 0.01


@given(st.floats(1e-15, 0.999))
def test_one_minus_pgf_matches_direct(x):
    d = OffspringDistribution.finite({1: 0.2, 2: 0.5, 4: 0.3})
    direct = 1 - sum(p * (1 - x) ** n for n, p in enumerate(d.probs))
    assert one_minus_pgf(d, x) == pytest.approx(direct, rel=1e-9, abs=1e-15)
    # the tiny-x form keeps relative accuracy
    assert one_minus_pgf(d, x) / x <= d.mean + 1e-9


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_random_pmf_normalises(weights):
    w = np.array(weights)
    pmf = {i + 1: x for i, x in enumerate(w / w.sum())}
    pmf = {k: v for k, v in pmf.items()}
    total = sum(pmf.values())
    pmf[1] += 1 - total
    mean = sum(k * v for k, v in pmf.items())
    if mean <= 1 + 1e-9:
        with pytest.raises(SubcriticalError):
            OffspringDistribution.finite(pmf)
        return
    d = OffspringDistribution.finite(pmf)
    assert d.cdf[-1] == 1.0
    assert np.all(np.diff(d.cdf) >= 0)
    assert critical_parameter(d) == pytest.approx(1 / mean)
    assert math.isclose(pgf(d, 1, 1.0), mean, rel_tol=1e-12)
