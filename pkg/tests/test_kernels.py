"""Both backends give bit-identical results from the same seeds."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc._kernels import _hash, get
from gwperc.collapsed import CHERRY, V1, F1, Monomial, _flatten
from gwperc.gwtree import sample_tree
from gwperc.offspring import OffspringDistribution, one_or_three

pytest.importorskip("numba")

DIST = one_or_three()
CDF = np.ascontiguousarray(DIST.cdf)


def both(name, *args):
    return get(name, "numba")(*args), get(name, "numpy")(*args)


@given(st.integers(0, 2**64 - 1), st.integers(0, 9))
def test_survival_and_sizes(seed, n):
    root = _hash.root_key(seed)
    ps = np.array([0.4, 0.6, 0.9])
    a, b = both("survival_stream", root, n, CDF, ps)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    a, b = both("level_sizes", root, n, CDF)
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 10**6), st.integers(1, 8), st.floats(0.3, 0.95))
def test_mc_kernels(seed, n, p):
    root = _hash.root_key(seed)
    salts = _hash.replicate_salts(seed + 1, 64)
    a, b = both("mc_survival", root, n, CDF, salts, p)
    np.testing.assert_array_equal(np.asarray(a, bool), np.asarray(b, bool))
    a, b = both("mc_branching_depth", root, n, CDF, salts, p)
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 10**6))
def test_monomial_kernel(seed):
    n = 7
    items = [(V1, F1), (CHERRY, Monomial((1, 2))), (CHERRY, Monomial((0, 0)))]
    par, ordi, nch, fs, base, size = _flatten(items)
    salts = _hash.replicate_salts(seed, 64)
    args = (_hash.root_key(seed), n, CDF, salts, np.array([0.7, 0.85]), 1, 64,
            np.array([0, 1, 0], dtype=np.int64), base, size, par, ordi, nch, fs)
    (va, ia, oa), (vb, ib, ob) = both("mc_monomial_values", *args)
    np.testing.assert_array_equal(va, vb)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_array_equal(oa, ob)


@given(st.integers(0, 10**6))
def test_subset_dp(seed):
    t = sample_tree(OffspringDistribution.finite({1: 0.3, 2: 0.4, 4: 0.3}), 5, seed)
    deg, starts = t.degree_arrays(5)
    for n in range(6):
        a, b = both("subset_dp", deg, starts, n, 0.45, 3, 2)
        np.testing.assert_allclose(a, b, rtol=1e-13)


def test_env_selects_backend():
    code = "from gwperc import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, GWPERC_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env.pop("GWPERC_BACKEND")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
