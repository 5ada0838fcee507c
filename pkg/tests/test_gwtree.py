import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc.errors import ResourceError
from gwperc.gwtree import (
    VertexId,
    dump_tree,
    load_tree,
    martingale_limit_estimate,
    percolate,
    sample_tree,
)
from gwperc.offspring import one_or_three


def test_binary_levels(bin_dist):
    t = sample_tree(bin_dist, 6, seed=3)
    assert [t.population(l) for l in range(7)] == [2**l for l in range(7)]
    assert martingale_limit_estimate(t) == 1.0


@given(st.integers(0, 2**63), st.integers(0, 8))
def test_deterministic_regeneration(seed, depth):
    d = one_or_three()
    a, b = sample_tree(d, depth, seed), sample_tree(d, depth, seed)
    for l in range(depth + 1):
        assert np.array_equal(a.keys(l), b.keys(l))
        assert np.array_equal(a.degrees(l), b.degrees(l))
        assert np.array_equal(a.uniforms(l), b.uniforms(l))


@given(st.integers(0, 10**6), st.integers(1, 9))
def test_prefix_consistency(seed, depth):
    """A deeper sample extends a shallower one without changing it."""
    d = one_or_three()
    short, deep = sample_tree(d, depth, seed), sample_tree(d, depth + 2, seed)
    for l in range(depth + 1):
        assert np.array_equal(short.degrees(l), deep.degrees(l))
    # lazy counting agrees with materialised sizes
    lazy = sample_tree(d, depth + 2, seed, lazy=True)
    assert np.array_equal(lazy.level_sizes(), deep.level_sizes())


def test_vertex_access(mixed_dist):
    t = sample_tree(mixed_dist, 5, seed=11)
    ids = t.vertex_ids(3)
    assert len(ids) == t.population(3)
    for i, v in enumerate(ids):
        deg, u = t.vertex(v)
        assert deg == t.degrees(3)[i]
        assert u == t.uniforms(3)[i]
    v = VertexId((0, 1, 0))
    assert v.depth == 3 and v.parent() == VertexId((0, 1)) and v.child(2).path == (0, 1, 0, 2)
    assert v.meet(VertexId((0, 2))) == VertexId((0,))


@given(st.integers(0, 1000), st.floats(0.05, 0.95), st.floats(0.0, 0.3))
def test_percolation_coupling_monotone(seed, p, dp):
    t = sample_tree(one_or_three(), 6, seed)
    lo, hi = percolate(t, p), percolate(t, min(1.0, p + dp))
    for a, b in zip(lo, hi):
        assert np.all(~a | b)


def test_population_cap(bin_dist):
    with pytest.raises(ResourceError):
        sample_tree(bin_dist, 12, 0, cap=1000)


def test_dump_roundtrip(mixed_dist, tmp_path):
    t = sample_tree(mixed_dist, 6, seed=5)
    path = tmp_path / "t.gwt"
    dump_tree(t, path)
    back = load_tree(path)
    assert back.seed == 5 and back.depth == 6
    data = bytearray(path.read_bytes())
    data[-3] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError):
        load_tree(path)


def test_normalised_population_mean(mixed_dist):
    ws = [sample_tree(mixed_dist, 8, s, lazy=True).normalized_population(8) for s in range(2000)]
    assert abs(np.mean(ws) - 1.0) < 3 * np.std(ws) / np.sqrt(len(ws))
