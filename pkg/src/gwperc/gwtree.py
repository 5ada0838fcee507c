"""Galton-Watson trees on the Ulam-Harris address space.

Each vertex carries an offspring count ``deg`` and a uniform ``U`` that
decides whether the edge from its parent is open. Both are hashed from the
tree seed and the vertex path, so any vertex can be regenerated on its own
and the percolation configurations for different p are coupled exactly.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._kernels import _hash
from .errors import ResourceError
from .offspring import OffspringDistribution

POPULATION_CAP = 10**8
MAGIC = b"GWT1"


@dataclass(frozen=True, order=True)
class VertexId:
    """Path of 0-based child indices from the root (the empty path)."""

    path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))
        if any(i < 0 for i in self.path):
            raise ValueError("child indices must be nonnegative")

    @property
    def depth(self) -> int:
        return len(self.path)

    def child(self, i: int) -> "VertexId":
        return VertexId(self.path + (i,))

    def parent(self) -> "VertexId":
        if not self.path:
            raise ValueError("the root has no parent")
        return VertexId(self.path[:-1])

    def meet(self, other: "VertexId") -> "VertexId":
        """Most recent common ancestor (v ∧ w)."""
        k = 0
        for a, b in zip(self.path, other.path):
            if a != b:
                break
            k += 1
        return VertexId(self.path[:k])

    def __str__(self):
        return "root" if not self.path else ".".join(map(str, self.path))


class SampledTree:
    """A tree to finite depth, regenerable from ``(seed, offspring)``.

    Levels are materialized breadth-first when ``lazy`` is false. A lazy tree
    keeps only the root key; streaming kernels traverse it depth-first and
    never store a level, which is how depths beyond the population cap are
    handled.
    """

    def __init__(self, offspring: OffspringDistribution, seed: int, depth: int, lazy: bool = False,
                 cap: int = POPULATION_CAP):
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        self.offspring = offspring
        self.seed = int(seed)
        self.depth = int(depth)
        self.cap = int(cap)
        self.root_key = _hash.root_key(self.seed)
        self._cdf = np.ascontiguousarray(offspring.cdf)
        self._keys = self._degs = self._offsets = None
        self._sizes = None
        if not lazy:
            self._materialize()

    def _materialize(self):
        if self._keys is None:
            self._keys, self._degs, self._offsets = _hash.materialize(self.root_key, self.depth, self._cdf, self.cap)

    @property
    def is_materialized(self) -> bool:
        return self._keys is not None

    # -- level access ------------------------------------------------------

    def keys(self, level: int) -> np.ndarray:
        self._materialize()
        return self._keys[level]

    def degrees(self, level: int) -> np.ndarray:
        """Offspring counts of the vertices at ``level`` in breadth-first order."""
        self._materialize()
        return self._degs[level]

    def uniforms(self, level: int) -> np.ndarray:
        return _hash.edge_uniforms(self.keys(level))

    def child_offsets(self, level: int) -> np.ndarray:
        """Children of vertex v at ``level`` are ``offsets[v]:offsets[v+1]`` at ``level + 1``."""
        self._materialize()
        return self._offsets[level]

    def level_sizes(self) -> np.ndarray:
        """Z_0, ..., Z_depth. Lazy trees count by traversal without storing."""
        if self._sizes is None:
            if self._keys is not None:
                self._sizes = np.array([k.size for k in self._keys], dtype=np.int64)
            else:
                self._sizes = np.asarray(_kernels.get("level_sizes")(self.root_key, self.depth, self._cdf))
        return self._sizes

    def population(self, level: int) -> int:
        return int(self.level_sizes()[level])

    def normalized_population(self, level: int) -> float:
        """W_n = Z_n / mu^n."""
        return self.population(level) / self.offspring.mean**level

    def degree_arrays(self, depth: int | None = None):
        """Concatenated degrees of levels 0..depth-1 and the level start indices."""
        depth = self.depth if depth is None else depth
        degs = [self.degrees(level) for level in range(depth)]
        starts = np.zeros(depth + 1, dtype=np.int64)
        np.cumsum([d.size for d in degs], out=starts[1:])
        deg_all = np.concatenate(degs) if degs else np.zeros(0, dtype=np.int64)
        return deg_all.astype(np.int64), starts

    # -- single vertices ---------------------------------------------------

    def key_of(self, v: VertexId) -> np.uint64:
        key = self.root_key
        for i in v.path:
            if i >= self.degree_of_key(key):
                raise IndexError(f"vertex {v} does not exist in this tree")
            key = _hash.child_keys(np.array([key]), np.array([i]))[0]
        return key

    def degree_of_key(self, key) -> int:
        return int(_hash.degrees(np.array([key], dtype=np.uint64), self._cdf)[0])

    def vertex(self, v: VertexId):
        """(deg_v, U_v) for any vertex, computed directly from its address."""
        if v.depth > self.depth:
            raise IndexError(f"vertex {v} is below the sampled depth {self.depth}")
        key = self.key_of(v)
        return self.degree_of_key(key), float(_hash.edge_uniforms(np.array([key]))[0])

    def vertex_ids(self, level: int) -> list:
        """Addresses of the vertices at ``level`` in breadth-first order."""
        ids = [VertexId()]
        for lev in range(level):
            degs = self.degrees(lev)
            ids = [v.child(i) for v, d in zip(ids, degs) for i in range(int(d))]
        return ids

    def __repr__(self):
        state = "materialized" if self.is_materialized else "lazy"
        return f"SampledTree(seed={self.seed}, depth={self.depth}, {state})"


def sample_tree(dist: OffspringDistribution, depth: int, seed: int, lazy: bool = False,
                cap: int = POPULATION_CAP) -> SampledTree:
    """Sample a tree to ``depth``; raises ResourceError past ``cap`` vertices."""
    return SampledTree(dist, seed, depth, lazy=lazy, cap=cap)


def martingale_limit_estimate(tree: SampledTree) -> float:
    """W_n = Z_n / mu^n at the sampled depth."""
    if tree.depth < 1:
        raise ValueError("tree depth must be at least 1")
    return tree.normalized_population(tree.depth)


def percolate(tree: SampledTree, p: float, depth: int | None = None) -> list:
    """Open marking per level: v is open iff U_a <= p for every non-root ancestor a of v, v included."""
    depth = tree.depth if depth is None else depth
    if depth > tree.depth:
        raise ValueError("depth exceeds the sampled depth")
    marks = [np.ones(1, dtype=bool)]
    for level in range(1, depth + 1):
        off = tree.child_offsets(level - 1)
        parent_open = np.repeat(marks[-1], np.diff(off))
        marks.append(parent_open & (tree.uniforms(level) <= p))
    return marks


# ---------------------------------------------------------------------------
# binary dump


def dump_tree(tree: SampledTree, path) -> None:
    """Write the little-endian GWT1 record of a materialized tree."""
    dist = tree.offspring.to_json().encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQQ", tree.seed & _hash.MASK64, tree.depth, len(dist)))
        fh.write(dist)
        rec = np.dtype([("deg", "<u4"), ("U", "<f8")])
        for level in range(tree.depth + 1):
            degs = tree.degrees(level)
            fh.write(struct.pack("<Q", degs.size))
            arr = np.empty(degs.size, dtype=rec)
            arr["deg"] = degs
            arr["U"] = tree.uniforms(level)
            fh.write(arr.tobytes())


def load_tree(path) -> SampledTree:
    """Read a GWT1 record; the tree is regenerated from its seed and checked bit for bit."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("not a GWT1 tree dump")
    seed, depth, jlen = struct.unpack_from("<QQQ", data, 4)
    pos = 28
    dist = OffspringDistribution.from_json(json.loads(data[pos:pos + jlen].decode()))
    pos += jlen
    tree = sample_tree(dist, depth, seed)
    rec = np.dtype([("deg", "<u4"), ("U", "<f8")])
    for level in range(depth + 1):
        (count,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        arr = np.frombuffer(data, dtype=rec, count=count, offset=pos)
        pos += count * rec.itemsize
        if not (np.array_equal(arr["deg"], tree.degrees(level))
                and np.array_equal(arr["U"].view(np.uint64), tree.uniforms(level).view(np.uint64))):
            raise ValueError(f"dump disagrees with regenerated tree at level {level}")
    return tree


__all__ = [
    "POPULATION_CAP", "ResourceError", "SampledTree", "VertexId", "dump_tree", "load_tree",
    "martingale_limit_estimate", "percolate", "sample_tree",
]
