"""Counter-based hashing of Ulam-Harris addresses (vectorized numpy).

Every random quantity attached to a vertex is a pure function of the tree
seed and the vertex path. The key of a child is ``mix(key + GOLDEN * (i+1))``
where ``i`` is its 0-based child index, so keys can be produced in any order.
The numba kernels reimplement the same arithmetic bit for bit.
"""
import numpy as np

from ..errors import ResourceError

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MUL1 = np.uint64(0xBF58476D1CE4E5B9)
MUL2 = np.uint64(0x94D049BB133111EB)
ROOT_SALT = np.uint64(0x6A09E667F3BCC909)
U_SALT = np.uint64(0xD1B54A32D192ED03)
REP_SALT = np.uint64(0x3C6EF372FE94F82B)
INV_2_53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


def mix(z):
    """splitmix64 finalizer on a uint64 array (wraps modulo 2**64)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * MUL1
    z = (z ^ (z >> np.uint64(27))) * MUL2
    return z ^ (z >> np.uint64(31))


def unit(h):
    """Map uint64 hashes to doubles in [0, 1)."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * INV_2_53


def root_key(seed: int) -> np.uint64:
    return mix(np.array([int(seed) & MASK64], dtype=np.uint64) ^ ROOT_SALT)[0]


def child_keys(keys, index):
    return mix(np.asarray(keys, dtype=np.uint64) + GOLDEN * (np.asarray(index, dtype=np.uint64) + np.uint64(1)))


def degrees(keys, cdf):
    """Offspring counts by inverse CDF on the uniform carried by each key."""
    return np.searchsorted(cdf, unit(keys), side="right").astype(np.int64) + 1


def edge_uniforms(keys, salt=U_SALT):
    return unit(mix(np.asarray(keys, dtype=np.uint64) ^ np.uint64(salt)))


def replicate_salts(mc_seed: int, reps: int) -> np.ndarray:
    base = mix(np.array([int(mc_seed) & MASK64], dtype=np.uint64) ^ REP_SALT)[0]
    return mix(base + GOLDEN * (np.arange(reps, dtype=np.uint64) + np.uint64(1)))


def expand(keys, degs):
    """Child keys of a level, in breadth-first order, plus parent offsets."""
    offsets = np.zeros(keys.size + 1, dtype=np.int64)
    np.cumsum(degs, out=offsets[1:])
    total = int(offsets[-1])
    parent = np.repeat(np.arange(keys.size), degs)
    index = np.arange(total, dtype=np.int64) - offsets[:-1][parent]
    return child_keys(keys[parent], index), offsets


def materialize(root, depth, cdf, cap):
    """Keys, degrees and child offsets for levels 0..depth.

    ``offsets[l]`` indexes level ``l + 1``; the degrees of level ``depth`` are
    computed too (they are pure functions of the keys) so trees can be extended.
    """
    keys = [np.array([root], dtype=np.uint64)]
    degs = [degrees(keys[0], cdf)]
    offsets = []
    population = 1
    for level in range(1, depth + 1):
        size = int(degs[-1].sum())
        population += size
        if population > cap:
            raise ResourceError(level, population, cap)
        child, off = expand(keys[-1], degs[-1])
        offsets.append(off)
        keys.append(child)
        degs.append(degrees(child, cdf))
    return keys, degs, offsets
