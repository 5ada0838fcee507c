"""Pure-numpy versions of the kernels.

These materialize the tree level by level, so they are bounded by the
population cap and are meant for small depths, tests and the benchmark.
"""
import numpy as np

from . import _hash

# tree population allowed when a kernel has to materialize levels
CAP = 10**8


def _levels(root, depth, cdf):
    keys, degs, offsets = _hash.materialize(np.uint64(root), depth, cdf, CAP)
    return keys, degs, offsets


def survival_stream(root, n, cdf, ps):
    ps = np.asarray(ps, dtype=float)
    if n == 0:
        return np.ones(ps.size)
    keys, degs, offsets = _levels(root, n - 1, cdf)
    # q at level n-1 from the degree alone
    q = 1.0 - (1.0 - ps[:, None]) ** degs[n - 1][None, :]
    for level in range(n - 2, -1, -1):
        factor = 1.0 - ps[:, None] * q
        off = offsets[level]
        prod = np.multiply.reduceat(factor, off[:-1], axis=1)
        q = 1.0 - prod
    return q[:, 0].copy()


def level_sizes(root, n, cdf):
    keys, degs, offsets = _levels(root, n, cdf)
    return np.array([k.size for k in keys], dtype=np.int64)


def _alive(keys, degs, offsets, n, salts, p):
    """alive[l][r, v]: vertex v at level l is open (root: always) and has an
    open path to level n in replicate r."""
    alive = [None] * (n + 1)
    opened = _hash.unit(_hash.mix(keys[n][None, :] ^ salts[:, None])) <= p
    alive[n] = opened
    counts = [None] * (n + 1)
    for level in range(n - 1, -1, -1):
        off = offsets[level]
        c = np.add.reduceat(alive[level + 1].astype(np.int64), off[:-1], axis=1)
        counts[level] = c
        if level == 0:
            alive[0] = c > 0
        else:
            alive[level] = (_hash.unit(_hash.mix(keys[level][None, :] ^ salts[:, None])) <= p) & (c > 0)
    return alive, counts


def _chunk(total_vertices):
    return max(1, int(2 * 10**7 // max(total_vertices, 1)))


def mc_survival(root, n, cdf, salts, p):
    if n == 0:
        return np.ones(salts.size, dtype=np.uint8)
    keys, degs, offsets = _levels(root, n, cdf)
    step = _chunk(sum(k.size for k in keys))
    out = np.empty(salts.size, dtype=np.uint8)
    for start in range(0, salts.size, step):
        alive, _ = _alive(keys, degs, offsets, n, salts[start:start + step], p)
        out[start:start + step] = alive[0][:, 0]
    return out


def mc_branching_depth(root, n, cdf, salts, p):
    if n == 0:
        return np.zeros(salts.size, dtype=np.int64)
    keys, degs, offsets = _levels(root, n, cdf)
    step = _chunk(sum(k.size for k in keys))
    out = np.empty(salts.size, dtype=np.int64)
    for start in range(0, salts.size, step):
        alive, counts = _alive(keys, degs, offsets, n, salts[start:start + step], p)
        R = alive[0].shape[0]
        rows = np.arange(R)
        res = np.full(R, n, dtype=np.int64)
        res[~alive[0][:, 0]] = -1
        active = alive[0][:, 0].copy()
        cur = np.zeros(R, dtype=np.int64)
        for level in range(n):
            c = counts[level][rows, cur]
            branched = active & (c >= 2)
            res[branched] = level
            active &= ~branched
            if not active.any():
                break
            # move each active replicate to its single surviving child
            first = offsets[level][cur]
            nxt = cur.copy()
            for i in range(int(degs[level].max())):
                idx = np.minimum(first + i, alive[level + 1].shape[1] - 1)
                ok = active & (i < degs[level][cur]) & alive[level + 1][rows, idx]
                nxt[ok] = idx[ok]
            cur = np.where(active, nxt, 0)
        out[start:start + step] = res
    return out


def _skeleton(keys, degs, offsets, alive, counts, r, n, dmax):
    """Collapsed survivor skeleton for replicate r as parallel lists."""
    if not alive[0][r, 0]:
        return None
    # node: (level, index, length, boundary, depth); children filled in BFS order
    nodes = [[0, 0, 0, n == 0, 0]]
    nch = [0]
    first = [0]
    head = 0
    while head < len(nodes):
        level, v, _, bnd, depth = nodes[head]
        first[head] = len(nodes)
        if not bnd and depth < dmax:
            lo, hi = offsets[level][v], offsets[level][v + 1]
            for c in range(lo, hi):
                if not alive[level + 1][r, c]:
                    continue
                lev, w, length = level + 1, c, 1
                while lev < n and counts[lev][r, w] == 1:
                    o = offsets[lev]
                    kids = np.nonzero(alive[lev + 1][r, o[w]:o[w + 1]])[0]
                    w = o[w] + int(kids[0])
                    lev += 1
                    length += 1
                nodes.append([lev, w, length, lev == n, depth + 1])
                nch.append(0)
                first.append(0)
                nch[head] += 1
        head += 1
    return nodes, nch, first


def _match(vn, base, v_par, v_ord, v_nch, v_F, nodes, nch, first):
    vmap = [0] * vn
    value = 1.0
    indet = False
    for a in range(vn):
        if a == 0:
            s = 0
        else:
            sp = vmap[v_par[base + a]]
            if sp < 0:
                vmap[a] = -1
                continue
            s = first[sp] + v_ord[base + a]
            value *= float(nodes[s][2]) ** v_F[base + a]
        vmap[a] = s
        k = v_nch[base + a]
        if nodes[s][3]:
            indet = True
            vmap[a] = -1
            continue
        if k and nch[s] != k:
            return 0.0, False
    return (0.0, True) if indet else (value, False)


def mc_monomial_values(root, n, cdf, salts, ps, dmax, cap, term_p, term_base, term_vn, v_par, v_ord, v_nch, v_F):
    keys, degs, offsets = _levels(root, n, cdf)
    R, T = salts.size, term_p.size
    vals = np.zeros((R, T))
    indet = np.zeros((R, T), dtype=np.uint8)
    overflow = np.zeros(R, dtype=np.uint8)
    for j, p in enumerate(ps):
        alive, counts = _alive(keys, degs, offsets, n, salts, p) if n > 0 else (None, None)
        for r in range(R):
            if n == 0:
                sk = ([[0, 0, 0, True, 0]], [0], [1])
            else:
                sk = _skeleton(keys, degs, offsets, alive, counts, r, n, dmax)
            if sk is None:
                continue
            if len(sk[0]) > cap:
                overflow[r] = 1
                continue
            for t in range(T):
                if term_p[t] != j:
                    continue
                vals[r, t], ind = _match(term_vn[t], term_base[t], v_par, v_ord, v_nch, v_F, *sk)
                indet[r, t] = ind
    return vals, indet, overflow


# ---------------------------------------------------------------------------
# subset-statistic dynamic programme


def _conv(A, B, J, K):
    """Truncated bivariate product over the trailing two axes."""
    out = np.zeros_like(A)
    for a in range(J + 1):
        for b in range(K + 1):
            coef = A[:, a, b][:, None, None]
            if not coef.any():
                continue
            out[:, a:, b:] += coef * B[:, : J + 1 - a, : K + 1 - b]
    return out


def _lift(S, pc):
    L = np.zeros_like(S)
    L[:, 1:, :] = S[:, 1:, :]
    L[:, 1:, 1:] += S[:, 1:, :-1]
    L[:, 1:, :] *= pc
    L[:, 0, 0] = 1.0
    return L


def subset_dp(deg_all, level_start, n, pc, J, K):
    """X_n^{(j,k)} for a tree given by concatenated level degree arrays."""
    if n == 0:
        X = np.zeros((J + 1, K + 1))
        X[0, 0] = 1.0
        if J >= 1:
            X[1, 0] = 1.0
        return X
    # level n: each vertex is in or out of the set
    nlev = int(deg_all[level_start[n - 1]:level_start[n]].sum())
    S = np.zeros((nlev, J + 1, K + 1))
    S[:, 0, 0] = 1.0
    if J >= 1:
        S[:, 1, 0] = 1.0
    for level in range(n - 1, -1, -1):
        degs = np.asarray(deg_all[level_start[level]:level_start[level + 1]])
        off = np.zeros(degs.size + 1, dtype=np.int64)
        np.cumsum(degs, out=off[1:])
        L = _lift(S, pc)
        acc = np.zeros((degs.size, J + 1, K + 1))
        acc[:, 0, 0] = 1.0
        for i in range(int(degs.max())):
            rows = np.nonzero(degs > i)[0]
            acc[rows] = _conv(acc[rows], L[off[rows] + i], J, K)
        S = acc
    return S[0]
