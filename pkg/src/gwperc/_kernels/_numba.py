"""numba implementations of the hot loops.

All hashing matches ``_hash`` bit for bit; integer constants stay uint64 so
numba never promotes them to floats.
"""
import numpy as np
from numba import njit, prange

from ._hash import GOLDEN, INV_2_53, MUL1, MUL2

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * MUL1
    z = (z ^ (z >> _S27)) * MUL2
    return z ^ (z >> _S31)


@njit(inline="always")
def _unit(h):
    return np.float64(h >> _S11) * INV_2_53


@njit(inline="always")
def _child(key, i):
    return _mix(key + GOLDEN * (np.uint64(i) + _ONE))


@njit(inline="always")
def _degree(key, cdf):
    u = _unit(key)
    k = 0
    while cdf[k] <= u:
        k += 1
    return k + 1


@njit(inline="always")
def _open(key, salt, p):
    return _unit(_mix(key ^ salt)) <= p


# ---------------------------------------------------------------------------
# exact survival on a lazily hashed tree


@njit(cache=True)
def survival_stream(root, n, cdf, ps):
    """P(root connects to level n | tree) for every p in ``ps``, one DFS.

    Vertices at level n-1 are never pushed: a level n-2 vertex folds each
    child's contribution ``1 - p(1 - (1-p)^deg)`` straight from a table.
    """
    P = ps.size
    out = np.ones(P)
    if n == 0:
        return out
    maxdeg = cdf.size
    if n == 1:
        d = _degree(root, cdf)
        for j in range(P):
            out[j] = 1.0 - (1.0 - ps[j]) ** d
        return out
    leaf = np.empty((maxdeg + 1, P))
    for d in range(maxdeg + 1):
        for j in range(P):
            leaf[d, j] = 1.0 - ps[j] * (1.0 - (1.0 - ps[j]) ** d)
    H = n - 1
    keys = np.empty(H, dtype=np.uint64)
    degs = np.empty(H, dtype=np.int64)
    nxt = np.zeros(H, dtype=np.int64)
    prod = np.ones((H, P))
    q = np.empty(P)
    keys[0] = root
    degs[0] = _degree(root, cdf)
    top = 0
    while True:
        finished = False
        if top == H - 1:
            for j in range(P):
                prod[top, j] = 1.0
            k = keys[top]
            for i in range(degs[top]):
                d = _degree(_child(k, i), cdf)
                for j in range(P):
                    prod[top, j] *= leaf[d, j]
            finished = True
        elif nxt[top] < degs[top]:
            c = _child(keys[top], nxt[top])
            nxt[top] += 1
            top += 1
            keys[top] = c
            degs[top] = _degree(c, cdf)
            nxt[top] = 0
            for j in range(P):
                prod[top, j] = 1.0
        else:
            finished = True
        if finished:
            for j in range(P):
                q[j] = 1.0 - prod[top, j]
            if top == 0:
                for j in range(P):
                    out[j] = q[j]
                return out
            for j in range(P):
                prod[top - 1, j] *= 1.0 - ps[j] * q[j]
            top -= 1


@njit(cache=True)
def level_sizes(root, n, cdf):
    """Z_0, ..., Z_n by depth-first traversal, storing only one path."""
    sizes = np.zeros(n + 1, dtype=np.int64)
    sizes[0] = 1
    if n == 0:
        return sizes
    keys = np.empty(n, dtype=np.uint64)
    degs = np.empty(n, dtype=np.int64)
    nxt = np.zeros(n, dtype=np.int64)
    keys[0] = root
    degs[0] = _degree(root, cdf)
    top = 0
    while top >= 0:
        if top == n - 1:
            sizes[n] += degs[top]
            top -= 1
        elif nxt[top] < degs[top]:
            c = _child(keys[top], nxt[top])
            nxt[top] += 1
            top += 1
            sizes[top] += 1
            keys[top] = c
            degs[top] = _degree(c, cdf)
            nxt[top] = 0
        else:
            top -= 1
    return sizes


# ---------------------------------------------------------------------------
# Monte Carlo percolation on a hashed tree


@njit(inline="always")
def _survives(key, level, n, cdf, salt, p, skeys, sdegs, snxt):
    """Is there an open path from ``key`` (at ``level``) down to level n?"""
    if level >= n:
        return True
    top = 0
    skeys[0] = key
    sdegs[0] = _degree(key, cdf)
    snxt[0] = 0
    while True:
        if level + top == n:
            return True
        if snxt[top] < sdegs[top]:
            c = _child(skeys[top], snxt[top])
            snxt[top] += 1
            if _open(c, salt, p):
                top += 1
                skeys[top] = c
                sdegs[top] = _degree(c, cdf)
                snxt[top] = 0
        else:
            if top == 0:
                return False
            top -= 1


@njit(cache=True, parallel=True)
def mc_survival(root, n, cdf, salts, p):
    """Indicator per replicate that the open cluster of the root reaches level n."""
    reps = salts.size
    out = np.zeros(reps, dtype=np.uint8)
    for r in prange(reps):
        skeys = np.empty(n + 1, dtype=np.uint64)
        sdegs = np.empty(n + 1, dtype=np.int64)
        snxt = np.empty(n + 1, dtype=np.int64)
        if _survives(root, 0, n, cdf, salts[r], p, skeys, sdegs, snxt):
            out[r] = 1
    return out


@njit(cache=True, parallel=True)
def mc_branching_depth(root, n, cdf, salts, p):
    """Depth of the first branching of the open subtree reaching level n.

    Returns -1 for replicates that do not reach level n and n when the
    surviving path has not branched by level n.
    """
    reps = salts.size
    out = np.empty(reps, dtype=np.int64)
    for r in prange(reps):
        skeys = np.empty(n + 1, dtype=np.uint64)
        sdegs = np.empty(n + 1, dtype=np.int64)
        snxt = np.empty(n + 1, dtype=np.int64)
        salt = salts[r]
        v = root
        depth = 0
        res = -1
        while True:
            if depth == n:
                res = n
                break
            d = _degree(v, cdf)
            cnt = 0
            nv = v
            for i in range(d):
                c = _child(v, i)
                if _open(c, salt, p) and _survives(c, depth + 1, n, cdf, salt, p, skeys, sdegs, snxt):
                    cnt += 1
                    nv = c
                    if cnt == 2:
                        break
            if cnt == 0:
                res = -1
                break
            if cnt >= 2:
                res = depth
                break
            v = nv
            depth += 1
        out[r] = res
    return out


# ---------------------------------------------------------------------------
# collapsed survivor skeleton and monomial evaluation


@njit(inline="always")
def _walk(c, level, n, cdf, salt, p, skeys, sdegs, snxt):
    """Follow a surviving vertex down its unary stretch.

    Returns (key, level, length, boundary) of the first vertex with at least
    two surviving children, or of the level-n vertex reached first.
    """
    w = c
    lev = level
    length = 1
    while True:
        if lev == n:
            return w, lev, length, True
        d = _degree(w, cdf)
        cnt = 0
        nw = w
        for i in range(d):
            x = _child(w, i)
            if _open(x, salt, p) and _survives(x, lev + 1, n, cdf, salt, p, skeys, sdegs, snxt):
                cnt += 1
                nw = x
                if cnt == 2:
                    break
        if cnt >= 2:
            return w, lev, length, False
        w = nw
        lev += 1
        length += 1


@njit(cache=True)
def _skeleton(root, n, cdf, salt, p, dmax, cap, sk_key, sk_level, sk_len, sk_bnd, sk_nch, sk_first, sk_depth,
              skeys, sdegs, snxt):
    """Breadth-first collapsed skeleton of the survivors, expanding nodes above
    collapsed depth ``dmax``. Returns the node count, 0 when the root dies, or
    -1 when ``cap`` nodes would be exceeded."""
    if not _survives(root, 0, n, cdf, salt, p, skeys, sdegs, snxt):
        return 0
    sk_key[0] = root
    sk_level[0] = 0
    sk_len[0] = 0
    sk_bnd[0] = n == 0
    sk_depth[0] = 0
    sk_nch[0] = 0
    sk_first[0] = 0
    count = 1
    head = 0
    while head < count:
        s = head
        head += 1
        sk_first[s] = count
        sk_nch[s] = 0
        if sk_bnd[s] or sk_depth[s] >= dmax:
            continue
        v = sk_key[s]
        lev = sk_level[s]
        d = _degree(v, cdf)
        for i in range(d):
            c = _child(v, i)
            if _open(c, salt, p) and _survives(c, lev + 1, n, cdf, salt, p, skeys, sdegs, snxt):
                if count >= cap:
                    return -1
                w, wl, length, bnd = _walk(c, lev + 1, n, cdf, salt, p, skeys, sdegs, snxt)
                sk_key[count] = w
                sk_level[count] = wl
                sk_len[count] = length
                sk_bnd[count] = bnd
                sk_depth[count] = sk_depth[s] + 1
                sk_nch[s] += 1
                count += 1
    return count


@njit(cache=True)
def _match(vn, base, v_par, v_ord, v_nch, v_F, sk_len, sk_bnd, sk_nch, sk_first, vmap):
    """Value of one monomial on a skeleton, as (value, indeterminate).

    V is given in preorder with parent indices and child ordinals. A V node
    whose image is a boundary node leaves the answer undetermined unless some
    other node already rules the match out.
    """
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
            s = sk_first[sp] + v_ord[base + a]
            value *= float(sk_len[s]) ** v_F[base + a]
        vmap[a] = s
        k = v_nch[base + a]
        if sk_bnd[s]:
            indet = True
            vmap[a] = -1
            continue
        if k == 0:
            continue
        if sk_nch[s] != k:
            return 0.0, False
    if indet:
        return 0.0, True
    return value, False


@njit(cache=True, parallel=True)
def mc_monomial_values(root, n, cdf, salts, ps, dmax, cap, term_p, term_base, term_vn,
                       v_par, v_ord, v_nch, v_F):
    """Per-replicate values of each monomial term.

    Returns values (reps x terms), an indeterminate mask and a per-replicate
    overflow flag (skeleton exceeded ``cap`` nodes).
    """
    reps = salts.size
    T = term_p.size
    P = ps.size
    vals = np.zeros((reps, T))
    indet = np.zeros((reps, T), dtype=np.uint8)
    overflow = np.zeros(reps, dtype=np.uint8)
    vmax = 1
    for t in range(T):
        vmax = max(vmax, term_vn[t])
    for r in prange(reps):
        skeys = np.empty(n + 1, dtype=np.uint64)
        sdegs = np.empty(n + 1, dtype=np.int64)
        snxt = np.empty(n + 1, dtype=np.int64)
        sk_key = np.empty(cap, dtype=np.uint64)
        sk_level = np.empty(cap, dtype=np.int64)
        sk_len = np.empty(cap, dtype=np.int64)
        sk_bnd = np.empty(cap, dtype=np.bool_)
        sk_nch = np.empty(cap, dtype=np.int64)
        sk_first = np.empty(cap, dtype=np.int64)
        sk_depth = np.empty(cap, dtype=np.int64)
        vmap = np.empty(vmax, dtype=np.int64)
        for j in range(P):
            cnt = _skeleton(root, n, cdf, salts[r], ps[j], dmax, cap, sk_key, sk_level, sk_len, sk_bnd,
                            sk_nch, sk_first, sk_depth, skeys, sdegs, snxt)
            if cnt < 0:
                overflow[r] = 1
                continue
            if cnt == 0:
                continue
            for t in range(T):
                if term_p[t] != j:
                    continue
                v, ind = _match(term_vn[t], term_base[t], v_par, v_ord, v_nch, v_F,
                                sk_len, sk_bnd, sk_nch, sk_first, vmap)
                vals[r, t] = v
                indet[r, t] = 1 if ind else 0
    return vals, indet, overflow


# ---------------------------------------------------------------------------
# subset-statistic dynamic programme


@njit(cache=True)
def subset_dp(deg_all, level_start, n, pc, J, K):
    """X_n^{(j,k)} for a tree given by concatenated level degree arrays.

    A vertex table holds, for subsets of size j of its level-n descendants,
    the sum of pc^|E| binom(|E|, k) over the spanned edges E below it.
    """
    X = np.zeros((J + 1, K + 1))
    if n == 0:
        X[0, 0] = 1.0
        if J >= 1:
            X[1, 0] = 1.0
        return X
    nlev = 0
    for v in range(level_start[n - 1], level_start[n]):
        nlev += deg_all[v]
    S = np.zeros((nlev, J + 1, K + 1))
    for v in range(nlev):
        S[v, 0, 0] = 1.0
        if J >= 1:
            S[v, 1, 0] = 1.0
    L = np.empty((J + 1, K + 1))
    for level in range(n - 1, -1, -1):
        lo = level_start[level]
        hi = level_start[level + 1]
        acc = np.zeros((hi - lo, J + 1, K + 1))
        tmp = np.empty((J + 1, K + 1))
        c = 0
        for v in range(hi - lo):
            acc[v, 0, 0] = 1.0
            for _ in range(deg_all[lo + v]):
                L[:, :] = 0.0
                L[0, 0] = 1.0
                for j in range(1, J + 1):
                    L[j, 0] = pc * S[c, j, 0]
                    for k in range(1, K + 1):
                        L[j, k] = pc * (S[c, j, k] + S[c, j, k - 1])
                tmp[:, :] = 0.0
                for a in range(J + 1):
                    for b in range(K + 1):
                        x = acc[v, a, b]
                        if x == 0.0:
                            continue
                        for j in range(J + 1 - a):
                            for k in range(K + 1 - b):
                                tmp[a + j, b + k] += x * L[j, k]
                acc[v, :, :] = tmp
                c += 1
        S = acc
    return S[0].copy()
