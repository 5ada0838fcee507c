"""Collapsed trees, edge-weight monomials and their p-derivatives.

A collapsed tree is an ordered rooted tree in which no vertex other than
the root has exactly one child. Collapsing a tree contracts every unary path
to one edge whose weight d(e) is the path length. A monomial F assigns an
exponent to each edge, and <T, V, F> = prod d(e)^F(e) when V is the collapsed
shape of an initial subtree of T (zero otherwise).

Trees are nested tuples: a vertex is the tuple of its children, so ``()`` is
a leaf and ``((), ())`` is the cherry. The text form writes every vertex as a
pair of parentheses around its children: ``"(()())"``. Edges are indexed in
preorder of their lower endpoint.
"""
from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from ._kernels import _hash
from .annealed import annealed_survival, thinned_offspring_pmf
from .gwtree import SampledTree
from .offspring import OffspringDistribution
from .quenched import default_depth

INDETERMINATE = "indeterminate"
INDETERMINATE_WARN = 0.01
SKELETON_CAP = 1 << 16
CHUNK = 1 << 15
DERIVATIVE_STEP = 5e-3


# ---------------------------------------------------------------------------
# text form


def parse_tree(text: str) -> tuple:
    """Parse ``"(()())"`` into nested tuples."""
    s = "".join(text.split())
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(s) or s[pos] != "(":
            raise ValueError(f"expected '(' at position {pos} in {text!r}")
        pos += 1
        kids = []
        while pos < len(s) and s[pos] == "(":
            kids.append(node())
        if pos >= len(s) or s[pos] != ")":
            raise ValueError(f"expected ')' at position {pos} in {text!r}")
        pos += 1
        return tuple(kids)

    out = node()
    if pos != len(s):
        raise ValueError(f"trailing characters in {text!r}")
    return out


def format_tree(shape: tuple) -> str:
    return "(" + "".join(format_tree(c) for c in shape) + ")"


def _preorder(shape):
    """Preorder arrays: children count, parent index, child ordinal, depth."""
    nch, par, ordi, depth = [], [], [], []

    def walk(node, parent, k, d):
        idx = len(nch)
        nch.append(len(node))
        par.append(parent)
        ordi.append(k)
        depth.append(d)
        for i, c in enumerate(node):
            walk(c, idx, i, d + 1)

    walk(shape, -1, 0, 0)
    return nch, par, ordi, depth


@dataclass(frozen=True)
class CollapsedTree:
    """Ordered rooted tree without unary vertices below the root."""

    shape: tuple

    def __post_init__(self):
        def check(node, is_root):
            if len(node) == 1 and not is_root:
                raise ValueError(f"non-root vertex with one child in {format_tree(self.shape)}")
            for c in node:
                check(c, False)

        check(self.shape, True)

    @classmethod
    def parse(cls, text: str) -> "CollapsedTree":
        return cls(parse_tree(text))

    def __str__(self):
        return format_tree(self.shape)

    @cached_property
    def arrays(self):
        return _preorder(self.shape)

    @property
    def n_vertices(self) -> int:
        return len(self.arrays[0])

    @property
    def n_edges(self) -> int:
        return self.n_vertices - 1

    @property
    def n_leaves(self) -> int:
        if self.n_edges == 0:
            return 0
        return sum(1 for k in self.arrays[0] if k == 0)

    @property
    def height(self) -> int:
        return max(self.arrays[3])


@dataclass(frozen=True)
class Monomial:
    """Exponents F(e) >= 0 on the edges of a collapsed tree, in preorder."""

    exponents: tuple

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(x) for x in self.exponents))
        if any(x < 0 for x in self.exponents):
            raise ValueError("exponents must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "Monomial":
        text = text.strip()
        return cls(tuple(int(x) for x in text.split(",")) if text else ())

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __str__(self):
        return ",".join(map(str, self.exponents))


def _check_pair(V, F):
    if len(F.exponents) != V.n_edges:
        raise ValueError(f"monomial has {len(F.exponents)} exponents but {V} has {V.n_edges} edges")


# single edge carrying exponent 1: E|B| in monomial form
V1 = CollapsedTree(((),))
F1 = Monomial((1,))
CHERRY = CollapsedTree(((), ()))


# ---------------------------------------------------------------------------
# collapsing and matching


def collapse(tree: tuple):
    """Phi(T) and the edge weights (path lengths) in preorder."""
    weights = []

    def down(node):
        length = 1
        while len(node) == 1:
            node = node[0]
            length += 1
        return node, length

    def build(node):
        kids = []
        for c in node:
            end, length = down(c)
            weights.append(length)
            kids.append(build(end))
        return tuple(kids)

    # the root may keep a single child, so collapsing starts below it
    shape = build(tree)
    return CollapsedTree(shape), tuple(weights)


def match_initial_subtree(survivor: tuple, V: CollapsedTree, n: int | None = None):
    """Edge weights of the initial subtree of ``survivor`` whose collapse is V.

    Returns None when there is none. With ``n`` given, vertices at depth n
    are truncation boundaries whose branching is unknown; if V needs one of
    them the result is INDETERMINATE (unless a mismatch elsewhere already
    decides the answer).
    """
    weights = []
    indet = False

    def down(node, depth):
        length = 1
        while len(node) == 1 and (n is None or depth < n):
            node = node[0]
            depth += 1
            length += 1
        return node, depth, length

    def visit(vnode, tnode, depth, is_root):
        nonlocal indet
        if n is not None and depth >= n:
            indet = True
            return True
        if not vnode:
            return is_root or len(tnode) != 1
        if len(tnode) != len(vnode):
            return False
        for vc, tc in zip(vnode, tnode):
            end, d, length = down(tc, depth + 1)
            weights.append(length)
            if not visit(vc, end, d, False):
                return False
        return True

    if survivor is None:
        return None
    if not visit(V.shape, survivor, 0, True):
        return None
    if indet:
        return INDETERMINATE
    return tuple(weights)


def monomial_value(weights, F: Monomial) -> float:
    """prod d(e)^F(e) for matched weights; 0 for no match."""
    if weights is None or weights is INDETERMINATE:
        return 0.0
    return float(math.prod(w**f for w, f in zip(weights, F.exponents)))


def survivor_tree(tree: SampledTree, p: float, n: int, rep_salt) -> tuple | None:
    """Open subtree of vertices joined to level n, for one percolation replicate.

    Uses the same replicate uniforms as the Monte Carlo kernels; meant for
    small materialized trees.
    """
    from ._kernels._numpy import _alive

    keys = [tree.keys(level) for level in range(n + 1)]
    degs = [tree.degrees(level) for level in range(n + 1)]
    offs = [tree.child_offsets(level) for level in range(n)]
    if n == 0:
        return ()
    alive, _ = _alive(keys, degs, offs, n, np.array([rep_salt], dtype=np.uint64), p)
    if not alive[0][0, 0]:
        return None

    def build(level, v):
        if level == n:
            return ()
        lo, hi = offs[level][v], offs[level][v + 1]
        return tuple(build(level + 1, c) for c in range(lo, hi) if alive[level + 1][0, c])

    return build(0, 0)


# ---------------------------------------------------------------------------
# symbolic derivative


class _Node:
    __slots__ = ("kids", "f")

    def __init__(self, kids, f):
        self.kids = kids
        self.f = f


def _to_nodes(V, F):
    it = iter((0,) + F.exponents)

    def build(shape):
        f = next(it)
        node = _Node([], f)
        node.kids = [build(c) for c in shape]
        return node

    return build(V.shape)


def _from_nodes(root):
    fs = []

    def walk(node, is_root):
        if not is_root:
            fs.append(node.f)
        return tuple(walk(c, False) for c in node.kids)

    shape = walk(root, True)
    return CollapsedTree(shape), Monomial(tuple(fs))


def _copy(node):
    return _Node([_copy(c) for c in node.kids], node.f)


def _nodes_preorder(root):
    out = []

    def walk(node):
        out.append(node)
        for c in node.kids:
            walk(c)

    walk(root)
    return out


@dataclass(frozen=True)
class Term:
    """``coef * D(V, F)``; ``coef`` is an integer whose sign is the term's sign."""

    coef: int
    V: CollapsedTree
    F: Monomial
    kind: str = ""

    @property
    def sign(self) -> int:
        return 1 if self.coef > 0 else -1


class SignedTermList(list):
    """Terms whose signed sum, divided by p, is d/dp D(V, F)."""

    def merged(self) -> "SignedTermList":
        acc = defaultdict(int)
        order = []
        for t in self:
            key = (t.V.shape, t.F.exponents)
            if key not in acc:
                order.append((t.V, t.F))
            acc[key] += t.coef
        return SignedTermList(Term(acc[(V.shape, F.exponents)], V, F) for V, F in order
                              if acc[(V.shape, F.exponents)] != 0)


def derivative_expansion(V: CollapsedTree, F: Monomial) -> SignedTermList:
    """Signed terms with d/dp D(T, F, V, p) = p^-1 * sum coef_i D(T, F_i, V_i, p).

    Four constructions, each placing exponent 1 on one new or lengthened edge:

    * edge: F(e) += 1, sign +;
    * leaf: a leaf gets two children, exponent 1 on either new edge, sign +;
    * split: an edge e is cut at a new vertex m which also gets a new leaf
      child, left or right of the lower half; the exponent F(e) is shared
      binomially between the halves, weight -binom(F(e), k);
    * slot: an interior vertex (the root included) gets a new leaf child at
      any of its deg + 1 positions, sign -.

    A single vertex is the survival probability and expands to the single
    edge with exponent 1.
    """
    _check_pair(V, F)
    out = SignedTermList()
    if V.n_edges == 0:
        out.append(Term(1, V1, F1, "edge"))
        return out
    base = _to_nodes(V, F)
    count = len(_nodes_preorder(base))

    def variant(idx, mutate):
        root = _copy(base)
        nodes = _nodes_preorder(root)
        parents = {id(c): p for p in nodes for c in p.kids}
        mutate(nodes[idx], parents.get(id(nodes[idx])))
        return _from_nodes(root)

    for idx in range(1, count):

        def bump(node, parent):
            node.f += 1

        out.append(Term(1, *variant(idx, bump), "edge"))
    for idx in range(1, count):
        if _nodes_preorder(base)[idx].kids:
            continue
        for left in (1, 0):

            def sprout(node, parent, left=left):
                node.kids = [_Node([], left), _Node([], 1 - left)]

            out.append(Term(1, *variant(idx, sprout), "leaf"))
    for idx in range(1, count):
        f = _nodes_preorder(base)[idx].f
        for side in ("left", "right"):
            for k in range(f + 1):

                def split(node, parent, side=side, k=k, f=f):
                    pos = parent.kids.index(node)
                    node.f = f - k
                    new_leaf = _Node([], 1)
                    mid = _Node([new_leaf, node] if side == "left" else [node, new_leaf], k)
                    parent.kids[pos] = mid

                out.append(Term(-math.comb(f, k), *variant(idx, split), "split"))
    for idx in range(count):
        node0 = _nodes_preorder(base)[idx]
        if not node0.kids:
            continue
        for slot in range(len(node0.kids) + 1):

            def insert(node, parent, slot=slot):
                node.kids.insert(slot, _Node([], 1))

            out.append(Term(-1, *variant(idx, insert), "slot"))
    return out


@dataclass(frozen=True)
class ScaledTerm:
    """``coef * p**p_power * D(V, F)``."""

    coef: int
    p_power: int
    V: CollapsedTree
    F: Monomial


def iterated_expansion(V: CollapsedTree, F: Monomial, order: int) -> list:
    """The ``order``-th p-derivative of D(V, F) as merged scaled terms."""
    terms = {((V.shape, F.exponents), 0): (1, V, F)}
    for _ in range(order):
        nxt = defaultdict(int)
        objs = {}
        for ((key, power), (coef, v, f)) in terms.items():
            # d/dp p^a D = a p^(a-1) D + p^(a-1) sum_i c_i D_i
            if power:
                nxt[(key, power - 1)] += coef * power
                objs[key] = (v, f)
            for t in derivative_expansion(v, f):
                k2 = (t.V.shape, t.F.exponents)
                nxt[(k2, power - 1)] += coef * t.coef
                objs[k2] = (t.V, t.F)
        terms = {k: (c, *objs[k[0]]) for k, c in nxt.items() if c != 0}
    out = [ScaledTerm(c, power, v, f) for (key, power), (c, v, f) in terms.items()]
    out.sort(key=lambda t: (t.p_power, t.V.n_edges, str(t.V), t.F.exponents))
    return out


# ---------------------------------------------------------------------------
# annealed closed forms


def _eulerian(n):
    row = [1]
    for m in range(1, n + 1):
        row = [(k + 1) * (row[k] if k < len(row) else 0) + (m - k) * (row[k - 1] if k >= 1 else 0)
               for k in range(m)]
    return row


def geometric_moment(a: float, f: int) -> float:
    """E G^f for G geometric on {1, 2, ...} with P(G > k) = a^k."""
    if f == 0:
        return 1.0
    poly = sum(c * a**k for k, c in enumerate(_eulerian(f)))
    return poly / (1.0 - a) ** f


def annealed_monomial_expectation(dist: OffspringDistribution, V: CollapsedTree, F: Monomial, p: float) -> float:
    """E D(T, F, V, p) over the Galton-Watson law (exact for deterministic trees).

    Surviving children counts are i.i.d. with the thinned law, each collapsed
    edge is geometric with continuation probability A_p, the root may have one
    child and every other matched interior vertex has its V degree (>= 2).
    """
    _check_pair(V, F)
    g = annealed_survival(dist, p)
    if g == 0.0:
        return 0.0
    if V.n_edges == 0:
        return g
    pmf = thinned_offspring_pmf(dist, p)
    a = pmf[1]
    branch = 1.0 - a
    nch = V.arrays[0]

    def prob(k):
        return pmf[k] if k < pmf.size else 0.0

    out = g * prob(nch[0])
    for k in nch[1:]:
        if k:
            out *= prob(k) / branch
    for f in F.exponents:
        out *= geometric_moment(a, f)
    return float(out)


def annealed_exponential_moment(dist: OffspringDistribution, V: CollapsedTree, p: float, r: float) -> float:
    """E[(1+r)^{|E(T_p(V))|}; V matches] for the Galton-Watson law; inf when (1+r) A_p >= 1."""
    g = annealed_survival(dist, p)
    pmf = thinned_offspring_pmf(dist, p)
    a = pmf[1]
    x = 1.0 + r
    if x * a >= 1.0:
        return math.inf
    mgf = (1 - a) * x / (1 - a * x)
    nch = V.arrays[0]
    out = g * (pmf[nch[0]] if nch[0] < pmf.size else 0.0)
    for k in nch[1:]:
        if k:
            out *= (pmf[k] if k < pmf.size else 0.0) / (1 - a)
    return float(out * mgf**V.n_edges)


def scaling_exponent_bound(V: CollapsedTree, F: Monomial) -> int:
    """2 * leaves - edges - deg F: D is O(eps^lambda) for any smaller lambda near p_c."""
    return 2 * V.n_leaves - V.n_edges - F.degree


def scaling_slope(dist: OffspringDistribution, V: CollapsedTree, F: Monomial, eps) -> float:
    """Least-squares log-log slope of the annealed D against eps = p - p_c."""
    from .offspring import critical_parameter

    pc = critical_parameter(dist)
    eps = np.asarray(eps, dtype=float)
    vals = np.array([annealed_monomial_expectation(dist, V, F, pc + e) for e in eps])
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


# ---------------------------------------------------------------------------
# Monte Carlo


def _flatten(items):
    """Concatenate (V, F) pairs into the arrays read by the kernel."""
    par, ordi, nch, fs, base, size = [], [], [], [], [], []
    for V, F in items:
        _check_pair(V, F)
        k, pa, o, _ = V.arrays
        base.append(len(nch))
        size.append(len(k))
        nch.extend(k)
        par.extend(pa)
        ordi.extend(o)
        fs.extend((0,) + F.exponents)
    as64 = lambda x: np.ascontiguousarray(x, dtype=np.int64)  # noqa: E731
    return as64(par), as64(ordi), as64(nch), np.ascontiguousarray(fs, dtype=np.float64), as64(base), as64(size)


@dataclass
class _Batch:
    """Running sums for term values and linear combinations of them."""

    T: int
    C: int
    n: int = 0
    term_sum: np.ndarray = None
    term_sq: np.ndarray = None
    combo_sum: np.ndarray = None
    combo_sq: np.ndarray = None
    indet: np.ndarray = None
    overflow: int = 0

    def __post_init__(self):
        self.term_sum = np.zeros(self.T)
        self.term_sq = np.zeros(self.T)
        self.combo_sum = np.zeros(self.C)
        self.combo_sq = np.zeros(self.C)
        self.indet = np.zeros(self.T, dtype=np.int64)

    def add(self, vals, indet, overflow, weights):
        self.n += vals.shape[0]
        self.term_sum += vals.sum(axis=0)
        self.term_sq += (vals * vals).sum(axis=0)
        combos = vals @ weights.T
        self.combo_sum += combos.sum(axis=0)
        self.combo_sq += (combos * combos).sum(axis=0)
        self.indet += indet.sum(axis=0, dtype=np.int64)
        self.overflow += int(overflow.sum())

    @staticmethod
    def _mean_se(s, sq, n):
        mean = s / n
        var = np.maximum(sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return mean, np.sqrt(var / n)

    def terms(self):
        return self._mean_se(self.term_sum, self.term_sq, self.n)

    def combos(self):
        return self._mean_se(self.combo_sum, self.combo_sq, self.n)


def _simulate(tree: SampledTree, terms, weights, n, reps, seed, chunk=CHUNK):
    """Monte Carlo over replicates for terms (p, V, F), accumulating ``weights @ values``."""
    if n > tree.depth:
        raise ValueError(f"n={n} exceeds the tree depth {tree.depth}")
    ps = sorted({float(p) for p, _, _ in terms})
    p_index = {p: i for i, p in enumerate(ps)}
    term_p = np.array([p_index[float(p)] for p, _, _ in terms], dtype=np.int64)
    par, ordi, nch, fs, base, size = _flatten([(V, F) for _, V, F in terms])
    dmax = max(V.height for _, V, _ in terms)
    maxdeg = tree.offspring.max_degree
    cap = int(min(sum(maxdeg**d for d in range(dmax + 1)), SKELETON_CAP))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    batch = _Batch(len(terms), weights.shape[0])
    salts = _hash.replicate_salts(seed, reps)
    kernel = _kernels.get("mc_monomial_values")
    cdf = np.ascontiguousarray(tree.offspring.cdf)
    for start in range(0, reps, chunk):
        vals, indet, overflow = kernel(tree.root_key, n, cdf, salts[start:start + chunk], np.array(ps), dmax, cap,
                                       term_p, base, size, par, ordi, nch, fs)
        batch.add(np.asarray(vals), np.asarray(indet), np.asarray(overflow), weights)
    return batch


@dataclass(frozen=True)
class MonomialEstimate:
    estimate: float
    se: float
    indeterminate_fraction: float
    reps: int
    n: int

    @property
    def status(self) -> str:
        return "warning" if self.indeterminate_fraction > INDETERMINATE_WARN else "ok"

    def __iter__(self):
        return iter((self.estimate, self.se))


def _warn_indeterminate(frac, n):
    if frac > INDETERMINATE_WARN:
        warnings.warn(f"{frac:.2%} of replicates undecided at truncation depth {n}; increase n", RuntimeWarning,
                      stacklevel=3)


def mc_monomial_expectation(tree: SampledTree, V: CollapsedTree, F: Monomial, p: float, n: int, reps: int,
                            seed: int) -> MonomialEstimate:
    """Average of <T_p, V, F> over percolation replicates on a fixed tree."""
    batch = _simulate(tree, [(p, V, F)], [[1.0]], n, reps, seed)
    mean, se = batch.terms()
    frac = (batch.indet[0] + batch.overflow) / reps
    _warn_indeterminate(frac, n)
    return MonomialEstimate(float(mean[0]), float(se[0]), float(frac), reps, n)


def matched_edge_weights(tree: SampledTree, V: CollapsedTree, p: float, n: int, reps: int, seed: int) -> np.ndarray:
    """Edge weights d(e) of every replicate in which V matches (rows) by edge (columns)."""
    zero = Monomial((0,) * V.n_edges)
    unit = [Monomial(tuple(int(i == e) for i in range(V.n_edges))) for e in range(V.n_edges)]
    par, ordi, nch, fs, base, size = _flatten([(V, zero)] + [(V, u) for u in unit])
    T = 1 + V.n_edges
    salts = _hash.replicate_salts(seed, reps)
    cap = int(min(sum(tree.offspring.max_degree**d for d in range(V.height + 1)), SKELETON_CAP))
    vals, indet, _ = _kernels.get("mc_monomial_values")(
        tree.root_key, n, np.ascontiguousarray(tree.offspring.cdf), salts, np.array([float(p)]), V.height, cap,
        np.zeros(T, dtype=np.int64), base, size, par, ordi, nch, fs)
    vals = np.asarray(vals)
    hit = vals[:, 0] > 0
    return vals[hit, 1:].astype(np.int64)


@dataclass(frozen=True)
class DerivativeReport:
    """Finite difference of D against p^-1 times the signed expansion sum."""

    p: float
    h: float
    n: int
    reps: int
    fd_derivative: float
    expansion_derivative: float
    se_fd: float
    se_expansion: float
    se: float
    discretization: float
    indeterminate_fraction: float
    terms: int
    passed: bool

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "passed"}
        out["pass"] = self.passed
        return out


def verify_derivative_identity(tree: SampledTree, V: CollapsedTree, F: Monomial, p: float,
                               h: float = DERIVATIVE_STEP, reps: int = 10**5, seed: int = 0,
                               n: int | None = None, sigmas: float = 3.0) -> DerivativeReport:
    """Check d/dp D(V, F) = p^-1 sum_i coef_i D(V_i, F_i) on one tree.

    Both sides use the same replicate uniforms at every p, so the s.e. of the
    paired per-replicate difference is the combined s.e. The central
    difference's O(h^2) bias is estimated by Richardson against step 2h and
    reported, not added to the tolerance.
    """
    terms_sym = derivative_expansion(V, F).merged()
    if n is None:
        n = default_depth(tree.offspring, p - 2 * h)
    terms = [(p + h, V, F), (p - h, V, F), (p + 2 * h, V, F), (p - 2 * h, V, F)]
    terms += [(p, t.V, t.F) for t in terms_sym]
    T = len(terms)
    fd = np.zeros(T)
    fd[0], fd[1] = 1 / (2 * h), -1 / (2 * h)
    fd2 = np.zeros(T)
    fd2[2], fd2[3] = 1 / (4 * h), -1 / (4 * h)
    rhs = np.zeros(T)
    rhs[4:] = [t.coef / p for t in terms_sym]
    weights = np.array([fd, rhs, fd - rhs, fd2 - fd])
    batch = _simulate(tree, terms, weights, n, reps, seed)
    mean, se = batch.combos()
    frac = float((batch.indet.max() + batch.overflow) / reps)
    _warn_indeterminate(frac, n)
    passed = bool(abs(mean[2]) <= sigmas * se[2])
    return DerivativeReport(float(p), float(h), int(n), int(reps), float(mean[0]), float(mean[1]), float(se[0]),
                            float(se[1]), float(se[2]), float(abs(mean[3]) / 3), frac, len(terms_sym), passed)
