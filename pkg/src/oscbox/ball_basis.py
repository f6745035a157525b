"""Finite martingale ball-bases.

A filtration tree is the discrete model of a ball-basis: every node is a
ball, children partition their parent exactly, and leaves carry the measure.
This module builds such trees, computes hull balls, verifies the basis
axioms exhaustively, and implements the greedy Vitali covering selector and
exhausting ball sequences.

All values are immutable after construction; every operation here is a pure
function, safe to share across concurrent tasks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

LEAF_CAP = 1 << 22
PARTITION_RTOL = 1e-12
_PAIR_BLOCK = 256


class TreeError(ValueError):
    """A tree (or a ball handle into it) violates the filtration invariants."""


@dataclass(frozen=True)
class Ball:
    """Handle to one tree node with its measure cached."""

    node: int
    measure: float


@dataclass(frozen=True)
class BasisReport:
    """Empirically measured basis constants plus any axiom violations.

    k_constant        max over balls of mu(hull(B)) / mu(B)
    doubling_constant max over non-root balls of mu(parent) / mu(B)
    regularity_theta  min over intersecting pairs mu(B) <= mu(A) of
                      mu(hull(B) & A) / mu(hull(B))
    axiom_failures    list of (axiom tag, witness ball ids)
    """

    k_constant: float
    doubling_constant: float
    regularity_theta: float
    axiom_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.axiom_failures


class MeasureTree:
    """Finite filtration tree over 0-based node ids.

    Leaves are stored in depth-first order so that the leaf set of every
    node is a contiguous range; `leaf_lo[v]:leaf_hi[v]` indexes into that
    order. Input trees whose declared leaf order is not depth-first are
    normalized on construction (the builders here always emit DFS order).
    """

    def __init__(self, parent, children, measure, root, leaves=None):
        n = len(measure)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.children = [list(map(int, cs)) for cs in children]
        self.measure = np.asarray(measure, dtype=np.float64)
        self.root = int(root)
        if self.parent.shape != (n,) or len(self.children) != n:
            raise TreeError("parent/children/measure lengths disagree")
        self._validate_topology()
        self._index_leaves(leaves)
        self._validate_measures()

    # -- construction-time checks -------------------------------------

    def _validate_topology(self):
        n = self.n_nodes
        if not (0 <= self.root < n) or self.parent[self.root] != -1:
            raise TreeError("root must exist and have no parent")
        if np.count_nonzero(self.parent == -1) != 1:
            raise TreeError("exactly one root expected")
        for v in range(n):
            for c in self.children[v]:
                if not (0 <= c < n) or self.parent[c] != v:
                    raise TreeError(f"child link {v}->{c} is inconsistent")
        # reachability and depths in one DFS
        depth = np.full(n, -1, dtype=np.int64)
        stack = [(self.root, 0)]
        order = []
        while stack:
            v, d = stack.pop()
            if depth[v] != -1:
                raise TreeError("tree contains a cycle")
            depth[v] = d
            order.append(v)
            for c in reversed(self.children[v]):
                stack.append((c, d + 1))
        if len(order) != n:
            raise TreeError("every node must be reachable from the root")
        self.depth = depth
        self.max_depth = int(depth.max())
        self._dfs_order = order

    def _index_leaves(self, declared):
        is_leaf = np.array([not cs for cs in self.children], dtype=bool)
        dfs_leaves = [v for v in self._dfs_order if is_leaf[v]]
        if declared is not None:
            if sorted(map(int, declared)) != sorted(dfs_leaves):
                raise TreeError("declared leaves disagree with childless nodes")
        self.leaves = np.asarray(dfs_leaves, dtype=np.int64)
        self.n_leaves = len(dfs_leaves)
        pos = {v: i for i, v in enumerate(dfs_leaves)}
        lo = np.zeros(self.n_nodes, dtype=np.int64)
        hi = np.zeros(self.n_nodes, dtype=np.int64)
        for v in reversed(self._dfs_order):
            if is_leaf[v]:
                lo[v] = pos[v]
                hi[v] = pos[v] + 1
            else:
                lo[v] = min(lo[c] for c in self.children[v])
                hi[v] = max(hi[c] for c in self.children[v])
                if hi[v] - lo[v] != sum(hi[c] - lo[c] for c in self.children[v]):
                    raise TreeError("subtree leaves must be contiguous")
        self.leaf_lo = lo
        self.leaf_hi = hi
        self.leaf_measure = self.measure[self.leaves].copy()
        for arr in (self.parent, self.measure, self.leaves, self.leaf_lo,
                    self.leaf_hi, self.leaf_measure, self.depth):
            arr.setflags(write=False)

    def _validate_measures(self):
        if not np.all(np.isfinite(self.measure)) or np.any(self.measure <= 0.0):
            bad = [int(v) for v in np.where(self.measure <= 0.0)[0]]
            raise TreeError(f"every ball needs 0 < mu < inf, got violations at {bad}")
        for v in range(self.n_nodes):
            if self.children[v]:
                s = math.fsum(self.measure[c] for c in self.children[v])
                if abs(s - self.measure[v]) > PARTITION_RTOL * self.measure[v]:
                    raise TreeError(
                        f"children of {v} sum to {s!r}, node has {self.measure[v]!r}"
                    )
        root_mass = math.fsum(self.leaf_measure)
        if abs(root_mass - self.measure[self.root]) > PARTITION_RTOL * root_mass:
            raise TreeError("root measure must equal total leaf mass")

    # -- derived structure (computed once, read-only afterwards) ------

    @property
    def n_nodes(self) -> int:
        return len(self.measure)

    def _cache(self, name, build):
        val = self.__dict__.get(name)
        if val is None:
            val = build()
            self.__dict__[name] = val
        return val

    @property
    def levels(self):
        """Node ids grouped by depth."""
        def build():
            out = [[] for _ in range(self.max_depth + 1)]
            for v in range(self.n_nodes):
                out[self.depth[v]].append(v)
            return [np.asarray(l, dtype=np.int64) for l in out]
        return self._cache("_levels", build)

    @property
    def hull_id(self):
        """hull(B): the highest ancestor A of B with mu(A) <= 2 mu(B)."""
        def build():
            out = np.arange(self.n_nodes, dtype=np.int64)
            for v in range(self.n_nodes):
                a = v
                p = self.parent[a]
                while p != -1 and self.measure[p] <= 2.0 * self.measure[v]:
                    a = p
                    p = self.parent[a]
                out[v] = a
            out.setflags(write=False)
            return out
        return self._cache("_hull_id", build)

    @property
    def ancestor_matrix(self):
        """(n_nodes, max_depth+1) ids of ancestors; short chains pad with self."""
        def build():
            m = np.empty((self.n_nodes, self.max_depth + 1), dtype=np.int64)
            for v in range(self.n_nodes):
                a = v
                row = m[v]
                for k in range(self.max_depth + 1):
                    row[k] = a
                    if self.parent[a] != -1:
                        a = self.parent[a]
            m.setflags(write=False)
            return m
        return self._cache("_anc_matrix", build)

    @property
    def leaf_ancestor_at_level(self):
        """(n_leaves, max_depth+1): ancestor node of each leaf at each depth,
        clamped to the leaf itself once the leaf is shallower."""
        def build():
            m = np.empty((self.n_leaves, self.max_depth + 1), dtype=np.int64)
            for i, v in enumerate(self.leaves):
                chain = []
                a = v
                while a != -1:
                    chain.append(a)
                    a = self.parent[a]
                chain.reverse()  # root .. leaf
                for k in range(self.max_depth + 1):
                    m[i, k] = chain[k] if k < len(chain) else v
            m.setflags(write=False)
            return m
        return self._cache("_leaf_anc", build)

    @property
    def node_segments(self):
        """Concatenated per-node leaf index ranges: (gather, starts, ends).

        gather[starts[v]:ends[v]] lists the leaf positions under node v, for
        all nodes at once (total size sum of subtree sizes).
        """
        def build():
            sizes = self.leaf_hi - self.leaf_lo
            ends = np.cumsum(sizes)
            starts = ends - sizes
            gather = np.empty(int(ends[-1]), dtype=np.int64)
            for v in range(self.n_nodes):
                gather[starts[v]:ends[v]] = np.arange(self.leaf_lo[v], self.leaf_hi[v])
            for arr in (gather, starts, ends):
                arr.setflags(write=False)
            return gather, starts, ends
        return self._cache("_node_segments", build)

    @property
    def leaf_prefix_measure(self):
        """Prefix sums of leaf measures, length n_leaves + 1."""
        def build():
            p = np.concatenate([[0.0], np.cumsum(self.leaf_measure)])
            p.setflags(write=False)
            return p
        return self._cache("_leaf_prefix", build)

    # -- handles --------------------------------------------------------

    def ball(self, node: int) -> Ball:
        node = int(node)
        if not (0 <= node < self.n_nodes):
            raise TreeError(f"no node {node} in this tree")
        return Ball(node, float(self.measure[node]))

    def check_ball(self, b: Ball) -> int:
        if not (0 <= b.node < self.n_nodes):
            raise TreeError(f"ball node {b.node} not in tree")
        if b.measure != float(self.measure[b.node]):
            raise TreeError(f"ball {b.node} caches stale measure {b.measure!r}")
        return b.node

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def ancestors(self, node: int, include_self: bool = True):
        a = node if include_self else self.parent[node]
        while a != -1:
            yield int(a)
            a = self.parent[a]

    def contains(self, outer: int, inner: int) -> bool:
        return (self.leaf_lo[outer] <= self.leaf_lo[inner]
                and self.leaf_hi[inner] <= self.leaf_hi[outer])

    def intersects(self, a: int, b: int) -> bool:
        return (max(self.leaf_lo[a], self.leaf_lo[b])
                < min(self.leaf_hi[a], self.leaf_hi[b]))


# ---------------------------------------------------------------------------
# builders


def build_dyadic_tree(depth: int, dim: int = 1) -> MeasureTree:
    """Full 2^dim-ary tree of the given depth over the unit cube.

    Level-l nodes have measure 2^(-dim*l); all measures are exact binary
    floats so dyadic identities hold without rounding.
    """
    if depth < 1 or dim < 1:
        raise TreeError("depth and dim must be >= 1")
    arity = 1 << dim
    if arity ** depth > LEAF_CAP:
        raise TreeError(f"leaf count {arity}**{depth} exceeds cap {LEAF_CAP}")
    n_nodes = (arity ** (depth + 1) - 1) // (arity - 1)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    children = [[] for _ in range(n_nodes)]
    measure = np.empty(n_nodes, dtype=np.float64)
    # breadth-first ids: level l occupies a contiguous block
    level_start = 0
    level_size = 1
    measure[0] = 1.0
    for l in range(depth):
        nxt = level_start + level_size
        for i in range(level_size):
            v = level_start + i
            kids = [nxt + arity * i + j for j in range(arity)]
            children[v] = kids
            for c in kids:
                parent[c] = v
                measure[c] = 2.0 ** (-(dim * (l + 1)))
        level_start = nxt
        level_size *= arity
    return MeasureTree(parent, children, measure, root=0)


def build_weighted_tree(branching, leaf_weights) -> MeasureTree:
    """Uniform-arity tree per level with prescribed leaf weights.

    `branching[l]` children per node at level l; internal measures are the
    bottom-up sums of their children. Rejects non-positive weights and
    shape mismatches.
    """
    branching = [int(b) for b in branching]
    if any(b < 1 for b in branching):
        raise TreeError("branching factors must be >= 1")
    weights = [float(w) for w in leaf_weights]
    if any(not math.isfinite(w) or w <= 0.0 for w in weights):
        raise TreeError("leaf weights must be strictly positive")
    want = math.prod(branching) if branching else 1
    if len(weights) != want:
        raise TreeError(f"{want} leaves implied by branching, got {len(weights)}")
    if want > LEAF_CAP:
        raise TreeError("leaf count exceeds cap")

    level_sizes = [1]
    for b in branching:
        level_sizes.append(level_sizes[-1] * b)
    n_nodes = sum(level_sizes)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    children = [[] for _ in range(n_nodes)]
    measure = np.zeros(n_nodes, dtype=np.float64)
    starts = np.concatenate([[0], np.cumsum(level_sizes)])
    for l, b in enumerate(branching):
        for i in range(level_sizes[l]):
            v = starts[l] + i
            kids = [int(starts[l + 1] + b * i + j) for j in range(b)]
            children[v] = kids
            for c in kids:
                parent[c] = v
    leaf_block = starts[len(branching)]
    measure[leaf_block:leaf_block + len(weights)] = weights
    for l in range(len(branching) - 1, -1, -1):
        for i in range(level_sizes[l]):
            v = starts[l] + i
            measure[v] = math.fsum(measure[c] for c in children[v])
    return MeasureTree(parent, children, measure, root=0)


# ---------------------------------------------------------------------------
# hull, axioms, constants


def hull(tree: MeasureTree, b: Ball) -> Ball:
    """Highest ancestor A of b (possibly b itself) with mu(A) <= 2 mu(b)."""
    v = tree.check_ball(b)
    return tree.ball(int(tree.hull_id[v]))


def two_balls_check(tree: MeasureTree) -> list:
    """Scan all ordered node pairs (A, B) for the two-balls relation.

    Returns every pair with A & B nonempty, mu(A) <= 2 mu(B) and A not
    contained in hull(B); an empty list certifies the relation. The scan is
    exhaustive over the n^2 ordered pairs, vectorized in blocks.
    """
    lo, hi, mu = tree.leaf_lo, tree.leaf_hi, tree.measure
    h = tree.hull_id
    hlo, hhi = lo[h], hi[h]
    n = tree.n_nodes
    bad = []
    for a0 in range(0, n, _PAIR_BLOCK):
        a1 = min(n, a0 + _PAIR_BLOCK)
        alo = lo[a0:a1, None]
        ahi = hi[a0:a1, None]
        amu = mu[a0:a1, None]
        meets = np.maximum(alo, lo[None, :]) < np.minimum(ahi, hi[None, :])
        small = amu <= 2.0 * mu[None, :]
        inside = (alo >= hlo[None, :]) & (ahi <= hhi[None, :])
        viol = meets & small & ~inside
        for ai, bi in zip(*np.nonzero(viol)):
            bad.append((int(a0 + ai), int(bi)))
    return bad


def basis_report(tree: MeasureTree) -> BasisReport:
    """Measure the basis constants K, doubling, theta and re-check the axioms."""
    mu = tree.measure
    h = tree.hull_id
    k_constant = float(np.max(mu[h] / mu))
    non_root = np.arange(tree.n_nodes) != tree.root
    if non_root.any():
        doubling = float(np.max(mu[tree.parent[non_root]] / mu[non_root]))
    else:
        doubling = 1.0

    failures = []
    if np.any(mu <= 0.0):
        failures.append(("B1", [int(v) for v in np.where(mu <= 0.0)[0]]))
    over = np.where(mu[h] > 2.0 * mu)[0]
    if over.size:
        failures.append(("B4-hull-bound", [int(v) for v in over]))
    if tree.leaf_hi[tree.root] - tree.leaf_lo[tree.root] != tree.n_leaves:
        failures.append(("whole-space-ball", [tree.root]))
    pairs = two_balls_check(tree)
    if pairs:
        failures.append(("two-balls", pairs))

    theta = _regularity_theta(tree)
    return BasisReport(k_constant, doubling, theta, failures)


def _regularity_theta(tree: MeasureTree) -> float:
    # min over pairs mu(B) <= mu(A), B & A nonempty of mu(hull(B) & A)/mu(hull(B));
    # exhaustive over ordered pairs, blockwise.
    lo, hi, mu = tree.leaf_lo, tree.leaf_hi, tree.measure
    h = tree.hull_id
    hlo, hhi, hmu = lo[h], hi[h], mu[h]
    pref = tree.leaf_prefix_measure
    n = tree.n_nodes
    theta = np.inf
    for b0 in range(0, n, _PAIR_BLOCK):
        b1 = min(n, b0 + _PAIR_BLOCK)
        blo = lo[b0:b1, None]
        bhi = hi[b0:b1, None]
        bmu = mu[b0:b1, None]
        meets = (np.maximum(blo, lo[None, :]) < np.minimum(bhi, hi[None, :])) \
            & (bmu <= mu[None, :])
        ilo = np.maximum(hlo[b0:b1, None], lo[None, :])
        ihi = np.minimum(hhi[b0:b1, None], hi[None, :])
        inter = np.where(ilo < ihi, pref[np.minimum(ihi, tree.n_leaves)] - pref[ilo], 0.0)
        ratios = np.where(meets, inter / hmu[b0:b1, None], np.inf)
        theta = min(theta, float(ratios.min()))
    return theta


# ---------------------------------------------------------------------------
# exhausting sequences and Vitali selection


def exhausting_sequence(tree: MeasureTree, g: Ball) -> list:
    """Increasing ball chain G_1 = g, ..., G_m = root with hull(G_k) inside
    G_{k+1}; each step takes the smallest ancestor of measure >= 2 mu(G_k),
    falling back to the root when no ancestor doubles the measure."""
    v = tree.check_ball(g)
    chain = [v]
    while chain[-1] != tree.root:
        cur = chain[-1]
        nxt = None
        for a in tree.ancestors(cur, include_self=False):
            if tree.measure[a] >= 2.0 * tree.measure[cur]:
                nxt = a
                break
        chain.append(tree.root if nxt is None else nxt)
    return [tree.ball(v) for v in chain]


def vitali_select(tree: MeasureTree, e_leaves, family) -> list:
    """Greedy disjoint subfamily whose hulls cover the leaf set E.

    At each step, among family members disjoint from everything chosen so
    far, pick one of maximal measure (ties: smallest node id); this strictly
    dominates the half-of-supremum greedy rule. Raises if the family does
    not cover E.
    """
    e_leaves = sorted({int(v) for v in e_leaves})
    leaf_pos = {int(v): i for i, v in enumerate(tree.leaves)}
    for v in e_leaves:
        if v not in leaf_pos:
            raise TreeError(f"{v} is not a leaf")
    nodes = [tree.check_ball(b) for b in family]

    covered = np.zeros(tree.n_leaves, dtype=bool)
    for v in nodes:
        covered[tree.leaf_lo[v]:tree.leaf_hi[v]] = True
    need = np.zeros(tree.n_leaves, dtype=bool)
    for v in e_leaves:
        need[leaf_pos[v]] = True
    if np.any(need & ~covered):
        raise TreeError("family does not cover E")

    order = sorted(range(len(nodes)),
                   key=lambda i: (-tree.measure[nodes[i]], nodes[i]))
    taken = np.zeros(tree.n_leaves, dtype=bool)
    picked = []
    for i in order:
        v = nodes[i]
        if not taken[tree.leaf_lo[v]:tree.leaf_hi[v]].any():
            taken[tree.leaf_lo[v]:tree.leaf_hi[v]] = True
            picked.append(v)
    return [tree.ball(v) for v in picked]


# ---------------------------------------------------------------------------
# serialization


def tree_to_json(tree: MeasureTree) -> str:
    nodes = [
        {
            "id": v,
            "parent": None if tree.parent[v] == -1 else int(tree.parent[v]),
            "children": list(tree.children[v]),
            "measure": float(tree.measure[v]),
        }
        for v in range(tree.n_nodes)
    ]
    doc = {
        "nodes": nodes,
        "root": tree.root,
        "leaves": [int(v) for v in tree.leaves],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def tree_from_json(text: str) -> MeasureTree:
    doc = json.loads(text)
    recs = sorted(doc["nodes"], key=lambda r: r["id"])
    if [r["id"] for r in recs] != list(range(len(recs))):
        raise TreeError("node ids must be 0..n-1")
    parent = [-1 if r["parent"] is None else int(r["parent"]) for r in recs]
    children = [list(r["children"]) for r in recs]
    measure = [float(r["measure"]) for r in recs]
    return MeasureTree(parent, children, measure, root=int(doc["root"]),
                       leaves=doc.get("leaves"))
