"""Martingale differences, Burkholder transforms, square function, and the
ball-basis maximal function on filtration trees.

The level decomposition drives everything: with E_k the conditional
expectation onto the depth-k partition, the multiplier transform is
sum_k eps(A_k(x)) * (E_{k+1} - E_k) f(x), truncations stop the sum early,
and the starred variants track extrema of the partial sums. Array-level
helpers accept (n_leaves,) vectors or (n_leaves, m) batches so the harness
can sweep many restricted functions in one pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ball_basis import Ball, MeasureTree, TreeError, hull
from .functionals import (FunctionError, GridFunction, node_lr_averages,
                          node_means, node_weighted_sums)


@dataclass(frozen=True)
class TransformSpec:
    """Bounded multiplier sequence indexed by internal node id.

    Absent nodes default to 0; every value must lie in [-1, 1].
    """

    epsilon: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.epsilon.items():
            if abs(v) > 1.0:
                raise FunctionError(f"|eps[{k}]| = {abs(v)} exceeds 1")

    @classmethod
    def ones(cls, tree: MeasureTree) -> "TransformSpec":
        return cls({v: 1.0 for v in range(tree.n_nodes) if tree.children[v]})

    @classmethod
    def signs(cls, tree: MeasureTree, rng: np.random.Generator) -> "TransformSpec":
        internal = [v for v in range(tree.n_nodes) if tree.children[v]]
        vals = rng.choice([-1.0, 1.0], size=len(internal))
        return cls(dict(zip(internal, map(float, vals))))

    def as_array(self, tree: MeasureTree) -> np.ndarray:
        arr = np.zeros(tree.n_nodes)
        for k, v in self.epsilon.items():
            k = int(k)
            if not (0 <= k < tree.n_nodes) or not tree.children[k]:
                raise FunctionError(f"eps key {k} is not an internal node")
            arr[k] = v
        return arr

    def to_json(self) -> str:
        return json.dumps({str(k): v for k, v in sorted(self.epsilon.items())},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TransformSpec":
        return cls({int(k): float(v) for k, v in json.loads(text).items()})


# ---------------------------------------------------------------------------
# array-level cores (vectors or column batches)


def _level_mean(tree: MeasureTree, nm: np.ndarray, level: int) -> np.ndarray:
    idx = tree.leaf_ancestor_at_level[:, level]
    return nm[idx]


def _eps_at_level(tree: MeasureTree, eps_arr: np.ndarray, level: int) -> np.ndarray:
    return eps_arr[tree.leaf_ancestor_at_level[:, level]]


def transform_values(tree, vals, eps_arr, upto: int | None = None):
    """Multiplier transform of leaf values; `upto` truncates at that depth."""
    last = tree.max_depth - 1 if upto is None else upto
    nm = node_means(tree, vals)
    out = np.zeros_like(vals)
    prev = _level_mean(tree, nm, 0)
    for k in range(last + 1):
        cur = _level_mean(tree, nm, k + 1)
        e = _eps_at_level(tree, eps_arr, k)
        out += (e if vals.ndim == 1 else e[:, None]) * (cur - prev)
        prev = cur
    return out


def martingale_family_values(tree, vals, eps_arr, truncation_level: int) -> dict:
    """All six family operators from one pass over the level decomposition.

    Matches the standalone functions operation for operation, so the
    outputs agree bitwise; the sweep only shares the conditional
    expectations instead of recomputing them per operator.
    """
    nm = node_means(tree, vals)
    part = np.zeros_like(vals)
    sq = np.zeros_like(vals)
    prev = _level_mean(tree, nm, 0)
    out = {}
    star = plus = minus = None
    for k in range(tree.max_depth):
        cur = _level_mean(tree, nm, k + 1)
        diff = cur - prev
        e = _eps_at_level(tree, eps_arr, k)
        part = part + (e if vals.ndim == 1 else e[:, None]) * diff
        sq += diff ** 2
        prev = cur
        if k == truncation_level:
            out["truncated"] = part.copy()
        absp = np.abs(part)
        if star is None:
            star, plus, minus = absp, part.copy(), part.copy()
        else:
            np.maximum(star, absp, out=star)
            np.maximum(plus, part, out=plus)
            np.minimum(minus, part, out=minus)
    out["transform"] = part
    out.setdefault("truncated", part)
    out["maximal-star"] = star
    out["maximal-plus"] = plus
    out["maximal-minus"] = minus
    out["square"] = np.sqrt(sq)
    return out


def maximal_transform_values(tree, vals, eps_arr, mode: str):
    """Extrema over truncation depths of the partial transforms.

    mode 'star' is sup_n |M_n|, 'plus' is sup_n M_n, 'minus' is inf_n M_n.
    """
    if mode not in ("star", "plus", "minus"):
        raise FunctionError(f"unknown maximal mode {mode!r}")
    nm = node_means(tree, vals)
    part = np.zeros_like(vals)
    prev = _level_mean(tree, nm, 0)
    best = None
    for k in range(tree.max_depth):
        cur = _level_mean(tree, nm, k + 1)
        e = _eps_at_level(tree, eps_arr, k)
        part = part + (e if vals.ndim == 1 else e[:, None]) * (cur - prev)
        prev = cur
        cand = np.abs(part) if mode == "star" else part
        if best is None:
            best = cand.copy()
        elif mode == "minus":
            np.minimum(best, cand, out=best)
        else:
            np.maximum(best, cand, out=best)
    return best


def square_function_values(tree, vals):
    nm = node_means(tree, vals)
    acc = np.zeros_like(vals)
    prev = _level_mean(tree, nm, 0)
    for k in range(tree.max_depth):
        cur = _level_mean(tree, nm, k + 1)
        acc += (cur - prev) ** 2
        prev = cur
    return np.sqrt(acc)


def maximal_function_values(tree, vals, r: float = 1.0):
    nlr = node_lr_averages(tree, vals, r)
    return nlr[tree.leaf_ancestor_at_level].max(axis=1)


# ---------------------------------------------------------------------------
# grid-function API


def martingale_difference(f: GridFunction, a: Ball) -> GridFunction:
    """Function equal to (child mean - parent mean) on each child of a,
    zero elsewhere; only internal nodes carry a difference."""
    tree = f.tree
    v = tree.check_ball(a)
    if not tree.children[v]:
        raise TreeError(f"node {v} is a leaf: no martingale difference")
    nm = node_means(tree, f.values)
    out = np.zeros(tree.n_leaves)
    for c in tree.children[v]:
        out[tree.leaf_lo[c]:tree.leaf_hi[c]] = nm[c] - nm[v]
    return GridFunction(tree, out)


def transform(f: GridFunction, eps: TransformSpec) -> GridFunction:
    return GridFunction(f.tree, transform_values(f.tree, f.values,
                                                 eps.as_array(f.tree)))


def transform_truncated(f: GridFunction, eps: TransformSpec, n: int) -> GridFunction:
    if not 0 <= n <= f.tree.max_depth - 1:
        raise FunctionError(f"truncation level {n} out of range")
    return GridFunction(f.tree, transform_values(f.tree, f.values,
                                                 eps.as_array(f.tree), upto=n))


def transform_maximal(f: GridFunction, eps: TransformSpec, mode: str = "star") -> GridFunction:
    return GridFunction(f.tree, maximal_transform_values(f.tree, f.values,
                                                         eps.as_array(f.tree), mode))


def square_function(f: GridFunction) -> GridFunction:
    return GridFunction(f.tree, square_function_values(f.tree, f.values))


def maximal_function(f: GridFunction, r: float = 1.0) -> GridFunction:
    """At each leaf, the largest r-average of |f| over balls containing it."""
    return GridFunction(f.tree, maximal_function_values(f.tree, f.values, r))


# ---------------------------------------------------------------------------
# localization and vanishing defects


def restrict_outside_hull(f: GridFunction, b: Ball) -> GridFunction:
    """f zeroed on hull(b): the input for the localization identity."""
    tree = f.tree
    h = tree.check_ball(hull(tree, b))
    vals = f.values.copy()
    vals[tree.leaf_lo[h]:tree.leaf_hi[h]] = 0.0
    return GridFunction(tree, vals)


def localization_defect(op, f: GridFunction, b: Ball) -> float:
    """Oscillation over b of op applied to f cut off outside hull(b).

    Exactly zero for every martingale-family operator: differences at nodes
    inside the hull see only zeros, differences above it are constant on b.
    """
    tree = f.tree
    v = tree.check_ball(b)
    g = op(restrict_outside_hull(f, b))
    seg = g.values[tree.leaf_lo[v]:tree.leaf_hi[v]]
    return float(seg.max() - seg.min())


def vanishing_defect(tree: MeasureTree, op, b: Ball, bpp: Ball) -> float:
    """Oscillation over b of op applied to the indicator of bpp >= b."""
    v = tree.check_ball(b)
    u = tree.check_ball(bpp)
    if not tree.contains(u, v):
        raise TreeError(f"ball {u} does not contain ball {v}")
    g = op(GridFunction.indicator(tree, bpp))
    seg = g.values[tree.leaf_lo[v]:tree.leaf_hi[v]]
    return float(seg.max() - seg.min())


def restricted_matrix(tree: MeasureTree, vals: np.ndarray) -> np.ndarray:
    """(n_leaves, n_nodes) batch: column v is vals zeroed on hull(v)."""
    mat = np.repeat(vals[:, None], tree.n_nodes, axis=1)
    h = tree.hull_id
    for v in range(tree.n_nodes):
        mat[tree.leaf_lo[h[v]]:tree.leaf_hi[h[v]], v] = 0.0
    return mat


def osc_per_ball_columns(tree: MeasureTree, mat: np.ndarray) -> np.ndarray:
    """For each ball v: oscillation of column v of mat over v's leaf range,
    vectorized by grouping balls of equal leaf count."""
    sizes = tree.leaf_hi - tree.leaf_lo
    out = np.empty(tree.n_nodes)
    for m in np.unique(sizes):
        ids = np.nonzero(sizes == m)[0]
        rows = tree.leaf_lo[ids][:, None] + np.arange(m)[None, :]
        block = mat[rows, ids[:, None]]
        out[ids] = block.max(axis=1) - block.min(axis=1)
    return out


def localization_defects_all(tree: MeasureTree, array_op, vals: np.ndarray,
                             restricted: np.ndarray | None = None) -> np.ndarray:
    """Localization defect of one operator at every ball in a single batch.

    array_op maps an (n_leaves, n_nodes) matrix columnwise; column v of the
    input is vals cut off outside hull(v). Pass `restricted` to reuse the
    cut-off matrix across several operators.
    """
    if restricted is None:
        restricted = restricted_matrix(tree, vals)
    return osc_per_ball_columns(tree, array_op(restricted))


# ---------------------------------------------------------------------------
# weak (1,1) bound of the maximal function


def weak_l1_sup(f: GridFunction, r: float = 1.0):
    """(sup_lam lam * mu{Mf > lam}, ||f||_1) with both sides from the same
    bottom-up aggregation, so the constant-function equality case is exact."""
    tree = f.tree
    mf = maximal_function_values(tree, f.values, r)
    norm1 = float(node_weighted_sums(tree, np.abs(f.values))[tree.root])
    order = np.argsort(mf)
    vals = mf[order]
    w = tree.leaf_measure[order]
    tail = np.cumsum(w[::-1])[::-1]  # mass of {Mf >= vals[i]} at first occurrences
    uniq, first = np.unique(vals, return_index=True)
    sup = float(np.max(uniq * tail[first]))
    return sup, norm1
