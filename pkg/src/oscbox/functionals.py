"""Oscillation and BMO functionals on grid functions over a ball-basis.

Averages, starred (ancestor-sup) averages, mean oscillation, the
alpha-oscillation (minimal oscillation over subsets holding more than an
alpha fraction of a ball), BMO norms built from either, John-Nirenberg
level-set profiles, and the mean-drift inequality checkers.

Everything is a pure function of immutable inputs. Single-ball operations
work on one leaf segment; the norm functions sweep all nodes through the
selected kernel backend.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from . import _backend
from .ball_basis import Ball, MeasureTree, TreeError


class FunctionError(ValueError):
    """Invalid function data or functional parameters."""


@dataclass(frozen=True)
class OscParams:
    """Integrability exponent and the oscillation fractions."""

    r: float = 1.0
    alpha: float = 0.9
    beta: float = 0.75

    def __post_init__(self):
        if self.r < 1.0:
            raise FunctionError(f"need r >= 1, got {self.r}")
        if not 0.0 < self.alpha < 1.0:
            raise FunctionError(f"need 0 < alpha < 1, got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise FunctionError(f"need 0 < beta < 1, got {self.beta}")


class GridFunction:
    """Piecewise-constant function on the leaves of a MeasureTree."""

    def __init__(self, tree: MeasureTree, values):
        values = np.array(values, dtype=np.float64)
        if values.shape != (tree.n_leaves,):
            raise FunctionError(
                f"need {tree.n_leaves} leaf values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise FunctionError("leaf values must be finite")
        values.setflags(write=False)
        self.tree = tree
        self.values = values

    @classmethod
    def constant(cls, tree: MeasureTree, c: float) -> "GridFunction":
        return cls(tree, np.full(tree.n_leaves, float(c)))

    @classmethod
    def indicator(cls, tree: MeasureTree, b: Ball) -> "GridFunction":
        v = tree.check_ball(b)
        vals = np.zeros(tree.n_leaves)
        vals[tree.leaf_lo[v]:tree.leaf_hi[v]] = 1.0
        return cls(tree, vals)

    def shifted(self, c: float) -> "GridFunction":
        return GridFunction(self.tree, self.values + c)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.tree, self.values * c)


# ---------------------------------------------------------------------------
# node aggregates (vectorized over all nodes at once)


def node_weighted_sums(tree: MeasureTree, leaf_vals: np.ndarray) -> np.ndarray:
    """integral of leaf_vals over every node, via leaf prefix sums.

    Accepts (n_leaves,) or (n_leaves, m) arrays.
    """
    w = tree.leaf_measure
    x = leaf_vals * (w if leaf_vals.ndim == 1 else w[:, None])
    cs = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    return cs[tree.leaf_hi] - cs[tree.leaf_lo]


def node_means(tree: MeasureTree, leaf_vals: np.ndarray) -> np.ndarray:
    s = node_weighted_sums(tree, leaf_vals)
    mu = tree.measure if leaf_vals.ndim == 1 else tree.measure[:, None]
    return s / mu


def node_lr_averages(tree: MeasureTree, leaf_vals, r: float) -> np.ndarray:
    if r < 1.0:
        raise FunctionError(f"need r >= 1, got {r}")
    p = np.abs(leaf_vals) if r == 1.0 else np.abs(leaf_vals) ** r
    avg = node_means(tree, p)
    return avg if r == 1.0 else avg ** (1.0 / r)


def node_sharp_averages(tree: MeasureTree, leaf_vals, r: float) -> np.ndarray:
    """<f - f_B>_B for every node B in one gathered pass."""
    if r < 1.0:
        raise FunctionError(f"need r >= 1, got {r}")
    gather, starts, ends = tree.node_segments
    means = node_means(tree, leaf_vals)
    dev = np.abs(leaf_vals[gather] - np.repeat(means, ends - starts))
    if r != 1.0:
        dev = dev ** r
    dev *= tree.leaf_measure[gather]
    cs = np.concatenate([[0.0], np.cumsum(dev)])
    avg = (cs[ends] - cs[starts]) / tree.measure
    return avg if r == 1.0 else avg ** (1.0 / r)


def ancestor_max(tree: MeasureTree, node_vals: np.ndarray) -> np.ndarray:
    """For every node, the max of node_vals over its ancestors (self included)."""
    return node_vals[tree.ancestor_matrix].max(axis=1)


# ---------------------------------------------------------------------------
# single-ball functionals


def mean(f: GridFunction, b: Ball) -> float:
    v = f.tree.check_ball(b)
    lo, hi = f.tree.leaf_lo[v], f.tree.leaf_hi[v]
    w = f.tree.leaf_measure[lo:hi]
    return float(np.dot(f.values[lo:hi], w) / b.measure)


def lr_average(f: GridFunction, b: Ball, r: float = 1.0) -> float:
    if r < 1.0:
        raise FunctionError(f"need r >= 1, got {r}")
    v = f.tree.check_ball(b)
    lo, hi = f.tree.leaf_lo[v], f.tree.leaf_hi[v]
    w = f.tree.leaf_measure[lo:hi]
    p = np.abs(f.values[lo:hi])
    if r != 1.0:
        p = p ** r
    avg = float(np.dot(p, w) / b.measure)
    return avg if r == 1.0 else avg ** (1.0 / r)


def starred_average(f: GridFunction, b: Ball, r: float = 1.0) -> float:
    v = f.tree.check_ball(b)
    return max(lr_average(f, f.tree.ball(a), r) for a in f.tree.ancestors(v))


def sharp_average(f: GridFunction, b: Ball, r: float = 1.0) -> float:
    if r < 1.0:
        raise FunctionError(f"need r >= 1, got {r}")
    v = f.tree.check_ball(b)
    lo, hi = f.tree.leaf_lo[v], f.tree.leaf_hi[v]
    w = f.tree.leaf_measure[lo:hi]
    vals = f.values[lo:hi]
    m = np.dot(vals, w) / b.measure
    dev = np.abs(vals - m)
    if r != 1.0:
        dev = dev ** r
    avg = float(np.dot(dev, w) / b.measure)
    return avg if r == 1.0 else avg ** (1.0 / r)


def starred_sharp_average(f: GridFunction, b: Ball, r: float = 1.0) -> float:
    v = f.tree.check_ball(b)
    return max(sharp_average(f, f.tree.ball(a), r) for a in f.tree.ancestors(v))


def osc_set(f: GridFunction, leaf_set) -> float:
    """max - min of f over the given leaf node ids; empty sets are an error."""
    ids = [int(v) for v in leaf_set]
    if not ids:
        raise FunctionError("oscillation over an empty set is undefined")
    pos = {int(v): i for i, v in enumerate(f.tree.leaves)}
    try:
        sel = f.values[[pos[v] for v in ids]]
    except KeyError as e:
        raise TreeError(f"{e.args[0]} is not a leaf") from None
    return float(sel.max() - sel.min())


# ---------------------------------------------------------------------------
# alpha-oscillation


def _sorted_segments(tree: MeasureTree, leaf_vals: np.ndarray):
    """Leaf values under every node, sorted within each node's segment.

    Returns (sv, cw, starts, ends) ready for the window kernel, plus the
    per-node full range for the alpha -> 1 rounding guard.
    """
    gather, starts, ends = tree.node_segments
    seg_ids = np.repeat(np.arange(tree.n_nodes), ends - starts)
    g = leaf_vals[gather]
    order = np.lexsort((g, seg_ids))
    sv = g[order]
    sw = tree.leaf_measure[gather][order]
    cw = np.cumsum(sw)
    full = sv[ends - 1] - sv[starts]
    return sv, cw, starts, ends, full


def node_alpha_oscs(tree: MeasureTree, leaf_vals: np.ndarray, alpha: float) -> np.ndarray:
    """alpha-oscillation of the leaf values on every node at once."""
    if not 0.0 < alpha < 1.0:
        raise FunctionError(f"need 0 < alpha < 1, got {alpha}")
    sv, cw, starts, ends, full = _sorted_segments(tree, leaf_vals)
    out = _backend.segment_min_window(sv, cw, starts, ends, alpha * tree.measure)
    # the full window always qualifies (alpha < 1); inf can only appear when
    # alpha*mu rounds past the segment mass, so fall back to the full range
    return np.where(np.isfinite(out), out, full)


def alpha_osc(f: GridFunction, b: Ball, alpha: float) -> float:
    """Minimal oscillation of f over subsets of b of measure > alpha * mu(b).

    Realized by a sliding window over the sorted leaf values: the minimal
    value range [a, c] capturing strictly more than alpha * mu(b) of mass.
    The subset and window formulations agree because oscillation depends
    only on the extreme values.
    """
    if not 0.0 < alpha < 1.0:
        raise FunctionError(f"need 0 < alpha < 1, got {alpha}")
    v = f.tree.check_ball(b)
    lo, hi = f.tree.leaf_lo[v], f.tree.leaf_hi[v]
    vals = f.values[lo:hi]
    w = f.tree.leaf_measure[lo:hi]
    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    cw = np.cumsum(w[order])
    out = _backend.segment_min_window(
        sv, cw, np.array([0]), np.array([len(sv)]),
        np.array([alpha * b.measure]))
    res = float(out[0])
    return res if np.isfinite(res) else float(sv[-1] - sv[0])


# ---------------------------------------------------------------------------
# norms


def bmo_norm(f: GridFunction, r: float = 1.0) -> float:
    """sup over balls of the centered r-average <f - f_B>_B."""
    return float(node_sharp_averages(f.tree, f.values, r).max())


def bmo_alpha_norm(f: GridFunction, alpha: float) -> float:
    """sup over balls of the alpha-oscillation."""
    return float(node_alpha_oscs(f.tree, f.values, alpha).max())


# ---------------------------------------------------------------------------
# John-Nirenberg profile


def jn_profile(f: GridFunction, b: Ball, lambdas) -> list:
    """mu{x in b : |f - f_b| > lam} / mu(b) for each lam (nondecreasing >= 0)."""
    lam = np.asarray(list(lambdas), dtype=np.float64)
    if lam.size and (np.any(lam < 0) or np.any(np.diff(lam) < 0)):
        raise FunctionError("lambdas must be nonnegative and nondecreasing")
    v = f.tree.check_ball(b)
    lo, hi = f.tree.leaf_lo[v], f.tree.leaf_hi[v]
    w = f.tree.leaf_measure[lo:hi]
    dev = np.abs(f.values[lo:hi] - np.dot(f.values[lo:hi], w) / b.measure)
    order = np.argsort(dev)
    dev_sorted = dev[order]
    cw = np.concatenate([[0.0], np.cumsum(w[order])])
    total = cw[-1]
    below = cw[np.searchsorted(dev_sorted, lam, side="right")]
    return [float(x) for x in (total - below) / b.measure]


def jn_profile_to_csv(lambdas, fractions) -> str:
    buf = io.StringIO()
    buf.write("lambda,fraction\n")
    for lam, frac in zip(lambdas, fractions):
        buf.write(f"{lam!r},{frac!r}\n")
    return buf.getvalue()


def grid_function_to_json(f: GridFunction, tree_ref: str) -> str:
    """{tree_ref, values}: the tree travels by reference, not by value."""
    return json.dumps({"tree_ref": tree_ref,
                       "values": [float(v) for v in f.values]},
                      sort_keys=True, separators=(",", ":"))


def grid_function_from_json(text: str, tree: MeasureTree) -> GridFunction:
    doc = json.loads(text)
    return GridFunction(tree, doc["values"])


# ---------------------------------------------------------------------------
# drift inequality checkers


def _check_pair(f: GridFunction, a: Ball, b: Ball):
    va = f.tree.check_ball(a)
    vb = f.tree.check_ball(b)
    if not f.tree.intersects(va, vb):
        raise FunctionError(f"balls {va} and {vb} are disjoint")
    if a.measure > b.measure:
        raise FunctionError("need mu(a) <= mu(b)")
    return va, vb


def check_mean_drift(f: GridFunction, a: Ball, b: Ball, r: float = 1.0):
    """lhs = |f_a - f_b| against rhs = (mu(b)/mu(a))^(1/r) <f>*_{#,a}.

    The rhs carries no constant; callers compare lhs <= C * rhs with an
    empirically estimated C.
    """
    _check_pair(f, a, b)
    lhs = abs(mean(f, a) - mean(f, b))
    rhs = (b.measure / a.measure) ** (1.0 / r) * starred_sharp_average(f, a, r)
    return lhs, rhs


def check_log_drift(f: GridFunction, a: Ball, b: Ball, r: float = 1.0):
    """lhs = <f - f_a>_b against rhs = (1 + log2(mu(b)/mu(a))) <f>*_{#,a}."""
    va, vb = _check_pair(f, a, b)
    lo, hi = f.tree.leaf_lo[vb], f.tree.leaf_hi[vb]
    w = f.tree.leaf_measure[lo:hi]
    dev = np.abs(f.values[lo:hi] - mean(f, a))
    if r != 1.0:
        dev = dev ** r
    lhs = float(np.dot(dev, w) / b.measure)
    if r != 1.0:
        lhs = lhs ** (1.0 / r)
    rhs = (1.0 + np.log2(b.measure / a.measure)) * starred_sharp_average(f, a, r)
    return lhs, rhs
