import math

import numpy as np
import pytest

from oscbox.ball_basis import TreeError, build_dyadic_tree, build_weighted_tree, hull
from oscbox.functionals import FunctionError, GridFunction, mean
from oscbox.martingale_ops import (TransformSpec, localization_defects_all,
                                   martingale_difference,
                                   martingale_family_values, maximal_function,
                                   osc_per_ball_columns, restricted_matrix,
                                   square_function, transform,
                                   transform_maximal, transform_truncated,
                                   transform_values, vanishing_defect,
                                   weak_l1_sup)
from oscbox.random_functions import rng_for_trial


# ---------------------------------------------------------------------------
# independent oracles


def brute_maximal(tree, vals, r=1.0):
    """Per-leaf max of ancestor r-averages of |f| by explicit summation."""
    out = []
    for i, leaf in enumerate(tree.leaves):
        best = 0.0
        for a in tree.ancestors(int(leaf)):
            lo, hi = int(tree.leaf_lo[a]), int(tree.leaf_hi[a])
            s = math.fsum(abs(float(vals[j])) ** r * float(tree.leaf_measure[j])
                          for j in range(lo, hi))
            best = max(best, (s / float(tree.measure[a])) ** (1.0 / r))
        out.append(best)
    return np.array(out)


def brute_transform(tree, vals, eps):
    """Node-by-node sum of eps_A * Delta_A f via the per-node operation."""
    f = GridFunction(tree, vals)
    acc = np.zeros(tree.n_leaves)
    for v in range(tree.n_nodes):
        if tree.children[v]:
            acc += eps.epsilon.get(v, 0.0) * martingale_difference(f, tree.ball(v)).values
    return acc


# ---------------------------------------------------------------------------
# martingale differences


def test_difference_constant_is_zero():
    t = build_dyadic_tree(2, 1)
    d = martingale_difference(GridFunction.constant(t, 3.0), t.ball(0))
    assert np.all(d.values == 0.0)


def test_difference_two_leaves():
    t = build_dyadic_tree(1, 1)
    d = martingale_difference(GridFunction(t, [1.0, 0.0]), t.ball(0))
    assert list(d.values) == [0.5, -0.5]


def test_difference_mean_zero():
    t = build_weighted_tree([3, 2], [1, 2, 3, 4, 5, 6.0])
    vals = rng_for_trial(2, 0).uniform(-1, 1, t.n_leaves)
    f = GridFunction(t, vals)
    for v in range(t.n_nodes):
        if t.children[v]:
            d = martingale_difference(f, t.ball(v))
            integral = float(np.dot(d.values, t.leaf_measure))
            assert abs(integral) <= 1e-15


def test_difference_rejects_leaf():
    t = build_dyadic_tree(1, 1)
    with pytest.raises(TreeError):
        martingale_difference(GridFunction.constant(t, 0.0), t.ball(int(t.leaves[0])))


# ---------------------------------------------------------------------------
# transforms


def test_transform_telescopes():
    t = build_dyadic_tree(4, 1)
    vals = rng_for_trial(4, 0).uniform(-2, 2, t.n_leaves)
    f = GridFunction(t, vals)
    out = transform(f, TransformSpec.ones(t))
    fx = mean(f, t.ball(t.root))
    assert np.abs(out.values - (vals - fx)).max() <= 1e-12 * np.abs(vals).max()


def test_transform_zero_eps():
    t = build_dyadic_tree(3, 1)
    f = GridFunction(t, rng_for_trial(4, 1).uniform(-1, 1, t.n_leaves))
    assert np.all(transform(f, TransformSpec()).values == 0.0)


def test_transform_half_indicator():
    t = build_dyadic_tree(3, 1)
    f = GridFunction.indicator(t, t.ball(1))
    out = transform(f, TransformSpec.ones(t))
    assert set(np.round(out.values, 12)) == {0.5, -0.5}


def test_transform_matches_nodewise_oracle():
    t = build_weighted_tree([2, 3], [1, 2, 3, 4, 5, 6.0])
    rng = rng_for_trial(4, 2)
    vals = rng.uniform(-1, 1, t.n_leaves)
    eps = TransformSpec.signs(t, rng)
    got = transform(GridFunction(t, vals), eps).values
    want = brute_transform(t, vals, eps)
    assert np.abs(got - want).max() <= 1e-13


def test_transform_rejects_large_eps():
    with pytest.raises(FunctionError):
        TransformSpec({0: 1.5})


def test_transform_spec_serialization():
    t = build_dyadic_tree(2, 1)
    eps = TransformSpec.signs(t, rng_for_trial(1, 0))
    back = TransformSpec.from_json(eps.to_json())
    assert back.epsilon == eps.epsilon


def test_truncation_full_and_single_level():
    t = build_dyadic_tree(3, 1)
    rng = rng_for_trial(4, 3)
    vals = rng.uniform(-1, 1, t.n_leaves)
    f = GridFunction(t, vals)
    eps = TransformSpec.signs(t, rng)
    full = transform_truncated(f, eps, t.max_depth - 1)
    assert np.array_equal(full.values, transform(f, eps).values)
    level0 = transform_truncated(f, TransformSpec.ones(t), 0)
    d_root = martingale_difference(f, t.ball(t.root))
    assert np.abs(level0.values - d_root.values).max() <= 1e-15


def test_truncation_nested_additivity():
    t = build_dyadic_tree(4, 1)
    rng = rng_for_trial(4, 4)
    vals = rng.uniform(-1, 1, t.n_leaves)
    eps_arr = TransformSpec.signs(t, rng).as_array(t)
    for n in range(t.max_depth - 1):
        a = transform_values(t, vals, eps_arr, upto=n)
        b = transform_values(t, vals, eps_arr, upto=n + 1)
        level = np.zeros(t.n_nodes)
        for v in range(t.n_nodes):
            if t.depth[v] == n + 1 and t.children[v]:
                level[v] = eps_arr[v]
        step = transform_values(t, vals, level, upto=n + 1)
        assert np.abs(b - (a + step)).max() <= 1e-13


def test_truncation_rejects_out_of_range():
    t = build_dyadic_tree(2, 1)
    f = GridFunction.constant(t, 1.0)
    with pytest.raises(FunctionError):
        transform_truncated(f, TransformSpec.ones(t), 5)


def test_linearity_exact_scale():
    t = build_dyadic_tree(5, 1)
    rng = rng_for_trial(4, 5)
    fv = rng.uniform(-1, 1, t.n_leaves)
    gv = rng.uniform(-1, 1, t.n_leaves)
    eps_arr = TransformSpec.signs(t, rng).as_array(t)
    lhs = transform_values(t, 2.0 * fv - 3.0 * gv, eps_arr)
    rhs = 2.0 * transform_values(t, fv, eps_arr) - 3.0 * transform_values(t, gv, eps_arr)
    assert np.abs(lhs - rhs).max() <= 1e-12


# ---------------------------------------------------------------------------
# maximal variants


def test_maximal_zero_eps():
    t = build_dyadic_tree(3, 1)
    f = GridFunction(t, rng_for_trial(8, 0).uniform(-1, 1, t.n_leaves))
    for mode in ("star", "plus", "minus"):
        assert np.all(transform_maximal(f, TransformSpec(), mode).values == 0.0)


def test_maximal_lattice_identity():
    t = build_dyadic_tree(4, 1)
    rng = rng_for_trial(8, 1)
    f = GridFunction(t, rng.uniform(-1, 1, t.n_leaves))
    eps = TransformSpec.signs(t, rng)
    star = transform_maximal(f, eps, "star").values
    plus = transform_maximal(f, eps, "plus").values
    minus = transform_maximal(f, eps, "minus").values
    assert np.array_equal(star, np.maximum(plus, -minus))
    assert np.all(star >= np.abs(plus) - 1e-15)


def test_maximal_dominates_truncations():
    t = build_dyadic_tree(4, 1)
    rng = rng_for_trial(8, 2)
    f = GridFunction(t, rng.uniform(-1, 1, t.n_leaves))
    eps = TransformSpec.signs(t, rng)
    star = transform_maximal(f, eps, "star").values
    for n in range(t.max_depth):
        assert np.all(star >= np.abs(transform_truncated(f, eps, n).values))


def test_maximal_half_indicator():
    t = build_dyadic_tree(3, 1)
    f = GridFunction.indicator(t, t.ball(1))
    star = transform_maximal(f, TransformSpec.ones(t), "star")
    assert np.all(star.values == 0.5)  # only the root difference is nonzero


def test_maximal_rejects_unknown_mode():
    t = build_dyadic_tree(2, 1)
    with pytest.raises(FunctionError):
        transform_maximal(GridFunction.constant(t, 1.0), TransformSpec.ones(t), "sup")


# ---------------------------------------------------------------------------
# square function


def test_square_constant_zero():
    t = build_dyadic_tree(3, 1)
    assert np.all(square_function(GridFunction.constant(t, 9.0)).values == 0.0)


def test_square_half_indicator():
    t = build_dyadic_tree(3, 1)
    f = GridFunction.indicator(t, t.ball(1))
    assert np.all(square_function(f).values == 0.5)


def test_square_energy_identity():
    t = build_dyadic_tree(6, 1)
    for trial in range(20):
        vals = rng_for_trial(8, 3, trial).uniform(-1, 1, t.n_leaves)
        f = GridFunction(t, vals)
        sq = square_function(f).values
        fx = mean(f, t.ball(t.root))
        lhs = float(np.dot(sq * sq, t.leaf_measure))
        rhs = float(np.dot((vals - fx) ** 2, t.leaf_measure))
        assert abs(lhs - rhs) <= 1e-10 * rhs


# ---------------------------------------------------------------------------
# maximal function and weak (1,1)


def test_maximal_function_constant():
    t = build_dyadic_tree(3, 1)
    assert np.all(maximal_function(GridFunction.constant(t, -2.0)).values == 2.0)


def test_maximal_function_far_leaf():
    t = build_dyadic_tree(3, 1)
    f = GridFunction.indicator(t, t.ball(int(t.leaves[0])))  # 1 on [0, 1/8)
    mf = maximal_function(f)
    assert mf.values[-1] == 0.125  # leaf [7/8, 1): only the root sees the mass


def test_maximal_function_dominates_f():
    t = build_dyadic_tree(4, 1)
    vals = rng_for_trial(8, 4).uniform(-1, 1, t.n_leaves)
    mf = maximal_function(GridFunction(t, vals))
    assert np.all(mf.values >= np.abs(vals) - 1e-15)


def test_maximal_function_matches_oracle():
    t = build_weighted_tree([2, 2], [1, 3, 2, 6.0])
    vals = rng_for_trial(8, 5).uniform(-2, 2, t.n_leaves)
    got = maximal_function(GridFunction(t, vals)).values
    assert np.abs(got - brute_maximal(t, vals)).max() <= 1e-13


def test_weak_l1_bound_random():
    t = build_dyadic_tree(8, 1)
    for trial in range(50):
        vals = rng_for_trial(8, 6, trial).uniform(-1, 1, t.n_leaves)
        sup, norm1 = weak_l1_sup(GridFunction(t, vals))
        assert sup <= norm1


def test_weak_l1_constant_is_tight():
    t = build_dyadic_tree(4, 1)
    sup, norm1 = weak_l1_sup(GridFunction.constant(t, 3.0))
    assert sup == norm1 == 3.0


# ---------------------------------------------------------------------------
# localization and vanishing


def test_localization_exact_zero_all_ops():
    t = build_dyadic_tree(6, 1)
    rng = rng_for_trial(8, 7)
    vals = rng.uniform(-1, 1, t.n_leaves)
    eps_arr = TransformSpec.signs(t, rng).as_array(t)
    restricted = restricted_matrix(t, vals)
    fam = martingale_family_values(t, restricted, eps_arr, 2)
    assert len(fam) == 6
    for name, out in fam.items():
        defects = osc_per_ball_columns(t, out)
        assert defects.max() == 0.0, name


def test_localization_defect_public_api():
    t = build_dyadic_tree(4, 1)
    rng = rng_for_trial(8, 8)
    f = GridFunction(t, rng.uniform(-1, 1, t.n_leaves))
    eps = TransformSpec.signs(t, rng)
    from oscbox.martingale_ops import localization_defect
    for v in (0, 3, int(t.leaves[5])):
        assert localization_defect(
            lambda g: transform(g, eps), f, t.ball(v)) == 0.0
        assert localization_defect(square_function, f, t.ball(v)) == 0.0


def test_localization_batch_matches_single():
    t = build_dyadic_tree(4, 1)
    rng = rng_for_trial(8, 9)
    vals = rng.uniform(-1, 1, t.n_leaves)
    eps = TransformSpec.signs(t, rng)
    eps_arr = eps.as_array(t)
    from oscbox.martingale_ops import localization_defect
    batch = localization_defects_all(
        t, lambda m: transform_values(t, m, eps_arr), vals)
    f = GridFunction(t, vals)
    for v in range(t.n_nodes):
        single = localization_defect(lambda g: transform(g, eps), f, t.ball(v))
        assert batch[v] == single


def test_vanishing_defects_zero():
    t = build_dyadic_tree(4, 1)
    eps = TransformSpec.signs(t, rng_for_trial(8, 10))
    root = t.ball(t.root)
    for v in (0, 1, 5, int(t.leaves[3])):
        b = t.ball(v)
        assert vanishing_defect(t, lambda g: transform(g, eps), b, root) == 0.0
        assert vanishing_defect(t, lambda g: transform(g, eps), b, hull(t, b)) == 0.0
        assert vanishing_defect(t, square_function, b, root) == 0.0


def test_vanishing_rejects_non_nested():
    t = build_dyadic_tree(2, 1)
    with pytest.raises(TreeError):
        vanishing_defect(t, square_function, t.ball(1), t.ball(2))
