"""Acceptance suite: one test per exit criterion, each printing a verdict
line. Tolerances and runtime budgets are pinned here, not configurable."""

import math
import time

import numpy as np
import pytest
from oracles import subset_alpha_osc

from oscbox.ball_basis import (basis_report, build_dyadic_tree,
                               build_weighted_tree, two_balls_check,
                               vitali_select)
from oscbox.functionals import (GridFunction, alpha_osc, bmo_alpha_norm,
                                bmo_norm, jn_profile, node_sharp_averages)
from oscbox.harness import ExperimentConfig, run_experiment
from oscbox.martingale_ops import (TransformSpec, martingale_family_values,
                                   osc_per_ball_columns, restricted_matrix,
                                   transform_values, square_function_values,
                                   weak_l1_sup)
from oscbox.random_functions import (rng_for_trial, sample_leaf_values,
                                     staircase_values)
from oscbox.singular_ops import (CircleConvolutionOp, CircleGrid,
                                 bo_omega_constant, carleson_maximal,
                                 default_modulations, haar_system,
                                 hilbert_kernel, wavelet_kernel,
                                 wavelet_multiplier_apply)

SEED = 20240817


def report(criterion, detail):
    print(f"PASS criterion {criterion}: {detail}")


# ---------------------------------------------------------------------------


def test_criterion_1_exact_localization():
    """All six martingale operators are exactly local over every ball."""
    t0 = time.perf_counter()
    tree = build_dyadic_tree(8, 1)
    mid = (tree.max_depth - 1) // 2
    worst = 0.0
    for trial in range(200):
        rng = rng_for_trial(SEED, 1, trial)
        vals = sample_leaf_values("random-uniform", tree, rng)
        eps_arr = TransformSpec.signs(tree, rng).as_array(tree)
        sup = float(np.abs(vals).max())
        restricted = restricted_matrix(tree, vals)
        fam = martingale_family_values(tree, restricted, eps_arr, mid)
        assert len(fam) == 6
        for name, out in fam.items():
            defect = float(osc_per_ball_columns(tree, out).max())
            worst = max(worst, defect)
            assert defect <= 1e-12 * sup, (name, trial, defect)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"localization sweep took {elapsed:.1f}s"
    report(1, f"200 trials x 511 balls x 6 ops, max defect {worst:.2e}, "
              f"{elapsed:.1f}s")


def test_criterion_2_alpha_osc_oracle():
    """Window alpha-oscillation equals the exhaustive-subset minimum."""
    t0 = time.perf_counter()
    for trial in range(500):
        rng = rng_for_trial(SEED, 2, trial)
        if rng.uniform() < 0.5:
            branching = [int(rng.integers(2, 13))]
        else:
            b1 = int(rng.integers(2, 4))
            b2 = int(rng.integers(2, 12 // b1 + 1))
            branching = [b1, b2]
        n_leaves = math.prod(branching)
        weights = rng.integers(1, 10, size=n_leaves).astype(float)
        tree = build_weighted_tree(branching, weights)
        vals = rng.uniform(-1.0, 1.0, n_leaves)
        node = int(rng.integers(0, tree.n_nodes))
        alpha = float(rng.uniform(0.05, 0.95))
        f = GridFunction(tree, vals)
        got = alpha_osc(f, tree.ball(node), alpha)
        want = subset_alpha_osc(tree, vals, node, alpha)
        assert got == want, (trial, got, want)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"oracle comparison took {elapsed:.1f}s"
    report(2, f"500 random triples match the subset oracle exactly, "
              f"{elapsed:.1f}s")


def test_criterion_3_basis_axioms():
    """Exact dyadic constants to depth 12 and the covering guarantees."""
    for depth in range(1, 13):
        tree = build_dyadic_tree(depth, 1)
        assert two_balls_check(tree) == []
        rep = basis_report(tree)
        assert rep.k_constant == 2.0
        assert rep.doubling_constant == 2.0
        assert rep.ok

    tree = build_dyadic_tree(5, 1)
    pos = {int(v): i for i, v in enumerate(tree.leaves)}
    for trial in range(500):
        rng = rng_for_trial(SEED, 3, trial)
        k = int(rng.integers(1, tree.n_leaves + 1))
        e = [int(tree.leaves[i])
             for i in rng.choice(tree.n_leaves, size=k, replace=False)]
        family_ids = {int(rng.choice(list(tree.ancestors(v)))) for v in e}
        sel = vitali_select(tree, e, [tree.ball(v) for v in sorted(family_ids)])
        spans = sorted((int(tree.leaf_lo[b.node]), int(tree.leaf_hi[b.node]))
                       for b in sel)
        assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
        covered = np.zeros(tree.n_leaves, dtype=bool)
        for b in sel:
            h = int(tree.hull_id[b.node])
            covered[tree.leaf_lo[h]:tree.leaf_hi[h]] = True
        assert all(covered[pos[v]] for v in e)
        e_measure = math.fsum(float(tree.measure[v]) for v in e)
        assert math.fsum(b.measure for b in sel) >= e_measure / 2.0
    report(3, "dyadic K = doubling = 2 exactly to depth 12; 500 Vitali "
              "instances disjoint, hull-covering, mass >= mu(E)/2")


@pytest.fixture(scope="module")
def equiv_norms():
    data = {}
    for depth in (6, 8, 10):
        tree = build_dyadic_tree(depth, 1)
        rows = []
        for trial in range(1000):
            vals = sample_leaf_values(
                "random-uniform", tree, rng_for_trial(SEED, 45, depth, trial))
            rows.append((bmo_norm(GridFunction(tree, vals), 1.0),
                         bmo_alpha_norm(GridFunction(tree, vals), 0.6),
                         bmo_alpha_norm(GridFunction(tree, vals), 0.9)))
        data[depth] = rows
    return data


def test_criterion_4_forward_bmo(equiv_norms):
    """||f||_bmo_alpha <= 2 (1-alpha)^-1 ||f||_bmo, exactly, everywhere."""
    count = 0
    for depth, rows in equiv_norms.items():
        for b, b06, b09 in rows:
            assert b06 <= 2.0 / (1.0 - 0.6) * b, depth
            assert b09 <= 2.0 / (1.0 - 0.9) * b, depth
            count += 1
    report(4, f"forward comparison exact in {count} x 2 cases "
              f"(alpha 0.6, 0.9; depths 6, 8, 10)")


def test_criterion_5_converse_stability(equiv_norms):
    """max of bmo / bmo_0.9 moves by <= 25% across depths 6, 8, 10."""
    maxima = {}
    for depth, rows in equiv_norms.items():
        ratios = [b / b09 for b, _, b09 in rows if b09 > 0]
        maxima[depth] = max(ratios)
    spread = (max(maxima.values()) - min(maxima.values())) / min(maxima.values())
    assert spread <= 0.25, maxima
    report(5, f"max ratios {dict(sorted(maxima.items()))}, spread "
              f"{100 * spread:.1f}% <= 25%")


def test_criterion_6_john_nirenberg_staircase():
    """Geometric level-set decay plus the below-threshold halving pattern."""
    tree = build_dyadic_tree(12, 1)
    f = GridFunction(tree, staircase_values(tree.n_leaves, 12))
    s = bmo_norm(f, 1.0)
    assert s > 0.0
    rep = basis_report(tree)
    gamma = 2.0 * rep.doubling_constant
    threshold = rep.regularity_theta / (5.0 * rep.k_constant * gamma * gamma)
    root = tree.ball(tree.root)
    max_dev = float(np.abs(
        f.values - np.dot(f.values, tree.leaf_measure)).max())
    prof = jn_profile(f, root, [k * s for k in range(int(max_dev / s) + 3)])

    pairs = [(p, q) for p, q in zip(prof, prof[1:]) if p > 0 and q > 0]
    assert len(pairs) >= 2
    q_fit = float(np.exp(np.mean([np.log(q / p) for p, q in pairs])))
    assert q_fit < 1.0

    checked = 0
    for p, q in zip(prof, prof[1:]):
        if 0.0 < p <= threshold:
            assert q <= 0.5 * p, (p, q)
            checked += 1
    assert checked >= 1
    report(6, f"fitted q = {q_fit:.3f} < 1; {checked} below-threshold steps "
              f"halve (threshold {threshold:.5f} from measured theta, gamma, K)")


def test_criterion_7_weak_l1():
    """sup_lam lam * mu{Mf > lam} <= ||f||_1 in 500 of 500 trials."""
    tree = build_dyadic_tree(10, 1)
    worst = 0.0
    for trial in range(500):
        vals = sample_leaf_values("random-uniform", tree,
                                  rng_for_trial(SEED, 7, trial))
        sup, norm1 = weak_l1_sup(GridFunction(tree, vals))
        assert sup <= norm1, trial
        worst = max(worst, sup / norm1)
    report(7, f"500/500 trials at depth 10; worst ratio {worst:.4f} <= 1")


def test_criterion_8_telescoping_and_energy():
    """transform(eps = 1) = f - f_X and the square-function energy identity."""
    tree = build_dyadic_tree(8, 1)
    ones_arr = TransformSpec.ones(tree).as_array(tree)
    worst_tele, worst_energy = 0.0, 0.0
    for trial in range(200):
        vals = sample_leaf_values("random-uniform", tree,
                                  rng_for_trial(SEED, 8, trial))
        sup = float(np.abs(vals).max())
        fx = float(np.dot(vals, tree.leaf_measure))
        tele = float(np.abs(transform_values(tree, vals, ones_arr)
                            - (vals - fx)).max())
        assert tele <= 1e-12 * sup
        worst_tele = max(worst_tele, tele / sup)
        sq = square_function_values(tree, vals)
        lhs = float(np.dot(sq * sq, tree.leaf_measure))
        rhs = float(np.dot((vals - fx) ** 2, tree.leaf_measure))
        rel = abs(lhs - rhs) / rhs
        assert rel <= 1e-10
        worst_energy = max(worst_energy, rel)
    report(8, f"200 trials: telescoping {worst_tele:.2e} (<= 1e-12 rel), "
              f"energy {worst_energy:.2e} (<= 1e-10 rel)")


def test_criterion_9_singular_stability():
    """Hilbert BO(log) constant and Carleson bmo/sup ratio stable in n."""
    t0 = time.perf_counter()
    mods = default_modulations()
    bo_vals, carleson_vals = {}, {}
    for n in (512, 1024, 2048):
        grid = CircleGrid(n)
        kern = hilbert_kernel(grid)
        tree = grid.arc_tree
        op = CircleConvolutionOp(grid, kern)
        bo_vals[n] = bo_omega_constant(op, tree, "log", 200, SEED)
        best = 0.0
        for trial in range(200):
            vals = sample_leaf_values("random-uniform", tree,
                                      rng_for_trial(SEED, 9, n, trial))
            out = carleson_maximal(grid, kern, mods, vals)
            best = max(best, float(node_sharp_averages(tree, out, 1.0).max())
                       / float(np.abs(vals).max()))
        carleson_vals[n] = best
    bo_factor = max(bo_vals.values()) / min(bo_vals.values())
    car_factor = max(carleson_vals.values()) / min(carleson_vals.values())
    elapsed = time.perf_counter() - t0
    assert bo_factor <= 2.0, bo_vals
    assert car_factor <= 2.0, carleson_vals
    assert elapsed < 300.0, f"singular sweep took {elapsed:.1f}s"
    report(9, f"Hilbert BO {dict(sorted(bo_vals.items()))} (factor "
              f"{bo_factor:.2f}); Carleson {dict(sorted(carleson_vals.items()))} "
              f"(factor {car_factor:.2f}); {elapsed:.1f}s")


def test_criterion_10_wavelet_kernel_bound():
    """|K(x,t)| * dist(x,t) uniformly bounded; exact Haar round-trip."""
    grid = CircleGrid(1024)
    system = haar_system(grid)
    x = grid.points
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.nan)
    worst = 0.0
    for trial in range(100):
        lam = rng_for_trial(SEED, 10, trial).uniform(-1.0, 1.0, grid.n)
        kmat = wavelet_kernel(system, lam)
        worst = max(worst, float(np.nanmax(np.abs(kmat) * dist)))
    assert worst <= 3.0  # one constant: (1 + 2/cell) * cell <= 3 for Haar

    f = rng_for_trial(SEED, 10, 999).uniform(-1.0, 1.0, grid.n)
    err = float(np.abs(wavelet_multiplier_apply(
        system, np.ones(grid.n), f) - f).max())
    assert err <= 1e-12
    report(10, f"100 multipliers at n=1024: sup |K| dist = {worst:.3f} <= 3; "
               f"round-trip err {err:.2e} <= 1e-12")


def test_criterion_11_determinism():
    """Identical configs serialize to byte-identical reports."""
    for experiment in ("norms", "boconst", "wavelet"):
        cfg = ExperimentConfig(experiment, depth=5, n=64, trials=5, seed=SEED)
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        assert a.to_json_bytes() == b.to_json_bytes(), experiment
        assert a.to_csv_bytes() == b.to_csv_bytes(), experiment
    report(11, "re-runs byte-identical (json and csv) for norms, boconst, "
               "wavelet")
