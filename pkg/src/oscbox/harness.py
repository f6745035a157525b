"""Reproducible experiments over the oscillation toolbox.

Each experiment consumes an ExperimentConfig, runs seeded trials, and emits
a Report: per-trial records, summary statistics, and named checks with a
pass/fail/skipped status. Failing checks carry a witness dict that replays
the single offending case through `replay_witness`.

Reports are deterministic byte-for-byte given the same config: the master
seed splits into per-trial generators, and the wall-clock time is kept out
of the serialized form.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ball_basis import (MeasureTree, basis_report, build_dyadic_tree,
                         build_weighted_tree, hull, tree_from_json,
                         tree_to_json, two_balls_check, vitali_select,
                         exhausting_sequence)
from .functionals import (GridFunction, alpha_osc, bmo_alpha_norm, bmo_norm,
                          jn_profile, lr_average, node_alpha_oscs,
                          node_sharp_averages, ancestor_max, osc_set,
                          sharp_average)
from .martingale_ops import (TransformSpec, localization_defects_all,
                             martingale_family_values,
                             maximal_transform_values, osc_per_ball_columns,
                             restricted_matrix, square_function_values,
                             transform_values, vanishing_defect,
                             weak_l1_sup, transform)
from .random_functions import FAMILIES, rng_for_trial, sample_leaf_values
from .singular_ops import (CarlesonMaximalOp, CircleConvolutionOp, CircleGrid,
                           bo_omega_constant, carleson_maximal,
                           default_modulations, haar_system, hilbert_kernel,
                           kernel_smoothness_constant, wavelet_kernel,
                           wavelet_multiplier_apply)

SCHEMA = "oscbox-report/1"
EXPERIMENTS = ("axioms", "norms", "jn", "equiv", "oscbound", "boconst",
               "carleson", "wavelet", "martingale-exact")

EXACT_TOL = 1e-12       # scale-relative bound for identities that are exact
ENERGY_RTOL = 1e-10     # relative bound for the quadratic identities
STABILITY_FACTOR = 2.0  # allowed spread of empirical constants across scales


@dataclass
class ExperimentConfig:
    experiment: str
    depth: int = 8
    n: int = 512
    trials: int = 50
    seed: int = 7
    r: float = 1.0
    alpha: float = 0.9
    beta: float = 0.75
    omega_id: str = "log"
    function_family: str = "random-uniform"
    eps_mode: str = "signs"
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.depth < 1 or self.trials < 0 or self.seed < 0:
            raise ValueError("depth >= 1, trials >= 0, seed >= 0 required")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two >= 8")
        if self.r < 1.0 or not 0 < self.alpha < 1 or not 0 < self.beta < 1:
            raise ValueError("need r >= 1 and alpha, beta in (0, 1)")
        if self.omega_id not in ("one", "log"):
            raise ValueError("omega must be 'one' or 'log'")
        if self.function_family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.fmt not in ("json", "csv"):
            raise ValueError("format must be json or csv")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


@dataclass
class Report:
    experiment: str
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    schema: str = SCHEMA
    wall_time_s: float | None = None

    @property
    def passed(self) -> bool:
        return all(c["status"] != "fail" for c in self.checks)

    def add_check(self, name: str, ok, detail: str = "", witness: dict | None = None):
        status = "skipped" if ok is None else ("pass" if ok else "fail")
        row = {"name": name, "status": status, "detail": detail}
        if witness is not None:
            row["witness"] = witness
        self.checks.append(row)

    def to_dict(self) -> dict:
        # wall time is volatile; the serialized report must be reproducible
        return {
            "schema": self.schema,
            "experiment": self.experiment,
            "config": self.config,
            "passed": self.passed,
            "checks": self.checks,
            "summary": self.summary,
            "records": self.records,
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode()

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "key", "value"])
        w.writerow(["schema", "", "schema", self.schema])
        w.writerow(["experiment", "", "experiment", self.experiment])
        for k in sorted(self.config):
            w.writerow(["config", "", k, repr(self.config[k])])
        for i, c in enumerate(self.checks):
            w.writerow(["check", i, c["name"], c["status"]])
        for k in sorted(self.summary):
            w.writerow(["summary", "", k, repr(self.summary[k])])
        for i, rec in enumerate(self.records):
            for k in sorted(rec):
                w.writerow(["record", i, k, repr(rec[k])])
        w.writerow(["passed", "", "passed", repr(self.passed)])
        return buf.getvalue().encode()

    def serialized(self, fmt: str) -> bytes:
        return self.to_json_bytes() if fmt == "json" else self.to_csv_bytes()


def ratio_summary(values) -> dict:
    vals = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    if vals.size == 0:
        return {"count": 0}
    return {
        "count": int(vals.size),
        "max": float(vals.max()),
        "p99": float(np.percentile(vals, 99)),
        "median": float(np.median(vals)),
    }


def spread_factor(values) -> float:
    vals = [v for v in values if v > 0]
    return max(vals) / min(vals) if vals else 1.0


# ---------------------------------------------------------------------------
# witness plumbing


def make_witness(check: str, tree: MeasureTree | None = None, values=None,
                 **params) -> dict:
    w = {"check": check, "params": params}
    if tree is not None:
        w["tree"] = tree_to_json(tree)
    if values is not None:
        w["values"] = [float(v) for v in np.asarray(values).ravel()]
    return w


def _six_operators(tree: MeasureTree, eps_arr: np.ndarray) -> dict:
    mid = max(0, (tree.max_depth - 1) // 2)
    return {
        "transform": lambda m: transform_values(tree, m, eps_arr),
        "truncated": lambda m: transform_values(tree, m, eps_arr, upto=mid),
        "maximal-star": lambda m: maximal_transform_values(tree, m, eps_arr, "star"),
        "maximal-plus": lambda m: maximal_transform_values(tree, m, eps_arr, "plus"),
        "maximal-minus": lambda m: maximal_transform_values(tree, m, eps_arr, "minus"),
        "square": lambda m: square_function_values(tree, m),
    }


def eps_from_mode(tree: MeasureTree, mode: str, seed: int) -> TransformSpec:
    """--eps flag: 'ones', 'signs', 'signs:<seed>' or 'explicit:<path>'."""
    if mode == "ones":
        return TransformSpec.ones(tree)
    if mode == "signs":
        return TransformSpec.signs(tree, rng_for_trial(seed, 0, 97))
    if mode.startswith("signs:"):
        return TransformSpec.signs(tree, rng_for_trial(int(mode[6:]), 0, 97))
    if mode.startswith("explicit:"):
        with open(mode[9:], "r", encoding="utf-8") as fh:
            return TransformSpec.from_json(fh.read())
    raise ValueError(f"bad eps mode {mode!r}")


# ---------------------------------------------------------------------------
# experiments


def run_axioms(cfg: ExperimentConfig) -> Report:
    rep = Report("axioms", cfg.echo())
    tree = build_dyadic_tree(cfg.depth, 1)
    br = basis_report(tree)
    rep.add_check("dyadic-k-constant", br.k_constant == 2.0, f"K={br.k_constant}")
    rep.add_check("dyadic-doubling", br.doubling_constant == 2.0,
                  f"doubling={br.doubling_constant}")
    rep.add_check("dyadic-theta", 0.5 <= br.regularity_theta <= 1.0,
                  f"theta={br.regularity_theta}")
    rep.add_check("dyadic-axioms", not br.axiom_failures, str(br.axiom_failures),
                  None if not br.axiom_failures else make_witness("two-balls", tree))
    rep.summary["dyadic"] = {"k": br.k_constant, "doubling": br.doubling_constant,
                             "theta": br.regularity_theta}

    bad_weighted = []
    bad_chain = []
    bad_vitali = []
    for t in range(cfg.trials):
        rng = rng_for_trial(cfg.seed, t)
        depth = int(rng.integers(1, 4))
        branching = [int(rng.integers(2, 4)) for _ in range(depth)]
        weights = rng.integers(1, 10, size=math.prod(branching)).astype(float)
        wt = build_weighted_tree(branching, weights)
        wbr = basis_report(wt)
        rec = {"trial": t, "k": wbr.k_constant, "doubling": wbr.doubling_constant,
               "theta": wbr.regularity_theta}
        rep.records.append(rec)
        if wbr.axiom_failures or not (1.0 <= wbr.k_constant <= 2.0):
            bad_weighted.append(make_witness("two-balls", wt))

        g = wt.ball(int(rng.integers(0, wt.n_nodes)))
        chain = exhausting_sequence(wt, g)
        gamma = 2.0 * wbr.doubling_constant
        ok = chain[-1].node == wt.root
        for a, b in zip(chain, chain[1:]):
            if not wt.contains(b.node, int(wt.hull_id[a.node])):
                ok = False
            if b.node != wt.root and not (
                    2.0 * a.measure <= b.measure <= gamma * a.measure):
                ok = False
        if not ok:
            bad_chain.append(make_witness("exhausting", wt, node=g.node))

        w_vit = _vitali_case(tree, rng)
        if w_vit is not None:
            bad_vitali.append(w_vit)

    rep.add_check("weighted-axioms", not bad_weighted,
                  f"{len(bad_weighted)} failing trees",
                  bad_weighted[0] if bad_weighted else None)
    rep.add_check("exhausting-chains", not bad_chain,
                  f"{len(bad_chain)} bad chains",
                  bad_chain[0] if bad_chain else None)
    rep.add_check("vitali-covering", not bad_vitali,
                  f"{len(bad_vitali)} bad selections",
                  bad_vitali[0] if bad_vitali else None)
    return rep


def _vitali_case(tree: MeasureTree, rng) -> dict | None:
    """One random covering instance; returns a witness on failure."""
    n_leaves = tree.n_leaves
    k = int(rng.integers(1, n_leaves + 1))
    picks = rng.choice(n_leaves, size=k, replace=False)
    e_leaves = [int(tree.leaves[i]) for i in picks]
    family_ids = set()
    for i in picks:
        leaf = int(tree.leaves[i])
        anc = list(tree.ancestors(leaf))
        family_ids.add(int(anc[int(rng.integers(0, len(anc)))]))
    extra = rng.integers(0, tree.n_nodes, size=3)
    family_ids.update(int(v) for v in extra
                      if not any(tree.contains(u, int(v)) or tree.contains(int(v), u)
                                 for u in family_ids))
    family = [tree.ball(v) for v in sorted(family_ids)]
    if not _check_vitali(tree, e_leaves, [b.node for b in family]):
        return make_witness("vitali", tree, e_leaves=e_leaves,
                            family=[b.node for b in family])
    return None


def _check_vitali(tree: MeasureTree, e_leaves, family_ids) -> bool:
    family = [tree.ball(v) for v in family_ids]
    sel = vitali_select(tree, e_leaves, family)
    spans = [(tree.leaf_lo[b.node], tree.leaf_hi[b.node]) for b in sel]
    for i, (lo1, hi1) in enumerate(spans):
        for lo2, hi2 in spans[i + 1:]:
            if max(lo1, lo2) < min(hi1, hi2):
                return False
    covered = np.zeros(tree.n_leaves, dtype=bool)
    for b in sel:
        h = int(tree.hull_id[b.node])
        covered[tree.leaf_lo[h]:tree.leaf_hi[h]] = True
    pos = {int(v): i for i, v in enumerate(tree.leaves)}
    if not all(covered[pos[int(v)]] for v in e_leaves):
        return False
    e_measure = math.fsum(float(tree.measure[int(v)]) for v in e_leaves)
    return math.fsum(b.measure for b in sel) >= e_measure / 2.0


def run_norms(cfg: ExperimentConfig) -> Report:
    rep = Report("norms", cfg.echo())
    tree = build_dyadic_tree(cfg.depth, 1)
    worst = {"translation": 0.0, "homogeneity": 0.0, "triangle": 0.0}
    failures = {}
    for t in range(cfg.trials):
        rng = rng_for_trial(cfg.seed, t)
        f = GridFunction(tree, sample_leaf_values(cfg.function_family, tree, rng))
        scale = max(1.0, float(np.abs(f.values).max()))
        b = bmo_norm(f, cfg.r)
        ba = bmo_alpha_norm(f, cfg.alpha)
        rep.records.append({"trial": t, "bmo": b, "bmo_alpha": ba})

        shift = float(rng.uniform(-3, 3))
        worst["translation"] = max(
            worst["translation"],
            abs(bmo_norm(f.shifted(shift), cfg.r) - b),
            abs(bmo_alpha_norm(f.shifted(shift), cfg.alpha) - ba))
        c = float(rng.uniform(0.1, 4.0)) * (1.0 if t % 2 else -1.0)
        worst["homogeneity"] = max(
            worst["homogeneity"],
            abs(bmo_norm(f.scaled(c), cfg.r) - abs(c) * b),
            abs(bmo_alpha_norm(f.scaled(c), cfg.alpha) - abs(c) * ba))

        root = tree.ball(tree.root)
        grid_a = [0.2, 0.4, 0.6, 0.8]
        oscs = [alpha_osc(f, root, a) for a in grid_a]
        if any(x > y for x, y in zip(oscs, oscs[1:])):
            failures.setdefault("alpha-monotone", make_witness(
                "alpha-monotone", tree, f.values, alphas=grid_a))
        if oscs[-1] > osc_set(f, [int(v) for v in tree.leaves]) + EXACT_TOL * scale:
            failures.setdefault("alpha-below-osc", make_witness(
                "alpha-monotone", tree, f.values, alphas=grid_a))
        sa = sharp_average(f, root, cfg.r)
        la = lr_average(f, root, cfg.r)
        worst["triangle"] = max(worst["triangle"], sa - 2.0 * la)
        if not ba <= 2.0 / (1.0 - cfg.alpha) * b:
            failures.setdefault("forward-bmo", make_witness(
                "forward-bmo", tree, f.values, alpha=cfg.alpha, r=cfg.r))
        prof = jn_profile(f, root, [k * 0.25 for k in range(8)])
        if any(p < q for p, q in zip(prof, prof[1:])) or not all(
                0.0 <= p <= 1.0 for p in prof):
            failures.setdefault("jn-monotone", make_witness(
                "jn-monotone", tree, f.values))

        # small-tree oracle: window alpha-oscillation vs exhaustive subsets
        small = _random_small_tree(rng)
        fs = GridFunction(small, sample_leaf_values("random-uniform", small, rng))
        al = float(rng.uniform(0.05, 0.95))
        node = int(rng.integers(0, small.n_nodes))
        got = alpha_osc(fs, small.ball(node), al)
        want = brute_alpha_osc(small, fs.values, node, al)
        if got != want:
            failures.setdefault("alpha-oracle", make_witness(
                "alpha-oracle", small, fs.values, alpha=al, node=node))

    rep.add_check("translation-invariance", worst["translation"] <= 1e-9,
                  f"worst drift {worst['translation']:.3e}")
    rep.add_check("homogeneity", worst["homogeneity"] <= 1e-9,
                  f"worst drift {worst['homogeneity']:.3e}")
    rep.add_check("sharp-le-2lr", worst["triangle"] <= 1e-12,
                  f"worst excess {worst['triangle']:.3e}")
    for name in ("alpha-monotone", "alpha-below-osc", "forward-bmo",
                 "jn-monotone", "alpha-oracle"):
        rep.add_check(name, name not in failures, "",
                      failures.get(name))
    rep.summary["bmo"] = ratio_summary(r["bmo"] for r in rep.records)
    return rep


def _random_small_tree(rng) -> MeasureTree:
    b1 = int(rng.integers(2, 4))
    b2 = int(rng.integers(2, 5))
    weights = rng.integers(1, 10, size=b1 * b2).astype(float)
    return build_weighted_tree([b1, b2], weights)


def brute_alpha_osc(tree: MeasureTree, leaf_vals, node: int, alpha: float) -> float:
    """Exhaustive oracle: min oscillation over all leaf subsets of the node
    with measure strictly above alpha * mu(node). Exponential; small trees only."""
    lo, hi = int(tree.leaf_lo[node]), int(tree.leaf_hi[node])
    m = hi - lo
    if m > 16:
        raise ValueError("oracle limited to 16 leaves")
    vals = list(map(float, leaf_vals[lo:hi]))
    wts = list(map(float, tree.leaf_measure[lo:hi]))
    threshold = alpha * float(tree.measure[node])
    best = math.inf
    for mask in range(1, 1 << m):
        sel = [i for i in range(m) if mask >> i & 1]
        if math.fsum(wts[i] for i in sel) > threshold:
            picked = [vals[i] for i in sel]
            best = min(best, max(picked) - min(picked))
    return best


def run_jn(cfg: ExperimentConfig) -> Report:
    rep = Report("jn", cfg.echo())
    tree = build_dyadic_tree(cfg.depth, 1)
    br = basis_report(tree)
    gamma = 2.0 * br.doubling_constant
    theta = br.regularity_theta
    kk = br.k_constant
    contraction_eps = 0.5
    threshold = theta / (5.0 * kk * gamma * gamma)
    alpha_adm = 1.0 - contraction_eps * theta / (4.0 * gamma * gamma * kk)
    rep.summary["basis"] = {"theta": theta, "gamma": gamma, "K": kk,
                            "threshold": threshold, "alpha_adm": alpha_adm,
                            "alpha_adm_gt_half": alpha_adm > 0.5}

    root = tree.ball(tree.root)
    n_trials = 1 if cfg.function_family in ("staircase", "indicator") else cfg.trials
    fits, bad_fit, bad_contraction = [], 0, None
    for t in range(n_trials):
        f = GridFunction(tree, sample_leaf_values(
            cfg.function_family, tree, rng_for_trial(cfg.seed, t)))
        s = bmo_norm(f, cfg.r)
        if s == 0.0:
            rep.records.append({"trial": t, "bmo": 0.0, "fit_q": 0.0})
            continue
        max_dev = float(np.abs(f.values - np.dot(
            f.values, tree.leaf_measure) / tree.measure[tree.root]).max())
        n_steps = int(max_dev / s) + 2
        lambdas = [k * s for k in range(n_steps + 1)]
        prof = jn_profile(f, root, lambdas)
        rec = {"trial": t, "bmo": s}
        for i, p in enumerate(prof):
            rec[f"p{i}"] = p

        pairs = [(p, q) for p, q in zip(prof, prof[1:]) if p > 0 and q > 0]
        if len(pairs) >= 2:
            q_fit = float(np.exp(np.mean([np.log(q / p) for p, q in pairs])))
            fits.append(q_fit)
            rec["fit_q"] = q_fit
        else:
            bad_fit += 1
            rec["fit_q"] = float("nan")
        rep.records.append(rec)

        for p, q in zip(prof, prof[1:]):
            if 0.0 < p <= threshold and not q <= contraction_eps * p:
                bad_contraction = make_witness(
                    "jn-contraction", tree, f.values,
                    r=cfg.r, threshold=threshold, eps=contraction_eps)

    if fits:
        rep.add_check("jn-fit-geometric", all(q < 1.0 for q in fits),
                      f"fitted q max {max(fits):.4f}")
    else:
        rep.add_check("jn-fit-geometric", None, "ill-conditioned fit: "
                      f"{bad_fit} trials had under 2 positive level-set steps")
    if bad_fit and fits:
        rep.add_check("jn-fit-conditioning", None,
                      f"{bad_fit}/{n_trials} trials unfit for the decay fit")
    rep.add_check("jn-halving", bad_contraction is None,
                  f"threshold {threshold:.5f}, eps {contraction_eps}",
                  bad_contraction)
    rep.summary["fit_q"] = ratio_summary(fits)
    return rep


def run_equiv(cfg: ExperimentConfig, depths=(6, 8, 10)) -> Report:
    rep = Report("equiv", cfg.echo())
    bound = 2.0 / (1.0 - cfg.alpha)
    per_depth_max = {}
    bad_forward = None
    for depth in depths:
        tree = build_dyadic_tree(depth, 1)
        ratios = []
        for t in range(cfg.trials):
            f = GridFunction(tree, sample_leaf_values(
                cfg.function_family, tree, rng_for_trial(cfg.seed, depth, t)))
            b = bmo_norm(f, cfg.r)
            ba = bmo_alpha_norm(f, cfg.alpha)
            if not ba <= bound * b:
                bad_forward = make_witness("forward-bmo", tree, f.values,
                                           alpha=cfg.alpha, r=cfg.r)
            if ba > 0.0:
                ratios.append(b / ba)
        per_depth_max[depth] = max(ratios) if ratios else 0.0
        rep.records.append({"depth": depth, "max_ratio": per_depth_max[depth],
                            **{f"ratio_{k}": v for k, v in
                               ratio_summary(ratios).items()}})
    rep.add_check("forward-bmo", bad_forward is None,
                  f"bound 2/(1-alpha) = {bound:.3f}", bad_forward)
    vals = list(per_depth_max.values())
    spread = (max(vals) - min(vals)) / min(vals) if min(vals) > 0 else 0.0
    rep.add_check("converse-stability", spread <= 0.25,
                  f"max ratios {vals}, spread {spread:.3f}",
                  None if spread <= 0.25 else make_witness(
                      "stability", values=vals, factor=1.25))
    rep.summary["per_depth_max"] = {str(k): v for k, v in per_depth_max.items()}
    return rep


def run_oscbound(cfg: ExperimentConfig) -> Report:
    rep = Report("oscbound", cfg.echo())
    depths = sorted({max(2, cfg.depth - 4), max(2, cfg.depth - 2), cfg.depth})
    stats = {"sharp": {}, "inf": {}}
    zero_den = 0
    for depth in depths:
        tree = build_dyadic_tree(depth, 1)
        max_sharp, max_inf = 0.0, 0.0
        for t in range(cfg.trials):
            rng = rng_for_trial(cfg.seed, depth, t)
            f_vals = sample_leaf_values(cfg.function_family, tree, rng)
            eps_arr = TransformSpec.signs(tree, rng).as_array(tree)
            sup_norm = float(np.abs(f_vals).max())
            den_sharp = ancestor_max(tree, node_sharp_averages(tree, f_vals, cfg.r))
            for mode in ("star", "plus", "minus"):
                tv = maximal_transform_values(tree, f_vals, eps_arr, mode)
                osc_b = node_alpha_oscs(tree, tv, cfg.beta)
                live = den_sharp > 0.0
                zero_den += int(np.count_nonzero(~live))
                if np.any(live):
                    max_sharp = max(max_sharp,
                                    float(np.max(osc_b[live] / den_sharp[live])))
                if sup_norm > 0.0:
                    max_inf = max(max_inf, float(np.max(osc_b)) / sup_norm)
        stats["sharp"][depth] = max_sharp
        stats["inf"][depth] = max_inf
        rep.records.append({"depth": depth, "max_ratio_sharp": max_sharp,
                            "max_ratio_inf": max_inf})
    for kind in ("sharp", "inf"):
        vals = list(stats[kind].values())
        rep.add_check(f"finite-{kind}", all(math.isfinite(v) for v in vals),
                      f"{vals}")
        fac = spread_factor(vals)
        rep.add_check(f"stability-{kind}", fac <= STABILITY_FACTOR,
                      f"factor {fac:.3f} across depths {depths}",
                      None if fac <= STABILITY_FACTOR else
                      make_witness("stability", values=vals,
                                   factor=STABILITY_FACTOR))
    rep.summary["skipped_zero_denominator"] = zero_den
    return rep


def run_boconst(cfg: ExperimentConfig) -> Report:
    rep = Report("boconst", cfg.echo())
    tree = build_dyadic_tree(cfg.depth, 1)
    ident = bo_omega_constant(lambda v: v, tree, cfg.omega_id, cfg.trials,
                              cfg.seed, cfg.r, cfg.function_family)
    rep.add_check("identity-zero", ident <= EXACT_TOL, f"L = {ident:.3e}")

    eps_arr = eps_from_mode(tree, cfg.eps_mode, cfg.seed).as_array(tree)
    mart = bo_omega_constant(
        lambda v: transform_values(tree, v, eps_arr), tree, cfg.omega_id,
        cfg.trials, cfg.seed, cfg.r, cfg.function_family)
    rep.add_check("martingale-zero", mart <= EXACT_TOL, f"L = {mart:.3e}",
                  None if mart <= EXACT_TOL else make_witness(
                      "bo-martingale", tree, omega=cfg.omega_id,
                      trials=cfg.trials, seed=cfg.seed, r=cfg.r,
                      family=cfg.function_family,
                      eps=[float(x) for x in eps_arr]))

    hilbert_vals = {}
    for n in sorted({max(8, cfg.n // 4), max(8, cfg.n // 2), cfg.n}):
        grid = CircleGrid(n)
        op = CircleConvolutionOp(grid, hilbert_kernel(grid))
        hilbert_vals[n] = bo_omega_constant(op, grid.arc_tree, cfg.omega_id,
                                            cfg.trials, cfg.seed, cfg.r,
                                            cfg.function_family)
        rep.records.append({"op": "hilbert", "n": n, "bo": hilbert_vals[n]})
    fac = spread_factor(hilbert_vals.values())
    rep.add_check("hilbert-finite",
                  all(math.isfinite(v) for v in hilbert_vals.values()),
                  f"{hilbert_vals}")
    rep.add_check("hilbert-stability", fac <= STABILITY_FACTOR,
                  f"factor {fac:.3f} across n",
                  None if fac <= STABILITY_FACTOR else
                  make_witness("stability", values=list(hilbert_vals.values()),
                               factor=STABILITY_FACTOR))

    grid = CircleGrid(cfg.n)
    kern = hilbert_kernel(grid)
    car = CarlesonMaximalOp(grid, kern, default_modulations())
    car_bo = bo_omega_constant(car, grid.arc_tree, cfg.omega_id, cfg.trials,
                               cfg.seed, cfg.r, cfg.function_family)
    rep.records.append({"op": "carleson", "n": cfg.n, "bo": car_bo})
    # discrete log-Dini sum of the tabulated kernel modulus at dyadic ratios
    log_dini = float(sum((k + 1) * w for k, w in enumerate(kern.modulus)))
    rep.summary["bo"] = {"identity": ident, "martingale": mart,
                         "hilbert": {str(k): v for k, v in hilbert_vals.items()},
                         "carleson": car_bo}
    rep.summary["kernel"] = {"size_bound": kern.size_bound,
                             "log_dini_sum": log_dini,
                             "smoothness_constant":
                                 kernel_smoothness_constant(kern)}
    return rep


def run_carleson(cfg: ExperimentConfig) -> Report:
    rep = Report("carleson", cfg.echo())
    mods = default_modulations()
    per_n_max = {}
    for n in sorted({max(8, cfg.n // 4), max(8, cfg.n // 2), cfg.n}):
        grid = CircleGrid(n)
        kern = hilbert_kernel(grid)
        tree = grid.arc_tree
        ratios = []
        for t in range(cfg.trials):
            f_vals = sample_leaf_values(cfg.function_family, tree,
                                        rng_for_trial(cfg.seed, n, t))
            sup = float(np.abs(f_vals).max())
            if sup == 0.0:
                continue
            out = carleson_maximal(grid, kern, mods, f_vals)
            ratios.append(float(node_sharp_averages(tree, out, cfg.r).max()) / sup)
        per_n_max[n] = max(ratios) if ratios else 0.0
        rep.records.append({"n": n, "max_ratio": per_n_max[n],
                            **{f"ratio_{k}": v for k, v in
                               ratio_summary(ratios).items()}})
    fac = spread_factor(per_n_max.values())
    rep.add_check("bmo-ratio-finite",
                  all(math.isfinite(v) for v in per_n_max.values()),
                  f"{per_n_max}")
    rep.add_check("cross-n-stability", fac <= STABILITY_FACTOR,
                  f"factor {fac:.3f}",
                  None if fac <= STABILITY_FACTOR else
                  make_witness("stability", values=list(per_n_max.values()),
                               factor=STABILITY_FACTOR))
    rep.summary["per_n_max"] = {str(k): v for k, v in per_n_max.items()}
    return rep


def run_martingale_exact(cfg: ExperimentConfig) -> Report:
    rep = Report("martingale-exact", cfg.echo())
    tree = build_dyadic_tree(cfg.depth, 1)
    mu_leaf = tree.leaf_measure
    worst = {"localization": 0.0, "telescoping": 0.0, "energy": 0.0,
             "meanzero": 0.0, "linearity": 0.0}
    witnesses = {}
    dom_fail = lattice_fail = weak_fail = None
    ones_arr = TransformSpec.ones(tree).as_array(tree)

    for t in range(cfg.trials):
        rng = rng_for_trial(cfg.seed, t)
        f_vals = sample_leaf_values(cfg.function_family, tree, rng)
        sup = max(float(np.abs(f_vals).max()), 1e-300)
        eps = TransformSpec.signs(tree, rng)
        eps_arr = eps.as_array(tree)

        restricted = restricted_matrix(tree, f_vals)
        family = martingale_family_values(tree, restricted, eps_arr,
                                          max(0, (tree.max_depth - 1) // 2))
        for name, out_mat in family.items():
            d = float(osc_per_ball_columns(tree, out_mat).max())
            if d > worst["localization"]:
                worst["localization"] = d
                if d > EXACT_TOL * sup:
                    witnesses.setdefault("localization", make_witness(
                        "localization-defect", tree, f_vals, op=name,
                        eps=[float(x) for x in eps_arr],
                        level=max(0, (tree.max_depth - 1) // 2),
                        bound=EXACT_TOL))

        f_mean = float(np.dot(f_vals, mu_leaf) / tree.measure[tree.root])
        tele = float(np.abs(transform_values(tree, f_vals, ones_arr)
                            - (f_vals - f_mean)).max())
        if tele > worst["telescoping"]:
            worst["telescoping"] = tele
            if tele > EXACT_TOL * sup:
                witnesses.setdefault("telescoping", make_witness(
                    "telescoping", tree, f_vals, bound=EXACT_TOL))

        sq = square_function_values(tree, f_vals)
        lhs = float(np.dot(sq * sq, mu_leaf))
        rhs = float(np.dot((f_vals - f_mean) ** 2, mu_leaf))
        rel = abs(lhs - rhs) / max(rhs, 1e-300)
        if rel > worst["energy"]:
            worst["energy"] = rel
            if rel > ENERGY_RTOL:
                witnesses.setdefault("energy", make_witness(
                    "energy-identity", tree, f_vals, bound=ENERGY_RTOL))

        node = int(rng.integers(0, tree.n_nodes))
        while not tree.children[node]:
            node = int(tree.parent[node])
        diff = transform_values(tree, f_vals, _single_eps(tree, node))
        worst["meanzero"] = max(worst["meanzero"],
                                abs(float(np.dot(diff, mu_leaf))))

        g_vals = sample_leaf_values(cfg.function_family, tree, rng)
        a, b = float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))
        lin = float(np.abs(
            transform_values(tree, a * f_vals + b * g_vals, eps_arr)
            - a * transform_values(tree, f_vals, eps_arr)
            - b * transform_values(tree, g_vals, eps_arr)).max())
        worst["linearity"] = max(worst["linearity"], lin)

        star = maximal_transform_values(tree, f_vals, eps_arr, "star")
        plus = maximal_transform_values(tree, f_vals, eps_arr, "plus")
        minus = maximal_transform_values(tree, f_vals, eps_arr, "minus")
        for lev in range(tree.max_depth):
            part = transform_values(tree, f_vals, eps_arr, upto=lev)
            if not np.all(star >= np.abs(part)):
                dom_fail = make_witness("domination", tree, f_vals,
                                        eps=[float(x) for x in eps_arr],
                                        level=lev)
        if not np.array_equal(star, np.maximum(plus, -minus)):
            lattice_fail = make_witness("lattice", tree, f_vals,
                                        eps=[float(x) for x in eps_arr])

        sup_w, norm1 = weak_l1_sup(GridFunction(tree, f_vals))
        if not sup_w <= norm1:
            weak_fail = make_witness("weak-l1", tree, f_vals)
        rep.records.append({"trial": t, "max_localization": worst["localization"],
                            "weak11_ratio": sup_w / norm1 if norm1 else 0.0})

    vanish = _vanishing_sweep(tree, cfg)
    rep.add_check("localization-exact", worst["localization"] <= EXACT_TOL,
                  f"max defect {worst['localization']:.3e}",
                  witnesses.get("localization"))
    rep.add_check("telescoping", worst["telescoping"] <= EXACT_TOL,
                  f"max err {worst['telescoping']:.3e}",
                  witnesses.get("telescoping"))
    rep.add_check("energy-identity", worst["energy"] <= ENERGY_RTOL,
                  f"max rel err {worst['energy']:.3e}", witnesses.get("energy"))
    rep.add_check("mean-zero", worst["meanzero"] <= EXACT_TOL,
                  f"max integral {worst['meanzero']:.3e}")
    rep.add_check("linearity", worst["linearity"] <= EXACT_TOL,
                  f"max err {worst['linearity']:.3e}")
    rep.add_check("star-domination", dom_fail is None, "", dom_fail)
    rep.add_check("star-lattice", lattice_fail is None, "", lattice_fail)
    rep.add_check("weak-l1", weak_fail is None, "sup lam*mu{Mf>lam} <= ||f||_1",
                  weak_fail)
    rep.add_check("vanishing", vanish <= EXACT_TOL, f"max defect {vanish:.3e}")
    rep.summary["worst"] = worst
    return rep


def _single_eps(tree: MeasureTree, node: int) -> np.ndarray:
    arr = np.zeros(tree.n_nodes)
    arr[node] = 1.0
    return arr


def _vanishing_sweep(tree: MeasureTree, cfg: ExperimentConfig) -> float:
    eps = eps_from_mode(tree, cfg.eps_mode, cfg.seed)
    root = tree.ball(tree.root)
    worst = 0.0
    for v in range(tree.n_nodes):
        b = tree.ball(v)
        for bpp in (root, hull(tree, b)):
            worst = max(worst, vanishing_defect(
                tree, lambda g: transform(g, eps), b, bpp))
        worst = max(worst, vanishing_defect(
            tree, lambda g: GridFunction(tree, square_function_values(
                tree, g.values)), b, root))
    return worst


def run_wavelet(cfg: ExperimentConfig) -> Report:
    rep = Report("wavelet", cfg.echo())
    grid = CircleGrid(cfg.n)
    system = haar_system(grid)
    phi = system.functions
    x = grid.points
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.nan)

    gram_err = float(np.abs(phi.T @ phi / grid.n - np.eye(grid.n)).max())
    rep.add_check("haar-orthonormal", gram_err <= EXACT_TOL,
                  f"gram err {gram_err:.3e}")

    rng0 = rng_for_trial(cfg.seed, 0, 11)
    f0 = rng0.uniform(-1, 1, grid.n)
    rt = float(np.abs(wavelet_multiplier_apply(system, np.ones(grid.n), f0)
                      - f0).max())
    rep.add_check("haar-roundtrip", rt <= EXACT_TOL * max(np.abs(f0).max(), 1.0),
                  f"err {rt:.3e}",
                  None if rt <= EXACT_TOL else make_witness(
                      "wavelet-roundtrip", values=f0, n=grid.n, bound=EXACT_TOL))

    decay_c = system.decay_envelope_constant()
    rep.add_check("decay-envelope", decay_c <= 2.0, f"c = {decay_c:.4f}")

    kernel_consts, contraction_excess = [], 0.0
    lam0_defect = 0.0
    bad_y1 = None
    for t in range(cfg.trials):
        rng = rng_for_trial(cfg.seed, t)
        lam = rng.uniform(-1.0, 1.0, grid.n)
        kmat = wavelet_kernel(system, lam)
        c = float(np.nanmax(np.abs(kmat) * dist))
        kernel_consts.append(c)
        if c > 3.0 and bad_y1 is None:
            bad_y1 = make_witness("wavelet-y1", values=lam, n=grid.n, bound=3.0)
        fv = rng.uniform(-1.0, 1.0, grid.n)
        out = wavelet_multiplier_apply(system, lam, fv)
        l2_in = float(np.sqrt(np.dot(fv, fv) / grid.n))
        l2_out = float(np.sqrt(np.dot(out, out) / grid.n))
        contraction_excess = max(contraction_excess, l2_out - l2_in)
        const = wavelet_multiplier_apply(system, lam, np.ones(grid.n))
        lam0_defect = max(lam0_defect,
                          float(np.abs(const - lam[0]).max()))
        rep.records.append({"trial": t, "y1_constant": c, "l2_ratio":
                            l2_out / l2_in if l2_in else 0.0})
    rep.add_check("kernel-size-bound", max(kernel_consts) <= 3.0,
                  f"max |K|*dist = {max(kernel_consts):.4f}", bad_y1)
    rep.add_check("multiplier-contraction",
                  contraction_excess <= EXACT_TOL,
                  f"worst excess {contraction_excess:.3e}")
    rep.add_check("constant-to-lambda0", lam0_defect <= EXACT_TOL,
                  f"max defect {lam0_defect:.3e}")
    rep.summary["y1"] = ratio_summary(kernel_consts)
    return rep


_RUNNERS = {
    "axioms": run_axioms,
    "norms": run_norms,
    "jn": run_jn,
    "equiv": run_equiv,
    "oscbound": run_oscbound,
    "boconst": run_boconst,
    "carleson": run_carleson,
    "wavelet": run_wavelet,
    "martingale-exact": run_martingale_exact,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    t0 = time.perf_counter()
    rep = _RUNNERS[cfg.experiment](cfg)
    rep.wall_time_s = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# witness replay


def _witness_tree(w) -> MeasureTree:
    return tree_from_json(w["tree"])


def _witness_values(w, tree) -> np.ndarray:
    vals = np.asarray(w["values"], dtype=float)
    return vals.reshape(tree.n_leaves) if tree is not None else vals


def _replay_localization(w):
    tree = _witness_tree(w)
    vals = _witness_values(w, tree)
    p = w["params"]
    eps_arr = np.asarray(p["eps"], dtype=float)
    op = _six_operators(tree, eps_arr)[p["op"]]
    d = float(localization_defects_all(tree, op, vals).max())
    bound = p["bound"] * max(float(np.abs(vals).max()), 1e-300)
    return d <= bound, f"defect {d:.3e} vs bound {bound:.3e}"


def _replay_telescoping(w):
    tree = _witness_tree(w)
    vals = _witness_values(w, tree)
    ones_arr = TransformSpec.ones(tree).as_array(tree)
    f_mean = float(np.dot(vals, tree.leaf_measure) / tree.measure[tree.root])
    err = float(np.abs(transform_values(tree, vals, ones_arr)
                       - (vals - f_mean)).max())
    bound = w["params"]["bound"] * max(float(np.abs(vals).max()), 1e-300)
    return err <= bound, f"err {err:.3e} vs bound {bound:.3e}"


def _replay_energy(w):
    tree = _witness_tree(w)
    vals = _witness_values(w, tree)
    f_mean = float(np.dot(vals, tree.leaf_measure) / tree.measure[tree.root])
    sq = square_function_values(tree, vals)
    lhs = float(np.dot(sq * sq, tree.leaf_measure))
    rhs = float(np.dot((vals - f_mean) ** 2, tree.leaf_measure))
    rel = abs(lhs - rhs) / max(rhs, 1e-300)
    return rel <= w["params"]["bound"], f"rel err {rel:.3e}"


def _replay_forward_bmo(w):
    tree = _witness_tree(w)
    f = GridFunction(tree, _witness_values(w, tree))
    p = w["params"]
    ba = bmo_alpha_norm(f, p["alpha"])
    b = bmo_norm(f, p["r"])
    ok = ba <= 2.0 / (1.0 - p["alpha"]) * b
    return ok, f"bmo_alpha {ba:.6f} vs bound {2.0 / (1.0 - p['alpha']) * b:.6f}"


def _replay_alpha_oracle(w):
    tree = _witness_tree(w)
    vals = _witness_values(w, tree)
    p = w["params"]
    got = alpha_osc(GridFunction(tree, vals), tree.ball(p["node"]), p["alpha"])
    want = brute_alpha_osc(tree, vals, p["node"], p["alpha"])
    return got == want, f"window {got!r} vs oracle {want!r}"


def _replay_weak_l1(w):
    tree = _witness_tree(w)
    sup, norm1 = weak_l1_sup(GridFunction(tree, _witness_values(w, tree)))
    return sup <= norm1, f"sup {sup:.6f} vs ||f||_1 {norm1:.6f}"


def _replay_two_balls(w):
    tree = _witness_tree(w)
    bad = two_balls_check(tree)
    return not bad, f"{len(bad)} violating pairs"


def _replay_vitali(w):
    tree = _witness_tree(w)
    p = w["params"]
    ok = _check_vitali(tree, p["e_leaves"], p["family"])
    return ok, "selection disjoint, hulls cover E, mass >= mu(E)/2" if ok \
        else "selection violates the covering guarantees"


def _replay_jn_contraction(w):
    tree = _witness_tree(w)
    f = GridFunction(tree, _witness_values(w, tree))
    p = w["params"]
    s = bmo_norm(f, p["r"])
    if s == 0.0:
        return True, "constant function"
    max_dev = float(np.abs(f.values - np.dot(
        f.values, tree.leaf_measure) / tree.measure[tree.root]).max())
    prof = jn_profile(f, tree.ball(tree.root),
                      [k * s for k in range(int(max_dev / s) + 3)])
    for pa, pb in zip(prof, prof[1:]):
        if 0.0 < pa <= p["threshold"] and not pb <= p["eps"] * pa:
            return False, f"fraction {pa:.3e} -> {pb:.3e} misses eps {p['eps']}"
    return True, "halving pattern holds"


def _replay_stability(w):
    vals = w["params"].get("values") or w.get("values")
    factor = w["params"]["factor"]
    fac = spread_factor(vals)
    return fac <= factor, f"spread factor {fac:.3f} vs allowed {factor}"


def _replay_bo_martingale(w):
    tree = _witness_tree(w)
    p = w["params"]
    eps_arr = np.asarray(p["eps"], dtype=float)
    val = bo_omega_constant(lambda v: transform_values(tree, v, eps_arr),
                            tree, p["omega"], p["trials"], p["seed"], p["r"],
                            p["family"])
    return val <= EXACT_TOL, f"L = {val:.3e}"


def _replay_wavelet_roundtrip(w):
    grid = CircleGrid(w["params"]["n"])
    system = haar_system(grid)
    f0 = np.asarray(w["values"], dtype=float)
    err = float(np.abs(wavelet_multiplier_apply(
        system, np.ones(grid.n), f0) - f0).max())
    return err <= w["params"]["bound"], f"err {err:.3e}"


def _replay_wavelet_y1(w):
    grid = CircleGrid(w["params"]["n"])
    system = haar_system(grid)
    lam = np.asarray(w["values"], dtype=float)
    kmat = wavelet_kernel(system, lam)
    x = grid.points
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.nan)
    c = float(np.nanmax(np.abs(kmat) * dist))
    return c <= w["params"]["bound"], f"|K|*dist = {c:.4f}"


REPLAY_HANDLERS = {
    "localization-defect": _replay_localization,
    "telescoping": _replay_telescoping,
    "energy-identity": _replay_energy,
    "forward-bmo": _replay_forward_bmo,
    "alpha-oracle": _replay_alpha_oracle,
    "weak-l1": _replay_weak_l1,
    "two-balls": _replay_two_balls,
    "vitali": _replay_vitali,
    "jn-contraction": _replay_jn_contraction,
    "stability": _replay_stability,
    "bo-martingale": _replay_bo_martingale,
    "wavelet-roundtrip": _replay_wavelet_roundtrip,
    "wavelet-y1": _replay_wavelet_y1,
}


def replay_witness(witness: dict):
    """Re-run the single case a failing check serialized; returns (ok, detail)."""
    check = witness.get("check")
    handler = REPLAY_HANDLERS.get(check)
    if handler is None:
        raise ValueError(f"no replay handler for check {check!r}")
    return handler(witness)
