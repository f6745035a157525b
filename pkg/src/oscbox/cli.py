"""Command line driver: `oscbox <experiment> [flags]`.

Writes a deterministic report (json or csv) and prints a human summary;
exit code 0 means every asserted check passed. `--replay WITNESS` re-runs
the single case a failing check serialized.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (EXPERIMENTS, ExperimentConfig, replay_witness,
                      run_experiment)
from .random_functions import FAMILIES


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="oscbox",
        description="oscillation/BMO experiment harness on finite ball-bases")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--depth", type=int, default=8, help="filtration tree depth")
    p.add_argument("--n", type=int, default=512, help="circle grid size (power of two)")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--r", type=float, default=1.0, help="integrability exponent")
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--beta", type=float, default=0.75)
    p.add_argument("--omega", choices=("one", "log"), default="log")
    p.add_argument("--family", choices=FAMILIES, default="random-uniform")
    p.add_argument("--eps", default="signs",
                   help="multiplier source: ones | signs | signs:<seed> | explicit:<file>")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="report file path")
    p.add_argument("--replay", default=None, metavar="WITNESS",
                   help="re-run the single case from a witness JSON file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.replay is not None:
        with open(args.replay, "r", encoding="utf-8") as fh:
            witness = json.load(fh)
        ok, detail = replay_witness(witness)
        print(f"{'PASS' if ok else 'FAIL'} replay {witness.get('check')}: {detail}")
        return 0 if ok else 1

    cfg = ExperimentConfig(
        experiment=args.experiment, depth=args.depth, n=args.n,
        trials=args.trials, seed=args.seed, r=args.r, alpha=args.alpha,
        beta=args.beta, omega_id=args.omega, function_family=args.family,
        eps_mode=args.eps, out=args.out, fmt=args.format)
    report = run_experiment(cfg)

    for c in report.checks:
        print(f"{c['status'].upper():7s} {c['name']}: {c['detail']}")
    print(f"experiment {report.experiment}: "
          f"{'PASS' if report.passed else 'FAIL'} "
          f"({len(report.records)} records, {report.wall_time_s:.2f}s)")

    payload = report.serialized(cfg.fmt)
    if cfg.out:
        with open(cfg.out, "wb") as fh:
            fh.write(payload)
        print(f"report written to {cfg.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
