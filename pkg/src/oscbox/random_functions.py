"""Seeded test-function families shared by the experiments.

Seed-splitting: every trial gets its own generator derived from the master
seed and the trial index, so results do not depend on scheduling order.
"""

from __future__ import annotations

import numpy as np

from .ball_basis import MeasureTree

FAMILIES = ("random-uniform", "random-signs", "staircase", "indicator")


def rng_for_trial(seed: int, *indices: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.PCG64(ss))


def staircase_values(n_leaves: int, steps: int) -> np.ndarray:
    """sum_{k=1..steps} of the indicator of the first 2^-k of the leaves."""
    vals = np.zeros(n_leaves)
    for k in range(1, steps + 1):
        cut = n_leaves >> k
        if cut == 0:
            break
        vals[:cut] += 1.0
    return vals


def sample_leaf_values(family: str, tree: MeasureTree,
                       rng: np.random.Generator) -> np.ndarray:
    if family == "random-uniform":
        return rng.uniform(-1.0, 1.0, tree.n_leaves)
    if family == "random-signs":
        return rng.choice([-1.0, 1.0], size=tree.n_leaves)
    if family == "staircase":
        return staircase_values(tree.n_leaves, tree.max_depth)
    if family == "indicator":
        vals = np.zeros(tree.n_leaves)
        vals[: (tree.n_leaves + 1) // 2] = 1.0
        return vals
    raise ValueError(f"unknown function family {family!r}")
