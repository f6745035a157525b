"""Brute-force oracles shared by the test modules.

These deliberately avoid the library's algorithmic shortcuts: subsets are
enumerated, sums run through math.fsum, and containment uses leaf sets.
"""

import math
from itertools import combinations


def subset_alpha_osc(tree, values, node, alpha):
    """Min oscillation over all leaf subsets of measure > alpha * mu(node)."""
    lo, hi = int(tree.leaf_lo[node]), int(tree.leaf_hi[node])
    idx = list(range(lo, hi))
    threshold = alpha * float(tree.measure[node])
    best = math.inf
    for size in range(1, len(idx) + 1):
        for combo in combinations(idx, size):
            if math.fsum(float(tree.leaf_measure[i]) for i in combo) > threshold:
                sel = [float(values[i]) for i in combo]
                best = min(best, max(sel) - min(sel))
    return best
