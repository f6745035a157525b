"""oscbox: oscillation functionals and bounded-oscillation operators on
finite ball-bases, with a seeded verification harness.

Submodules
----------
ball_basis     filtration trees, hulls, axiom checks, Vitali selection
functionals    averages, alpha-oscillation, BMO norms, level-set profiles
martingale_ops martingale differences, multiplier transforms, maximal ops
singular_ops   circle-grid kernels, Carleson maximal, Haar multipliers
harness        reproducible experiments and reports (CLI: `oscbox`)
"""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
