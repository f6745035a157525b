"""Kernel backend selection.

The hot inner loops ship twice: a Cython extension (`oscbox._kernels`) and
a numpy fallback (`oscbox._kernels_py`) with identical contracts. The
compiled module wins when importable; set OSCBOX_PURE_PYTHON=1 to force the
fallback (used by the benchmark and the backend-agreement tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("OSCBOX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.IMPL
circular_convolve_pv = _impl.circular_convolve_pv
segment_min_window = _impl.segment_min_window
hull_restricted_osc = _impl.hull_restricted_osc


def available_backends():
    """Importable kernel implementations, compiled one first."""
    mods = []
    try:
        from . import _kernels
        mods.append(_kernels)
    except ImportError:
        pass
    mods.append(_kernels_py)
    return mods
