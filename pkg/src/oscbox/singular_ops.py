"""Discrete singular operators on the uniform circle grid.

The grid carries n = 2^d points of mass 1/n whose dyadic arcs form a
ball-basis tree. On it live the principal-value convolution against the
periodized Hilbert kernel, polynomial-modulated Carleson maximal operators,
the Haar multiplier system, and the empirical bounded-oscillation constant
of any sublinear operator.
"""

from __future__ import annotations

import json
import math
from functools import cached_property

import numpy as np

from . import _backend
from .ball_basis import MeasureTree, build_dyadic_tree
from .functionals import FunctionError, node_lr_averages
from .random_functions import rng_for_trial, sample_leaf_values


class CircleGrid:
    """n equispaced points t_j = j/n on the circle, n a power of two >= 8."""

    def __init__(self, n: int):
        n = int(n)
        if n < 8 or n & (n - 1):
            raise FunctionError(f"grid size must be a power of two >= 8, got {n}")
        self.n = n
        self.points = np.arange(n) / n
        self.points.setflags(write=False)

    @cached_property
    def arc_tree(self) -> MeasureTree:
        return build_dyadic_tree(int(math.log2(self.n)), dim=1)


class Kernel:
    """Convolution kernel sampled at grid offsets 1..n-1; the diagonal slot
    values[0] stays 0 (principal value)."""

    def __init__(self, values, size_bound: float, modulus=None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] < 8:
            raise FunctionError("kernel needs one value per grid offset")
        if values[0] != 0.0:
            raise FunctionError("diagonal slot values[0] must be 0")
        values.setflags(write=False)
        self.values = values
        self.size_bound = float(size_bound)
        self.modulus = None if modulus is None else np.asarray(modulus, float)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def antisymmetric(self) -> bool:
        return bool(np.all(self.values[1:] == -self.values[1:][::-1]))

    @cached_property
    def circulant(self) -> np.ndarray:
        idx = (np.arange(self.n)[:, None] - np.arange(self.n)[None, :]) % self.n
        mat = self.values[idx]
        mat.setflags(write=False)
        return mat

    def to_json(self) -> str:
        return json.dumps(list(map(float, self.values)))


def kernel_from_json(text: str, size_bound: float | None = None) -> Kernel:
    values = np.asarray(json.loads(text), dtype=np.float64)
    n = values.shape[0]
    if size_bound is None:
        off = np.arange(1, n)
        size_bound = float(np.max(np.abs(values[1:]) * np.minimum(off, n - off) / n))
    return Kernel(values, size_bound)


def hilbert_kernel(grid: CircleGrid) -> Kernel:
    """Periodized principal-value Hilbert kernel K(j) = cot(pi j / n).

    Antisymmetry K(j) = -K(n-j) is built in exactly by mirroring, and the
    size bound |K(j)| * min(j, n-j) / n stays below 1/pi + 0.1 for every n.
    """
    n = grid.n
    values = np.zeros(n)
    half = n // 2
    j = np.arange(1, half)
    values[1:half] = 1.0 / np.tan(np.pi * j / n)
    values[half] = 0.0
    values[half + 1:] = -values[1:half][::-1]
    off = np.arange(1, n)
    size_bound = float(np.max(np.abs(values[1:]) * np.minimum(off, n - off) / n))
    return Kernel(values, size_bound, modulus=_tabulate_modulus(values))


def _tabulate_modulus(values: np.ndarray) -> np.ndarray:
    # empirical omega at dyadic ratios: modulus[k-1] bounds
    # |K(j) - K(j')| * min(j, n-j)/n over pairs with |j-j'|/j ~ 2^-k
    n = values.shape[0]
    levels = int(math.log2(n)) - 2
    out = np.zeros(max(levels, 0))
    for k in range(1, levels + 1):
        j = np.arange(1 << k, n // 2 + 1)
        d = np.maximum(j >> k, 1)
        diff = np.abs(values[j] - values[j - d])
        out[k - 1] = float(np.max(diff * np.minimum(j, n - j) / n))
    return out


def kernel_smoothness_constant(kernel: Kernel) -> float:
    """Fitted C in |K(j) - K(j')| <= C * (|j-j'|/j) * (n/j) over j > 2|j-j'|."""
    n = kernel.n
    best = 0.0
    d = 1
    while d <= n // 8:
        j = np.arange(2 * d + 1, n // 2 + 1)
        if j.size:
            diff = np.abs(kernel.values[j] - kernel.values[j - d])
            best = max(best, float(np.max(diff * j * j / (d * n))))
        d *= 2
    return best


# ---------------------------------------------------------------------------
# convolution and Carleson maximal operators


def cz_apply(kernel: Kernel, f: np.ndarray) -> np.ndarray:
    """(Tf)(i) = (1/n) * sum_{j != i} K((i-j) mod n) f(j).

    Real vectors go through the kernel backend; complex input or column
    batches use the cached circulant matrix.
    """
    f = np.asarray(f)
    if f.shape[0] != kernel.n:
        raise FunctionError(f"function length {f.shape[0]} != kernel size {kernel.n}")
    if f.ndim == 1 and not np.iscomplexobj(f):
        return _backend.circular_convolve_pv(kernel.values, f.astype(np.float64))
    return kernel.circulant @ f / kernel.n


class ModulationSet:
    """Finite family of real polynomials, stored as ascending coefficients."""

    def __init__(self, coefficients, max_degree: int = 2):
        coeffs = [np.asarray(c, dtype=np.float64) for c in coefficients]
        if not coeffs:
            raise FunctionError("modulation set must be nonempty")
        for c in coeffs:
            if c.ndim != 1 or c.shape[0] > max_degree + 1:
                raise FunctionError("polynomial degree exceeds the bound")
        self.coefficients = coeffs
        self.max_degree = int(max_degree)

    def phases(self, points: np.ndarray) -> np.ndarray:
        """exp(2 pi i Q_a(t)) columns, one per polynomial."""
        cols = [np.exp(2j * np.pi * np.polynomial.polynomial.polyval(points, c))
                for c in self.coefficients]
        return np.stack(cols, axis=1)


def default_modulations() -> ModulationSet:
    """Eight quadratics a*y^2 + b*y, a in {-2,-1,0,1}, b in {0,1}."""
    return ModulationSet([np.array([0.0, b, a])
                          for a in (-2.0, -1.0, 0.0, 1.0) for b in (0.0, 1.0)])


def carleson_maximal(grid: CircleGrid, kernel: Kernel, mods: ModulationSet,
                     f: np.ndarray) -> np.ndarray:
    """sup over the modulation family of |T(e^{2 pi i Q} f)|, pointwise."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (grid.n,):
        raise FunctionError("f must be one value per grid point")
    modulated = f[:, None] * mods.phases(grid.points)
    return np.abs(cz_apply(kernel, modulated)).max(axis=1)


# ---------------------------------------------------------------------------
# bounded-oscillation constants


class CircleConvolutionOp:
    """Kernel convolution as a leaf-values operator on the arc tree."""

    def __init__(self, grid: CircleGrid, kernel: Kernel):
        if kernel.n != grid.n:
            raise FunctionError("kernel and grid sizes disagree")
        self.grid = grid
        self.kernel = kernel

    def __call__(self, vals: np.ndarray) -> np.ndarray:
        return cz_apply(self.kernel, vals)


class CarlesonMaximalOp:
    """Polynomial-modulated maximal convolution as a leaf-values operator."""

    def __init__(self, grid: CircleGrid, kernel: Kernel, mods: ModulationSet):
        if kernel.n != grid.n:
            raise FunctionError("kernel and grid sizes disagree")
        self.grid = grid
        self.kernel = kernel
        self.mods = mods
        self._phases = mods.phases(grid.points)

    def __call__(self, vals: np.ndarray) -> np.ndarray:
        return carleson_maximal(self.grid, self.kernel, self.mods, vals)

    def localized_osc(self, tree: MeasureTree, vals: np.ndarray) -> np.ndarray:
        """osc over each ball B of the operator applied to vals cut off
        outside hull(B): full output minus the hull contribution, per ball."""
        if tree is not self.grid.arc_tree:
            raise FunctionError("operator bound to a different arc tree")
        n = self.grid.n
        modulated = vals[:, None] * self._phases
        tf = self.kernel.circulant @ modulated / n
        circ = self.kernel.circulant
        h = tree.hull_id
        out = np.empty(tree.n_nodes)
        for v in range(tree.n_nodes):
            rows = slice(tree.leaf_lo[v], tree.leaf_hi[v])
            cols = slice(tree.leaf_lo[h[v]], tree.leaf_hi[h[v]])
            loc = np.abs(tf[rows] - circ[rows, cols] @ modulated[cols] / n)
            seg = loc.max(axis=1)
            out[v] = seg.max() - seg.min()
        return out


_OMEGAS = {
    "one": lambda t: np.ones_like(t),
    "log": lambda t: 1.0 / np.log2(1.0 + t),
}


def omega_function(omega_id: str):
    try:
        return _OMEGAS[omega_id]
    except KeyError:
        raise FunctionError(f"unknown omega {omega_id!r}; pick from {sorted(_OMEGAS)}")


def _localized_oscillations(op, tree: MeasureTree, vals: np.ndarray) -> np.ndarray:
    """osc over B of op(vals cut off outside hull(B)), for every ball B."""
    h = tree.hull_id
    if isinstance(op, CircleConvolutionOp) and tree is op.grid.arc_tree:
        tf = cz_apply(op.kernel, vals)
        return _backend.hull_restricted_osc(
            op.kernel.values, vals, tf,
            tree.leaf_lo, tree.leaf_hi, tree.leaf_lo[h], tree.leaf_hi[h])
    if isinstance(op, CarlesonMaximalOp) and tree is op.grid.arc_tree:
        return op.localized_osc(tree, vals)
    out = np.empty(tree.n_nodes)
    for v in range(tree.n_nodes):
        g = vals.copy()
        g[tree.leaf_lo[h[v]]:tree.leaf_hi[h[v]]] = 0.0
        seg = op(g)[tree.leaf_lo[v]:tree.leaf_hi[v]]
        out[v] = seg.max() - seg.min()
    return out


def bo_omega_constant(op, tree: MeasureTree, omega_id: str, trials: int,
                      seed: int, r: float = 1.0,
                      family: str = "random-uniform") -> float:
    """Empirical least constant L in
    osc_B(op(f * 1 off hull(B))) <= L * sup_{A >= B} omega(mu(A)/mu(B)) <f>_A,
    maximized over seeded random trials and all balls.

    Zero-over-zero ratios are skipped; a positive oscillation against a zero
    bound is an error (the operator is not omega-bounded on this basis).
    """
    omega = omega_function(omega_id)
    anc = tree.ancestor_matrix
    om = omega(tree.measure[anc] / tree.measure[:, None])
    best = 0.0
    for t in range(int(trials)):
        vals = sample_leaf_values(family, tree, rng_for_trial(seed, t))
        dens = (om * node_lr_averages(tree, vals, r)[anc]).max(axis=1)
        nums = _localized_oscillations(op, tree, vals)
        zero_den = dens == 0.0
        if np.any(zero_den & (nums > 0.0)):
            raise FunctionError("positive oscillation with zero omega-bound")
        live = ~zero_den
        if np.any(live):
            best = max(best, float(np.max(nums[live] / dens[live])))
    return best


# ---------------------------------------------------------------------------
# Haar multiplier system


class WaveletSystem:
    """Orthonormal Haar family on the grid: index 0 is the constant 1,
    index 2^m + j (0 <= j < 2^m) the scale-m position-j Haar function."""

    def __init__(self, grid: CircleGrid, decay_exponent: float = 0.5,
                 smoothness_exponent: float = 1.0):
        self.grid = grid
        self.delta = float(decay_exponent)
        self.alpha = float(smoothness_exponent)
        n = grid.n
        levels = int(math.log2(n))
        scales = np.full(n, -1, dtype=np.int64)
        centers = np.full(n, 0.5)
        for m in range(levels):
            j = np.arange(1 << m)
            scales[(1 << m) + j] = m
            centers[(1 << m) + j] = (2 * j + 1) / (1 << (m + 1))
        scales.setflags(write=False)
        centers.setflags(write=False)
        self.scales = scales
        self.centers = centers

    @property
    def n(self) -> int:
        return self.grid.n

    @cached_property
    def functions(self) -> np.ndarray:
        """(n_points, n_functions) sample matrix; column k is phi_k."""
        n = self.n
        mat = np.zeros((n, n))
        mat[:, 0] = 1.0
        for k in range(1, n):
            m = int(self.scales[k])
            j = k - (1 << m)
            cell = n >> m
            lo = j * cell
            amp = 2.0 ** (m / 2.0)
            mat[lo:lo + cell // 2, k] = amp
            mat[lo + cell // 2:lo + cell, k] = -amp
        mat.setflags(write=False)
        return mat

    def decay_envelope_constant(self) -> float:
        """Smallest c with |phi_k(x)| <= c 2^{m/2} xi(2^m (x - t_k)) on the
        grid, xi(u) = (1+|u|)^{-(1+delta)}; finite by compact support."""
        best = 0.0
        x = self.grid.points
        phi = self.functions
        for k in range(1, self.n):
            m = int(self.scales[k])
            xi = (1.0 + np.abs((1 << m) * (x - self.centers[k]))) ** (-(1.0 + self.delta))
            best = max(best, float(np.max(np.abs(phi[:, k]) / (2.0 ** (m / 2.0) * xi))))
        return best


def haar_system(grid: CircleGrid) -> WaveletSystem:
    return WaveletSystem(grid)


def _check_multiplier(system: WaveletSystem, lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.shape != (system.n,):
        raise FunctionError(f"need {system.n} multipliers, got {lam.shape}")
    if np.max(np.abs(lam)) > 1.0:
        raise FunctionError("multiplier norm exceeds 1")
    return lam


def wavelet_kernel(system: WaveletSystem, lambdas) -> np.ndarray:
    """K(x, t) = sum_k lambda_k phi_k(x) phi_k(t) as a full matrix.

    Assembled scale by scale: each scale contributes rank-one blocks on the
    diagonal cells, so the build is O(n^2 log n) instead of a dense n^3
    product.
    """
    lam = _check_multiplier(system, lambdas)
    n = system.n
    out = np.full((n, n), lam[0])
    levels = int(math.log2(n))
    for m in range(levels):
        cell = n >> m
        half = cell // 2
        amp = 2.0 ** (m / 2.0)
        sign = np.concatenate([np.full(half, amp), np.full(half, -amp)])
        block = np.outer(sign, sign)
        idx = np.arange(1 << m)
        view = out.reshape(1 << m, cell, 1 << m, cell)
        view[idx, :, idx, :] += lam[(1 << m) + idx][:, None, None] * block
    return out


def wavelet_multiplier_apply(system: WaveletSystem, lambdas, f: np.ndarray) -> np.ndarray:
    """T f = sum_k lambda_k <f, phi_k> phi_k with grid inner products."""
    lam = _check_multiplier(system, lambdas)
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (system.n,):
        raise FunctionError("f must be one value per grid point")
    phi = system.functions
    coeffs = phi.T @ f / system.n
    return phi @ (lam * coeffs)
