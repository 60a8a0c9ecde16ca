"""Rough test functions, Hölder regularity, and the Hadamard remainder ``g2``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Grid,
    GridMismatchError,
    NonFiniteValueError,
    SampledFunction,
    WeierstrassParams,
    deterministic_sum,
    sample,
)

__all__ = [
    "HolderEstimate",
    "HolderCheck",
    "ProductHolderCheck",
    "HadamardDecomposition",
    "FlatFunctionError",
    "weierstrass",
    "weierstrass_sample",
    "holder_estimate",
    "holder_condition_check",
    "product_holder_check",
    "hadamard_g2",
    "hadamard_decompose",
]

# refit without the two coarsest scales below this r^2
REFIT_R_SQUARED = 0.98
PAIR_SCAN_LIMIT = 4096
DEFAULT_QUAD_POINTS = 32


class FlatFunctionError(ValueError):
    """Every oscillation vanished, so no exponent can be fitted."""


def weierstrass(params: WeierstrassParams, x):
    """Partial sum ``sum_{k < n_terms} b**(-k alpha) cos(b**k x)``.

    Terms are added largest first with the compensated scheme of
    ``core.deterministic_sum``, elementwise when ``x`` is an array.
    """
    xs = np.asarray(x, dtype=float)
    s = np.zeros_like(xs)
    c = np.zeros_like(xs)
    for k in range(params.n_terms):
        term = params.b ** (-k * params.alpha) * np.cos(params.b**k * xs)
        t = s + term
        z = t - s
        c = c + ((s - (t - z)) + (term - z))
        s = t
    out = s + c
    return float(out) if out.ndim == 0 else out


def weierstrass_sample(params: WeierstrassParams, grid: Grid) -> SampledFunction:
    label = f"W[alpha={params.alpha:g},b={params.b:g},N={params.n_terms}]"
    return sample(lambda xs: weierstrass(params, xs), grid, label)


@dataclass(frozen=True, eq=False)
class HolderEstimate:
    """Log-log fit ``log M(h) = log A + alpha log h`` of oscillation against scale."""

    exponent_hat: float
    coefficient_hat: float
    r_squared: float
    scales_used: np.ndarray
    oscillations: np.ndarray

    def to_dict(self) -> dict:
        return {
            "exponent_hat": self.exponent_hat,
            "coefficient_hat": self.coefficient_hat,
            "r_squared": self.r_squared,
            "scales_used": self.scales_used.tolist(),
            "oscillations": self.oscillations.tolist(),
        }


def _dyadic_oscillations(values: np.ndarray, num_scales: int) -> np.ndarray:
    # running max/min over windows of 2**j steps, built by doubling from
    # single steps; a window longer than the grid covers the whole grid
    hi = np.maximum(values[:-1], values[1:])
    lo = np.minimum(values[:-1], values[1:])
    osc = np.empty(num_scales)
    for j in range(1, num_scales + 1):
        half = 2 ** (j - 1)
        if half < hi.size:
            hi = np.maximum(hi[:-half], hi[half:])
            lo = np.minimum(lo[:-half], lo[half:])
        else:
            hi = np.array([hi.max()])
            lo = np.array([lo.min()])
        osc[j - 1] = np.max(hi - lo)
    return osc


def _loglog_fit(scales: np.ndarray, osc: np.ndarray) -> tuple[float, float, float]:
    x = np.log(scales)
    y = np.log(osc)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), min(max(r2, 0.0), 1.0)


def holder_estimate(f: SampledFunction, num_scales: int = 8) -> HolderEstimate:
    """Estimate the Hölder exponent and constant of ``f`` from its oscillations.

    At scales ``h_j = 2**j h`` for ``j = 1..num_scales`` the oscillation
    ``M(h_j)`` is the largest ``|f(x_i) - f(x_k)|`` over pairs at most ``h_j``
    apart. When the straight-line fit has ``r^2 < 0.98`` and at least six
    scales are available, the two coarsest scales are dropped and the fit
    is redone.
    """
    if num_scales < 4:
        raise ValueError(f"need at least 4 scales, got {num_scales}")
    if f.grid.n < 2**num_scales:
        raise ValueError(
            f"grid of {f.grid.n} points is too small for {num_scales} dyadic scales "
            f"(needs {2**num_scales})"
        )
    osc = _dyadic_oscillations(f.values, num_scales)
    scales = f.grid.h * 2.0 ** np.arange(1, num_scales + 1)
    if not np.any(osc > 0):
        raise FlatFunctionError(f"{f.label or 'function'} is constant at every scale")
    keep = osc > 0
    scales, osc = scales[keep], osc[keep]
    if scales.size < 4:
        raise FlatFunctionError("fewer than 4 scales with non-zero oscillation")

    slope, intercept, r2 = _loglog_fit(scales, osc)
    if r2 < REFIT_R_SQUARED and scales.size - 2 >= 4:
        slope, intercept, r2 = _loglog_fit(scales[:-2], osc[:-2])
        scales, osc = scales[:-2], osc[:-2]
    return HolderEstimate(slope, math.exp(intercept), r2, scales, osc)


@dataclass(frozen=True)
class HolderCheck:
    holds: bool
    worst_ratio: float
    worst_pair: tuple[int, int]
    stride: int

    def __bool__(self) -> bool:
        return self.holds


def holder_condition_check(
    f: SampledFunction, alpha: float, A: float, stride: int | None = None
) -> HolderCheck:
    """Check ``|f(x1) - f(x2)| <= A |x1 - x2|**alpha`` over all grid pairs.

    Grids above 4096 points are thinned to every ``ceil(n / 4096)``-th point
    unless ``stride`` is given. The reported pair maximizes the ratio
    ``|df| / |dx|**alpha``; ties go to the lexicographically smallest pair.
    """
    if not A > 0:
        raise ValueError(f"Hölder constant must be positive, got {A}")
    if not 0 < alpha <= 1:
        raise ValueError(f"Hölder exponent must lie in (0, 1], got {alpha}")
    n = f.grid.n
    if stride is None:
        stride = 1 if n <= PAIR_SCAN_LIMIT else math.ceil(n / PAIR_SCAN_LIMIT)
    idx = np.arange(0, n, stride)
    vals = f.values[idx]
    pts = f.grid.points[idx]

    holds = True
    best = -1.0
    best_pair = (0, 0)
    for lag in range(1, idx.size):
        df = np.abs(vals[lag:] - vals[:-lag])
        dxa = np.abs(pts[lag:] - pts[:-lag]) ** alpha
        if holds and np.any(df > A * dxa):
            holds = False
        ratio = df / dxa
        j = int(np.argmax(ratio))
        r = float(ratio[j])
        pair = (int(idx[j]), int(idx[j + lag]))
        if r > best or (r == best and pair < best_pair):
            best, best_pair = r, pair
    return HolderCheck(holds, best, best_pair, stride)


@dataclass(frozen=True)
class ProductHolderCheck:
    holds: bool
    alpha: float
    estimate: HolderEstimate
    condition: HolderCheck

    def __bool__(self) -> bool:
        return self.holds


def product_holder_check(
    f: SampledFunction, g: SampledFunction, alpha: float, num_scales: int = 8
) -> ProductHolderCheck:
    """Does ``f * g`` look Hölder of exponent ``alpha``?

    Passes when the fitted exponent of the product is at least
    ``alpha - 0.1``. The fitted constant is then fed to
    ``holder_condition_check`` at the fitted exponent for diagnostics.
    """
    if f.grid != g.grid:
        raise GridMismatchError(f"{f.grid} != {g.grid}")
    prod = f.with_values(f.values * g.values, f"({f.label})*({g.label})")
    est = holder_estimate(prod, num_scales)
    exponent = min(max(est.exponent_hat, 1e-6), 1.0)
    cond = holder_condition_check(prod, exponent, est.coefficient_hat)
    return ProductHolderCheck(est.exponent_hat >= alpha - 0.1, alpha, est, cond)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre_unit(m: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes and weights mapped from [-1, 1] to [0, 1]
    if m not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(m)
        _GL_CACHE[m] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[m]


def hadamard_g2(
    fpp: Callable[[float], float], t0: float, t: float, quad_points: int = DEFAULT_QUAD_POINTS
) -> float:
    """Remainder factor ``g2(t) = int_0^1 (1 - s) f''(t0 + s (t - t0)) ds``.

    At ``t == t0`` this is exactly ``f''(t0) / 2``.
    """
    if quad_points < 2:
        raise ValueError(f"need at least 2 quadrature points, got {quad_points}")
    if t == t0:
        v = float(fpp(t0))
        if not math.isfinite(v):
            raise NonFiniteValueError(0, v, f"f''({t0})")
        return 0.5 * v
    nodes, weights = _gauss_legendre_unit(quad_points)
    terms = []
    for j, (s, w) in enumerate(zip(nodes, weights)):
        v = float(fpp(t0 + s * (t - t0)))
        if not math.isfinite(v):
            raise NonFiniteValueError(j, v, f"f'' on [{t0}, {t}]")
        terms.append(w * (1.0 - s) * v)
    return deterministic_sum(terms)


@dataclass(frozen=True, eq=False)
class HadamardDecomposition:
    """``f(t) = f(t0) + f'(t0) (t - t0) + g2(t) (t - t0)**2`` on a grid."""

    t0: float
    f_t0: float
    fprime_t0: float
    g2_values: SampledFunction
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    def reconstruct(self) -> np.ndarray:
        dt = self.g2_values.points - self.t0
        return self.f_t0 + self.fprime_t0 * dt + self.g2_values.values * dt**2


def hadamard_decompose(
    fn: Callable[[float], float],
    fprime_fn: Callable[[float], float],
    fpp_fn: Callable[[float], float],
    t0: float,
    grid: Grid,
    quad_points: int = DEFAULT_QUAD_POINTS,
) -> HadamardDecomposition:
    if not grid.a <= t0 <= grid.b:
        raise ValueError(f"t0={t0} lies outside [{grid.a}, {grid.b}]")
    pts = grid.points
    g2 = np.array([hadamard_g2(fpp_fn, t0, float(t), quad_points) for t in pts])
    g2_fn = SampledFunction(grid, g2, f"g2[t0={t0:g}]")
    f_t0 = float(fn(t0))
    fp_t0 = float(fprime_fn(t0))
    f_vals = np.array([float(fn(float(t))) for t in pts])
    dt = pts - t0
    residual = f_vals - (f_t0 + fp_t0 * dt + g2 * dt**2)
    return HadamardDecomposition(t0, f_t0, fp_t0, g2_fn, residual)
