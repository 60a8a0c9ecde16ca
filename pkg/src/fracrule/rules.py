"""Measured residuals of product, chain and scaling rules under grid refinement.

Every check returns a :class:`RuleReport` holding the pointwise residual on
the grid. Norms skip a burn-in of the first ``ceil(0.05 n)`` points, where
the Grünwald-Letnikov sums have not yet accumulated enough history to be
accurate. :func:`convergence_study` reruns a check on refined grids and
decides whether the residual vanishes or persists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis import hadamard_g2
from .core import Grid, GridMismatchError, SampledFunction, deterministic_sum, sample
from .operators import OperatorSpec, frac_derivative

__all__ = [
    "RuleReport",
    "ConvergenceReport",
    "VANISHES",
    "PERSISTS",
    "default_burn_in",
    "leibniz_defect",
    "theorem_chain_residual",
    "remainder_vanishing_check",
    "scale_property_residual",
    "modified_chain_residual",
    "convergence_study",
    "grid_for_step",
]

VANISHES = "vanishes"
PERSISTS = "persists"

BURN_IN_FRACTION = 0.05
VANISH_ORDER = 0.5
VANISH_TOL = 0.05
# residuals this small relative to the compared terms are pure rounding
ROUNDING_RTOL = 1e-9


def default_burn_in(n: int) -> int:
    return math.ceil(BURN_IN_FRACTION * n)


@dataclass(frozen=True, eq=False)
class RuleReport:
    """Pointwise residual of one rule on one grid.

    ``reference_sup`` is the sup-norm of the larger side of the identity and
    sets the scale against which a residual counts as rounding noise. When
    ``point_index`` is set the norms are those of that single entry.
    """

    rule_name: str
    residual: SampledFunction
    sup_norm: float
    l2_norm: float
    burn_in: int
    h: float
    operator: OperatorSpec
    reference_sup: float = 0.0
    x0: float | None = None
    value_at_x0: float | None = None
    point_index: int | None = None

    @property
    def at_rounding_level(self) -> bool:
        return self.sup_norm <= ROUNDING_RTOL * self.reference_sup

    def to_dict(self) -> dict:
        out = {
            "rule_name": self.rule_name,
            "alpha": self.operator.alpha,
            "operator": self.operator.to_dict(),
            "grid": {"a": self.residual.grid.a, "h": self.h, "n": self.residual.grid.n},
            "h": self.h,
            "burn_in": self.burn_in,
            "sup_norm": self.sup_norm,
            "l2_norm": self.l2_norm,
            "reference_sup": self.reference_sup,
            "residual": self.residual.values.tolist(),
        }
        if self.x0 is not None:
            out["x0"] = self.x0
            out["value_at_x0"] = self.value_at_x0
        return out


def _make_report(
    rule_name: str,
    residual: np.ndarray,
    grid: Grid,
    spec: OperatorSpec,
    sides: Sequence[np.ndarray],
    burn_in: int | None = None,
    point_index: int | None = None,
    x0: float | None = None,
) -> RuleReport:
    burn_in = default_burn_in(grid.n) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < grid.n:
        raise ValueError(f"burn_in must lie in [0, {grid.n}), got {burn_in}")
    res = SampledFunction(grid, residual, rule_name)
    if point_index is not None:
        sup = abs(float(res.values[point_index]))
        l2 = sup
        reference = max(abs(float(s[point_index])) for s in sides)
    else:
        kept = res.values[burn_in:]
        sup = float(np.max(np.abs(kept)))
        l2 = math.sqrt(grid.h * deterministic_sum(kept * kept))
        reference = max(float(np.max(np.abs(s[burn_in:]))) for s in sides)
    value_at_x0 = None
    if x0 is not None:
        value_at_x0 = float(res.values[grid.index_of(x0)])
    return RuleReport(
        rule_name, res, sup, l2, burn_in, grid.h, spec, reference, x0, value_at_x0, point_index
    )


def _evaluate(fn: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.broadcast_to(np.asarray(fn(xs), dtype=float), xs.shape)
    except (TypeError, ValueError):
        out = np.array([fn(float(x)) for x in xs], dtype=float)
    return out


def leibniz_defect(
    f: SampledFunction, g: SampledFunction, spec: OperatorSpec, burn_in: int | None = None
) -> RuleReport:
    """Residual ``D(fg) - (Df) g - f (Dg)`` of the product rule."""
    if f.grid != g.grid:
        raise GridMismatchError(f"{f.grid} != {g.grid}")
    fg = f.with_values(f.values * g.values, f"{f.label}*{g.label}")
    d_fg = frac_derivative(fg, spec).values
    d_f = frac_derivative(f, spec).values
    d_g = frac_derivative(g, spec).values
    right = d_f * g.values + f.values * d_g
    return _make_report("leibniz", d_fg - right, f.grid, spec, (d_fg, right), burn_in)


def theorem_chain_residual(
    f_fn: Callable,
    fprime_fn: Callable,
    w: SampledFunction,
    spec: OperatorSpec,
    x0: float | None = None,
    burn_in: int | None = None,
) -> RuleReport:
    """Residual ``D(f o w) - f'(w) D(w)`` for a C^2 outer ``f`` and sampled ``w``.

    ``f`` is evaluated on the samples of ``w`` as they are; ``w`` is never
    smoothed.
    """
    fw = w.with_values(_evaluate(f_fn, w.values), f"f({w.label})")
    lhs = frac_derivative(fw, spec).values
    rhs = _evaluate(fprime_fn, w.values) * frac_derivative(w, spec).values
    return _make_report("theorem_chain", lhs - rhs, w.grid, spec, (lhs, rhs), burn_in, x0=x0)


def remainder_vanishing_check(
    fpp_fn: Callable,
    w: SampledFunction,
    spec: OperatorSpec,
    x0: float,
    quad_points: int = 32,
) -> RuleReport:
    """``D[g2(w) (w - w(x0))**2]`` evaluated at ``x0``.

    ``g2`` is the Hadamard remainder factor of ``f`` around ``t0 = w(x0)``.
    The report's norms are those of the single value at ``x0``; the full
    derivative of the remainder is kept as the residual.
    """
    i0 = w.grid.index_of(x0)
    t0 = float(w.values[i0])
    r = np.array(
        [hadamard_g2(fpp_fn, t0, float(t), quad_points) * (t - t0) ** 2 for t in w.values]
    )
    remainder = w.with_values(r, f"g2({w.label})*({w.label}-t0)^2")
    d_r = frac_derivative(remainder, spec).values
    return _make_report(
        "remainder", d_r, w.grid, spec, (d_r,), burn_in=0, point_index=i0, x0=w.grid.point(i0)
    )


def _check_scaling_args(lam: float, spec: OperatorSpec, grid: Grid) -> None:
    if spec.base != 0.0:
        raise ValueError(f"scaling identities need lower terminal 0, got base={spec.base}")
    if grid.a != 0.0:
        raise ValueError(f"scaling identities need a grid starting at 0, got a={grid.a}")
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be a positive finite number, got {lam}")


def _scaled_pair(f_fn: Callable, lam: float, spec: OperatorSpec, grid: Grid):
    # grid i of [0, L] step h and grid i of [0, lam L] step lam h are the
    # same physical point w = lam x_i, so no interpolation is needed
    x = grid.points
    composed = SampledFunction(grid, _evaluate(f_fn, lam * x), "f(lam x)")
    w_grid = Grid(0.0, lam * grid.h, grid.n)
    outer = sample(lambda t: _evaluate(f_fn, t), w_grid, "f(w)")
    d_composed = frac_derivative(composed, spec).values
    d_outer = frac_derivative(outer, OperatorSpec(spec.kind, spec.order, 0.0)).values
    return d_composed, d_outer


def scale_property_residual(
    f_fn: Callable, lam: float, spec: OperatorSpec, grid: Grid, burn_in: int | None = None
) -> RuleReport:
    """Residual ``D_x f(lam x) - lam**alpha (D_w f)(lam x)`` on matched grids."""
    _check_scaling_args(lam, spec, grid)
    lhs, d_outer = _scaled_pair(f_fn, lam, spec, grid)
    rhs = lam**spec.alpha * d_outer
    return _make_report("scale", lhs - rhs, grid, spec, (lhs, rhs), burn_in)


def modified_chain_residual(
    f_fn: Callable, lam: float, spec: OperatorSpec, grid: Grid, burn_in: int | None = None
) -> RuleReport:
    """Residual ``D(f o w) - [(D f) o w] (w')**alpha`` for the linear map ``w = lam x``."""
    _check_scaling_args(lam, spec, grid)
    lhs, d_outer = _scaled_pair(f_fn, lam, spec, grid)
    w_prime = lam
    rhs = d_outer * w_prime**spec.alpha
    return _make_report("modified_chain", lhs - rhs, grid, spec, (lhs, rhs), burn_in)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Norms of one rule's residual across a refinement sequence.

    ``observed_order`` is the least-squares slope of ``log sup_norm`` against
    ``log h``. It is ``inf`` when every residual is at rounding level, that is,
    when the identity already holds exactly on each grid.
    """

    rule_name: str
    h_values: np.ndarray
    norms: np.ndarray
    l2_norms: np.ndarray
    observed_order: float
    verdict: str
    exact: bool
    reports: tuple = field(repr=False, default=())

    @property
    def final(self) -> RuleReport:
        return self.reports[-1]

    def to_dict(self) -> dict:
        order = self.observed_order
        return {
            "rule_name": self.rule_name,
            "h_values": self.h_values.tolist(),
            "norms": self.norms.tolist(),
            "l2_norms": self.l2_norms.tolist(),
            "observed_order": order if math.isfinite(order) else str(order),
            "verdict": self.verdict,
            "exact": self.exact,
        }


def grid_for_step(h: float, a: float = 0.0, length: float = 1.0) -> Grid:
    """Grid of step ``h`` covering ``[a, a + length]``; ``length / h`` must be whole."""
    steps = round(length / h)
    if steps < 1 or abs(steps * h - length) > 1e-9 * length:
        raise ValueError(f"step {h} does not divide the interval length {length}")
    return Grid(a, h, steps + 1)


def observed_order(h_values: Sequence[float], norms: Sequence[float]) -> float:
    """Least-squares slope of ``log norm`` against ``log h``."""
    slope, _ = np.polyfit(np.log(np.asarray(h_values)), np.log(np.asarray(norms)), 1)
    return float(slope)


def convergence_study(
    experiment: Callable[[Grid], RuleReport],
    h_values: Sequence[float],
    a: float = 0.0,
    length: float = 1.0,
    vanish_order: float = VANISH_ORDER,
    vanish_tol: float = VANISH_TOL,
) -> ConvergenceReport:
    """Run ``experiment`` on grids of step ``h`` over ``[a, a + length]``.

    The verdict is ``"vanishes"`` when the observed order is at least
    ``vanish_order`` and the finest sup-norm is below ``vanish_tol``,
    ``"persists"`` otherwise.
    """
    hs = np.asarray(h_values, dtype=float)
    if hs.ndim != 1 or hs.size < 3:
        raise ValueError("a convergence study needs at least 3 step sizes")
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("step sizes must be positive and strictly decreasing")
    reports = tuple(experiment(grid_for_step(float(h), a, length)) for h in hs)
    norms = np.array([r.sup_norm for r in reports])
    l2 = np.array([r.l2_norm for r in reports])

    exact = all(r.at_rounding_level for r in reports)
    if exact:
        order = math.inf
    else:
        positive = norms > 0
        order = observed_order(hs[positive], norms[positive]) if positive.sum() >= 2 else math.inf
    vanishes = order >= vanish_order and norms[-1] < vanish_tol
    return ConvergenceReport(
        reports[0].rule_name, hs, norms, l2, order, VANISHES if vanishes else PERSISTS, exact, reports
    )
