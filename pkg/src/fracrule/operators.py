"""Discrete fractional derivatives of order 0 < alpha <= 1.

Two grid operators share the Grünwald-Letnikov convolution

    D_h f(x_i) = h**(-alpha) * sum_{k=0}^{i} w_k f(x_i - k h)

with binomial weights ``w_k = (-1)**k binom(alpha, k)``:

* ``RIEMANN_LIOUVILLE_GL`` applies it to ``f`` directly;
* ``JUMARIE_SHIFTED_GL`` applies it to ``f - f(a)``. On C^1 inputs this is the
  Caputo derivative, and it sends constants to exactly zero.

``local_frac_derivative`` is a pointwise one-sided quotient estimator that
works on callables rather than grids.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import FractionalOrder, NonFiniteValueError, SampledFunction, gamma

__all__ = [
    "OperatorKind",
    "OperatorSpec",
    "BaseMismatchError",
    "LocalEstimate",
    "gl_weights",
    "frac_derivative",
    "local_frac_derivative",
    "thread_count",
]

THREADS_ENV = "FRACRULE_THREADS"
# below this size threading costs more than it saves
_PARALLEL_MIN_N = 512


class BaseMismatchError(ValueError):
    """Operator lower terminal differs from the grid's left endpoint."""


class OperatorKind(enum.Enum):
    RIEMANN_LIOUVILLE_GL = "rl"
    JUMARIE_SHIFTED_GL = "jumarie"
    LOCAL_QUOTIENT = "local"

    @classmethod
    def parse(cls, name: str) -> "OperatorKind":
        aliases = {
            "rl": cls.RIEMANN_LIOUVILLE_GL,
            "riemann-liouville": cls.RIEMANN_LIOUVILLE_GL,
            "jumarie": cls.JUMARIE_SHIFTED_GL,
            "caputo": cls.JUMARIE_SHIFTED_GL,
            "local": cls.LOCAL_QUOTIENT,
        }
        try:
            return aliases[name.lower()]
        except KeyError:
            raise ValueError(
                f"unknown operator {name!r}; expected one of {sorted(aliases)}"
            ) from None


@dataclass(frozen=True)
class OperatorSpec:
    """Which derivative to take: kind, order and lower terminal."""

    kind: OperatorKind
    order: FractionalOrder
    base: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, OperatorKind):
            object.__setattr__(self, "kind", OperatorKind.parse(self.kind))
        if not isinstance(self.order, FractionalOrder):
            object.__setattr__(self, "order", FractionalOrder(self.order))
        object.__setattr__(self, "base", float(self.base))

    @property
    def alpha(self) -> float:
        return self.order.alpha

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "alpha": self.alpha, "base": self.base}


def thread_count() -> int:
    """Worker count from ``FRACRULE_THREADS``, defaulting to the core count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def gl_weights(order: FractionalOrder | float, count: int) -> np.ndarray:
    """First ``count`` Grünwald-Letnikov weights ``(-1)**k binom(alpha, k)``."""
    alpha = float(order)
    if count < 1:
        raise ValueError(f"need at least one weight, got count={count}")
    w = np.empty(count)
    w[0] = 1.0
    prev = 1.0
    for k in range(1, count):
        prev = prev * ((k - 1 - alpha) / k)
        w[k] = prev
    return w


def _convolve_rows(weights: np.ndarray, values: np.ndarray, lo: int, hi: int) -> np.ndarray:
    # Output i accumulates w_k * f[i-k] for k = 0..i, in that order, with the
    # same TwoSum compensation as core.deterministic_sum; vectorized over i.
    s = np.zeros(hi - lo)
    c = np.zeros(hi - lo)
    for k in range(hi):
        start = max(lo, k)
        x = weights[k] * values[start - k : hi - k]
        ss = s[start - lo :]
        t = ss + x
        z = t - ss
        c[start - lo :] += (ss - (t - z)) + (x - z)
        s[start - lo :] = t
    return s + c


def _split_rows(n: int, parts: int) -> list[int]:
    # row i costs i+1 terms; equal-area cuts of the triangle
    cuts = [0]
    for j in range(1, parts):
        cuts.append(int(round(n * math.sqrt(j / parts))))
    cuts.append(n)
    return sorted(set(cuts))


def gl_convolve(values: np.ndarray, alpha: float, threads: int | None = None) -> np.ndarray:
    """Compensated sums ``sum_k w_k values[i-k]`` for every i (no ``h`` scaling)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    weights = gl_weights(alpha, n)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or n < _PARALLEL_MIN_N:
        return _convolve_rows(weights, values, 0, n)
    cuts = _split_rows(n, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(
            lambda bounds: _convolve_rows(weights, values, *bounds),
            zip(cuts[:-1], cuts[1:]),
        )
        return np.concatenate(list(parts))


def frac_derivative(f: SampledFunction, spec: OperatorSpec) -> SampledFunction:
    """Apply a grid operator to ``f``; the result lives on the same grid."""
    if spec.kind is OperatorKind.LOCAL_QUOTIENT:
        raise ValueError("LOCAL_QUOTIENT is pointwise; use local_frac_derivative")
    if spec.base != f.grid.a:
        raise BaseMismatchError(
            f"operator base {spec.base} differs from grid start {f.grid.a}"
        )
    alpha = spec.alpha
    values = f.values
    if spec.kind is OperatorKind.JUMARIE_SHIFTED_GL:
        values = values - values[0]
    out = gl_convolve(values, alpha) * f.grid.h ** (-alpha)
    return f.with_values(out, f"D^{alpha:g}[{f.label}]")


@dataclass(frozen=True, eq=False)
class LocalEstimate:
    """Extrapolated local derivative with the quotient table it came from."""

    value: float
    h_values: np.ndarray
    quotients: np.ndarray
    exponent: float
    error_estimate: float
    tableau: list = field(repr=False, default_factory=list)

    def __float__(self) -> float:
        return self.value


def local_frac_derivative(
    fn: Callable[[float], float],
    x0: float,
    order: FractionalOrder | float,
    h_sequence: Sequence[float],
) -> LocalEstimate:
    """Right-sided local derivative ``lim Gamma(1+alpha) (f(x0+h) - f(x0)) / h**alpha``.

    The quotients are extrapolated to ``h = 0`` by Neville's scheme in the
    variable ``u = h**p``, with ``p = 1 - alpha`` for fractional orders (the
    leading correction for smooth ``f``) and ``p = 1`` when ``alpha = 1``.
    """
    alpha = float(FractionalOrder(float(order)))
    hs = np.asarray(h_sequence, dtype=float)
    if hs.ndim != 1 or hs.size < 1:
        raise ValueError("h_sequence must be a non-empty 1-d sequence")
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("h_sequence must be positive and strictly decreasing")

    f0 = float(fn(x0))
    if not math.isfinite(f0):
        raise NonFiniteValueError(0, f0, f"fn({x0})")
    scale = gamma(1.0 + alpha)
    q = np.empty(hs.size)
    for j, h in enumerate(hs):
        fh = float(fn(x0 + h))
        if not math.isfinite(fh):
            raise NonFiniteValueError(j, fh, f"fn({x0} + {h})")
        q[j] = scale * (fh - f0) / h**alpha

    p = 1.0 if alpha == 1.0 else 1.0 - alpha
    u = hs**p
    tableau = [q.copy()]
    for level in range(1, hs.size):
        prev = tableau[-1]
        cur = np.empty(prev.size - 1)
        for j in range(cur.size):
            # extrapolate the pair (u[j], u[j+level]) to u = 0
            cur[j] = (u[j] * prev[j + 1] - u[j + level] * prev[j]) / (u[j] - u[j + level])
        tableau.append(cur)
    value = float(tableau[-1][-1])
    if len(tableau) > 1:
        error = abs(value - float(tableau[-2][-1]))
    else:
        error = math.inf
    return LocalEstimate(value, hs, q, p, error, tableau)
