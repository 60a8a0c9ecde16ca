"""Experiment configuration and the small language of named test functions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .analysis import weierstrass
from .core import Grid, WeierstrassParams
from .operators import OperatorKind, OperatorSpec

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "FunctionSpec",
    "ExperimentConfig",
    "parse_function",
    "parse_grid",
]

EXPERIMENTS = (
    "derive",
    "weierstrass",
    "holder",
    "hadamard",
    "verify-leibniz",
    "verify-chain",
    "verify-remainder",
    "verify-scale",
    "verify-modified-chain",
    "converge",
)
CONVERGE_RULES = ("leibniz", "chain", "remainder", "scale", "modified-chain")
FORMATS = ("json", "csv", "svg")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


@dataclass(frozen=True)
class FunctionSpec:
    """A named test function with up to two derivatives.

    ``fprime`` and ``fpp`` are ``None`` for functions that are not C^2.
    """

    text: str
    f: Callable
    fprime: Callable | None = None
    fpp: Callable | None = None
    weierstrass: WeierstrassParams | None = None

    def require_c2(self, role: str) -> None:
        if self.fprime is None or self.fpp is None:
            raise ConfigError(f"{role} function {self.text!r} must be twice differentiable")


def _power(p: float) -> FunctionSpec:
    def f(x):
        return np.power(x, p)

    if p == 0:
        return FunctionSpec(f"power:{p:g}", f, lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))
    if p == 1:
        return FunctionSpec(f"power:{p:g}", f, lambda x: np.ones_like(x), lambda x: np.zeros_like(x))
    return FunctionSpec(
        f"power:{p:g}",
        f,
        lambda x: p * np.power(x, p - 1),
        lambda x: p * (p - 1) * np.power(x, p - 2),
    )


def _number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{what} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite, got {text!r}")
    return value


def parse_function(text: str) -> FunctionSpec:
    """Parse ``power:p``, ``weierstrass:alpha:b:n_terms``, ``sin``, ``cos``,
    ``exp``, ``identity`` or ``constant:c``."""
    name, *args = text.strip().split(":")
    name = name.lower()
    simple = {
        "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
        "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
        "exp": (np.exp, np.exp, np.exp),
        "identity": (lambda x: x, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
    }
    if name in simple:
        if args:
            raise ConfigError(f"{name} takes no parameters, got {text!r}")
        return FunctionSpec(name, *simple[name])
    if name == "power":
        if len(args) != 1:
            raise ConfigError(f"expected power:p, got {text!r}")
        return _power(_number(args[0], "power exponent"))
    if name == "constant":
        if len(args) != 1:
            raise ConfigError(f"expected constant:c, got {text!r}")
        c = _number(args[0], "constant")
        zero = lambda x: np.zeros_like(x)  # noqa: E731
        return FunctionSpec(f"constant:{c:g}", lambda x: np.full_like(x, c), zero, zero)
    if name == "weierstrass":
        if len(args) != 3:
            raise ConfigError(f"expected weierstrass:alpha:b:n_terms, got {text!r}")
        alpha = _number(args[0], "Weierstrass alpha")
        b = _number(args[1], "Weierstrass b")
        n_terms = _number(args[2], "Weierstrass n_terms")
        if n_terms != int(n_terms):
            raise ConfigError(f"Weierstrass n_terms must be an integer, got {args[2]!r}")
        try:
            params = WeierstrassParams(alpha, b, int(n_terms))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return FunctionSpec(
            f"weierstrass:{alpha:g}:{b:g}:{int(n_terms)}",
            lambda x: weierstrass(params, x),
            weierstrass=params,
        )
    raise ConfigError(f"unknown function {text!r}")


def parse_grid(text: str) -> tuple[float, float, int]:
    """Parse ``a:h:n``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be a:h:n, got {text!r}")
    a = _number(parts[0], "grid start")
    h = _number(parts[1], "grid step")
    n = _number(parts[2], "grid size")
    if n != int(n):
        raise ConfigError(f"grid size must be an integer, got {parts[2]!r}")
    try:
        Grid(a, h, int(n))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return a, h, int(n)


@dataclass
class ExperimentConfig:
    """Everything one CLI invocation needs; JSON files mirror the flags."""

    experiment: str
    alpha: float | None = None
    op: str = "rl"
    base: float | None = None
    grid: tuple[float, float, int] | None = None
    functions: dict[str, str] = field(default_factory=dict)
    lam: float | None = None
    x0: float | None = None
    h_values: list[float] | None = None
    rule: str | None = None
    num_scales: int = 8
    quad_points: int = 32
    check_alpha: float | None = None
    check_A: float | None = None
    outputs: list[dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.grid is not None:
            out["grid"] = list(self.grid)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment'")
        data = dict(data)
        grid = data.get("grid")
        if isinstance(grid, str):
            data["grid"] = parse_grid(grid)
        elif grid is not None:
            if len(grid) != 3:
                raise ConfigError(f"grid must have three entries a, h, n, got {grid!r}")
            data["grid"] = (float(grid[0]), float(grid[1]), int(grid[2]))
        if data.get("h_values") is not None:
            data["h_values"] = [float(h) for h in data["h_values"]]
        data["functions"] = dict(data.get("functions") or {})
        data["outputs"] = [dict(o) for o in data.get("outputs") or []]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    # -- validation helpers -------------------------------------------------

    def make_grid(self) -> Grid:
        if self.grid is None:
            raise ConfigError(f"{self.experiment} needs --grid a:h:n")
        return Grid(*self.grid)

    def operator(self) -> OperatorSpec:
        if self.alpha is None:
            raise ConfigError(f"{self.experiment} needs --alpha")
        try:
            kind = OperatorKind.parse(self.op)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if kind is OperatorKind.LOCAL_QUOTIENT:
            raise ConfigError("the local quotient operator has no grid form; use rl or jumarie")
        base = self.make_grid().a if self.base is None else self.base
        try:
            return OperatorSpec(kind, self.alpha, base)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def function(self, role: str) -> FunctionSpec:
        text = self.functions.get(role)
        if text is None:
            raise ConfigError(f"{self.experiment} needs --{role}")
        return parse_function(text)

    def validate(self) -> None:
        """Check every parameter the chosen experiment uses, before computing."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for out in self.outputs:
            if out.get("format") not in FORMATS:
                raise ConfigError(f"unsupported output format {out.get('format')!r}")
            if not out.get("path"):
                raise ConfigError("output needs a path")
        if self.num_scales < 4:
            raise ConfigError("num_scales must be at least 4")
        if self.quad_points < 2:
            raise ConfigError("quad_points must be at least 2")
        if self.h_values is not None:
            hs = self.h_values
            if len(hs) < 3 or any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
                raise ConfigError("h_values needs at least 3 positive, strictly decreasing steps")
        if self.lam is not None and not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be positive, got {self.lam}")

        exp = self.experiment
        rule = self.rule if exp == "converge" else exp.removeprefix("verify-")
        if exp == "converge" and rule not in CONVERGE_RULES:
            raise ConfigError(f"converge needs --rule, one of {CONVERGE_RULES}")
        grid = self.make_grid()
        if exp in ("derive",) or exp.startswith("verify-") or exp == "converge":
            spec = self.operator()
            if spec.base != grid.a:
                raise ConfigError(f"operator base {spec.base} must equal the grid start {grid.a}")
        if exp in ("derive", "holder", "hadamard"):
            self.function("f")
        if exp == "weierstrass" and self.function("f").weierstrass is None:
            raise ConfigError("weierstrass needs a weierstrass:alpha:b:n_terms function")
        if exp == "hadamard":
            self.function("f").require_c2("outer")
            if self.x0 is None:
                raise ConfigError("hadamard needs --x0 (the expansion point t0)")
            if not grid.a <= self.x0 <= grid.b:
                raise ConfigError(f"t0={self.x0} lies outside the grid")
        if exp == "holder" and grid.n < 2**self.num_scales:
            raise ConfigError(f"holder with {self.num_scales} scales needs at least {2**self.num_scales} points")
        if (self.check_alpha is None) != (self.check_A is None):
            raise ConfigError("--check-alpha and --check-A go together")
        if self.check_alpha is not None and not (0 < self.check_alpha <= 1 and self.check_A > 0):
            raise ConfigError("need 0 < check_alpha <= 1 and check_A > 0")

        if rule == "leibniz":
            self.function("f")
            self.function("g")
        elif rule in ("chain", "remainder"):
            self.function("f").require_c2("outer")
            self.function("w")
            if rule == "remainder" and self.x0 is None:
                raise ConfigError("the remainder check needs --x0")
            if self.x0 is not None:
                try:
                    grid.index_of(self.x0)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        elif rule in ("scale", "modified-chain"):
            self.function("f")
            if self.lam is None:
                raise ConfigError(f"{exp} needs --lambda")
            if grid.a != 0.0 or self.operator().base != 0.0:
                raise ConfigError("scaling identities need a grid and operator base at 0")
        if exp.startswith("verify-") or exp == "converge":
            length = grid.b - grid.a
            for h in self.study_steps():
                steps = round(length / h)
                if steps < 2 or abs(steps * h - length) > 1e-9 * length:
                    raise ConfigError(f"step {h} does not divide the grid length {length}")
            if rule == "remainder":
                for h in self.study_steps():
                    if abs(round((self.x0 - grid.a) / h) * h - (self.x0 - grid.a)) > 1e-9 * h:
                        raise ConfigError(f"x0={self.x0} is not a point of the grid with step {h}")

    def study_steps(self) -> list[float]:
        """Refinement steps: explicit ``h_values`` or ``4h, 2h, h``."""
        if self.h_values is not None:
            return list(self.h_values)
        h = self.make_grid().h
        return [4 * h, 2 * h, h]
