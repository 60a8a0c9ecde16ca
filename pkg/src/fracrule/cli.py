"""``fracrule`` command line: one experiment per invocation.

Exit status is 0 on success, 2 for invalid configuration and 1 for failures
while computing or writing. Outputs are written to a temporary file and
renamed, so a failed run leaves no partial files behind.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable

from . import __version__
from .analysis import (
    hadamard_decompose,
    hadamard_g2,
    holder_condition_check,
    holder_estimate,
)
from .config import CONVERGE_RULES, EXPERIMENTS, ConfigError, ExperimentConfig, parse_grid
from .core import Grid, sample
from .operators import THREADS_ENV, OperatorSpec, frac_derivative, thread_count
from .report import Document, as_document, emit_report, render_csv, render_json
from .rules import (
    RuleReport,
    convergence_study,
    leibniz_defect,
    modified_chain_residual,
    remainder_vanishing_check,
    scale_property_residual,
    theorem_chain_residual,
)

__all__ = ["main", "run", "build_parser", "config_from_args"]


def _grid_dict(grid: Grid) -> dict:
    return {"a": grid.a, "h": grid.h, "n": grid.n}


def rule_experiment(
    config: ExperimentConfig, rule: str, x0_on_grid: bool = True
) -> Callable[[Grid], RuleReport]:
    """Build ``grid -> RuleReport`` for one of the rule checks."""
    base_spec = config.operator()

    def spec_for(grid: Grid) -> OperatorSpec:
        return OperatorSpec(base_spec.kind, base_spec.order, grid.a)

    if rule == "leibniz":
        f, g = config.function("f"), config.function("g")
        return lambda grid: leibniz_defect(
            sample(f.f, grid, f.text), sample(g.f, grid, g.text), spec_for(grid)
        )
    if rule == "chain":
        f, w = config.function("f"), config.function("w")
        x0 = config.x0 if x0_on_grid else None
        return lambda grid: theorem_chain_residual(
            f.f, f.fprime, sample(w.f, grid, w.text), spec_for(grid), x0
        )
    if rule == "remainder":
        f, w = config.function("f"), config.function("w")
        return lambda grid: remainder_vanishing_check(
            f.fpp, sample(w.f, grid, w.text), spec_for(grid), config.x0, config.quad_points
        )
    if rule == "scale":
        f = config.function("f")
        return lambda grid: scale_property_residual(f.f, config.lam, spec_for(grid), grid)
    if rule == "modified-chain":
        f = config.function("f")
        return lambda grid: modified_chain_residual(f.f, config.lam, spec_for(grid), grid)
    raise ConfigError(f"unknown rule {rule!r}; expected one of {CONVERGE_RULES}")


def _inputs(config: ExperimentConfig) -> dict:
    out = {"experiment": config.experiment, "functions": dict(sorted(config.functions.items()))}
    if config.lam is not None:
        out["lambda"] = config.lam
    if config.x0 is not None:
        out["x0"] = config.x0
    return out


def _study(config: ExperimentConfig, rule: str):
    grid = config.make_grid()
    return convergence_study(
        rule_experiment(config, rule, x0_on_grid=False),
        config.study_steps(),
        a=grid.a,
        length=grid.b - grid.a,
    )


def build_document(config: ExperimentConfig) -> Document:
    exp = config.experiment
    grid = config.make_grid()

    if exp == "derive":
        f = config.function("f")
        spec = config.operator()
        d = frac_derivative(sample(f.f, grid, f.text), spec)
        content = {
            **_inputs(config),
            "alpha": spec.alpha,
            "operator": spec.to_dict(),
            "grid": _grid_dict(grid),
            "values": d.values.tolist(),
        }
        rows = list(zip(grid.points.tolist(), d.values.tolist()))
        return Document(content, ("x", "derivative"), rows, False, d.label)

    if exp == "weierstrass":
        f = config.function("f")
        s = sample(f.f, grid, f.text)
        p = f.weierstrass
        content = {
            **_inputs(config),
            "params": {
                "alpha": p.alpha,
                "b": p.b,
                "n_terms": p.n_terms,
                "tail_bound": p.tail_bound,
            },
            "grid": _grid_dict(grid),
            "values": s.values.tolist(),
        }
        rows = list(zip(grid.points.tolist(), s.values.tolist()))
        return Document(content, ("x", "value"), rows, False, f.text)

    if exp == "holder":
        f = config.function("f")
        s = sample(f.f, grid, f.text)
        est = holder_estimate(s, config.num_scales)
        doc = as_document(est)
        content = {**_inputs(config), "grid": _grid_dict(grid), **doc.content}
        if config.check_alpha is not None:
            chk = holder_condition_check(s, config.check_alpha, config.check_A)
            content["condition"] = {
                "alpha": config.check_alpha,
                "A": config.check_A,
                "holds": chk.holds,
                "worst_ratio": chk.worst_ratio,
                "worst_pair": list(chk.worst_pair),
                "stride": chk.stride,
            }
        return Document(content, doc.header, doc.rows, True, f"holder {f.text}")

    if exp == "hadamard":
        f = config.function("f")
        dec = hadamard_decompose(f.f, f.fprime, f.fpp, config.x0, grid, config.quad_points)
        content = {
            **_inputs(config),
            "grid": _grid_dict(grid),
            "quad_points": config.quad_points,
            "t0": dec.t0,
            "f_t0": dec.f_t0,
            "fprime_t0": dec.fprime_t0,
            "g2_at_t0": hadamard_g2(f.fpp, dec.t0, dec.t0, config.quad_points),
            "max_residual": dec.max_residual,
            "g2": dec.g2_values.values.tolist(),
            "residual": dec.residual.tolist(),
        }
        rows = list(zip(grid.points.tolist(), dec.g2_values.values.tolist()))
        return Document(content, ("x", "g2"), rows, False, f"g2 of {f.text}")

    rule = config.rule if exp == "converge" else exp.removeprefix("verify-")
    study = _study(config, rule)
    if exp == "converge":
        doc = as_document(study)
        content = {**_inputs(config), "rule": rule, **doc.content}
        return Document(content, doc.header, doc.rows, True, rule)

    report = rule_experiment(config, rule)(grid)
    doc = as_document(report)
    content = {
        **_inputs(config),
        **doc.content,
        "residual_at_end": float(report.residual.values[-1]),
        "verdict": study.verdict,
        "observed_order": study.to_dict()["observed_order"],
        "exact": study.exact,
        "h_values": study.h_values.tolist(),
        "norms": study.norms.tolist(),
    }
    return Document(content, doc.header, doc.rows, False, rule)


def run(config: ExperimentConfig, stdout=None) -> int:
    """Validate, compute and write; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        config.validate()
        thread_count()
        for out in config.outputs:
            parent = Path(out["path"]).parent
            if not parent.is_dir():
                raise ConfigError(f"output directory {str(parent)!r} does not exist")
    except ValueError as exc:
        print(f"fracrule: error: {exc}", file=sys.stderr)
        return 2

    try:
        doc = build_document(config)
        if not config.outputs:
            tabular = config.experiment in ("derive", "weierstrass")
            stdout.write(render_csv(doc) if tabular else render_json(doc))
        for out in config.outputs:
            print(emit_report(doc, out["format"], out["path"]), file=stdout)
    except ConfigError as exc:
        print(f"fracrule: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"fracrule: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid_arg(text: str):
    try:
        return parse_grid(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--alpha", type=float, help="derivative order, 0 < alpha <= 1")
    common.add_argument("--op", help="operator: rl or jumarie (alias caputo)")
    common.add_argument("--base", type=float, help="lower terminal (default: grid start)")
    common.add_argument("--grid", type=_grid_arg, help="uniform grid a:h:n")
    common.add_argument("--f", help="function, e.g. power:1, sin, weierstrass:0.5:2:40")
    common.add_argument("--g", help="second factor for verify-leibniz")
    common.add_argument("--w", help="inner function for chain and remainder checks")
    common.add_argument("--weierstrass", metavar="ALPHA:B:N", help="shorthand for --f weierstrass:ALPHA:B:N")
    common.add_argument("--lambda", dest="lam", type=float, help="scale factor for scaling checks")
    common.add_argument("--x0", "--t0", dest="x0", type=float, help="evaluation / expansion point")
    common.add_argument("--h-values", type=_floats, help="refinement steps, comma separated")
    common.add_argument("--rule", choices=CONVERGE_RULES, help="rule studied by converge")
    common.add_argument("--num-scales", type=int, help="dyadic scales for the Hölder fit")
    common.add_argument("--quad-points", type=int, help="Gauss-Legendre nodes for g2")
    common.add_argument("--check-alpha", type=float, help="also check the Hölder condition at this exponent")
    common.add_argument("--check-A", dest="check_A", type=float, help="Hölder constant for --check-alpha")
    for fmt in ("json", "csv", "svg"):
        common.add_argument(f"--{fmt}", metavar="PATH", help=f"write a {fmt.upper()} report")

    parser = argparse.ArgumentParser(
        prog="fracrule",
        description="Discrete fractional derivatives and checks of their product, chain and scaling rules.",
        epilog=f"{THREADS_ENV} caps the worker threads used by the convolution.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=name.replace("-", " "))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data["experiment"] = args.experiment
    config = ExperimentConfig.from_dict(data)

    for key in ("alpha", "op", "base", "grid", "lam", "x0", "h_values", "rule",
                "num_scales", "quad_points", "check_alpha", "check_A"):
        value = getattr(args, key)
        if value is not None:
            setattr(config, key, value)
    for role in ("f", "g", "w"):
        if getattr(args, role) is not None:
            config.functions[role] = getattr(args, role)
    if args.weierstrass is not None:
        config.functions["f"] = f"weierstrass:{args.weierstrass}"
    flagged = [{"format": fmt, "path": getattr(args, fmt)} for fmt in ("json", "csv", "svg") if getattr(args, fmt)]
    if flagged:
        config.outputs = flagged
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"fracrule: error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
