# src/harvest_minimax/cli.py
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import calibrate
from .config import ModelConfig, config_to_dict, load_model, output_dir
from .errors import ConfigError, FileSystemError, HarvestError, NumericalError, ParsingError
from .evaluate import (
    Policy,
    ProportionalPolicy,
    RollingHorizonPolicy,
    SequencePolicy,
    ShockRule,
    ThresholdPolicy,
    closure_runs,
    compare,
    discount_share,
    simulate,
)
from .kconcave import check_k_concave, condition8_holds
from .models import HarvestModel, Horizon, SampledFunction, SolveResult
from .solver import solve_dense, solve_fast
from .utils import dumps, to_serializable, write_csv, write_json
from .version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

CPP_RATE = 0.1277
X1 = 90.989


class _Parser(argparse.ArgumentParser):
    """Usage errors become validation errors (exit 1) instead of SystemExit(2)."""

    def error(self, message: str):
        raise ConfigError("arguments", message)


# ---------------------------------------------------------------- helpers

def _parse_policy(spec: str, cfg: ModelConfig, result_for_optimal) -> Policy:
    """`optimal`, `cpp:<rate>`, `rolling:<lookahead>` or `sequence:<f1>,<f2>,...`."""
    head, _, tail = spec.partition(":")
    try:
        if head == "optimal":
            return ThresholdPolicy(schedule=result_for_optimal().schedule)
        if head == "cpp":
            return ProportionalPolicy(rate=float(tail) if tail else CPP_RATE)
        if head == "rolling":
            lookahead = int(tail) if tail else cfg.horizon
            return RollingHorizonPolicy(model=cfg.model, grid=cfg.grid(), lookahead=Horizon(lookahead))
        if head == "sequence" and tail:
            return SequencePolicy(fractions=tuple(float(f) for f in tail.split(",")))
    except ValueError as e:
        raise ConfigError("policy", f"malformed policy {spec!r}: {e}") from e
    raise ConfigError("policy", f"unknown policy {spec!r}")


def _shock_rule(text: str) -> ShockRule:
    try:
        return ShockRule.parse(text)
    except ValueError as e:
        raise ConfigError("shocks", f"malformed shock rule {text!r}: {e}") from e


def _solve(cfg: ModelConfig, method: str = "fast") -> SolveResult:
    solver = solve_dense if method == "dense" else solve_fast
    return solver(cfg.model, cfg.grid(), cfg.periods())


def _load_samples(path: str) -> SampledFunction:
    p = Path(path)
    if not p.exists():
        raise FileSystemError(f"File not found: {path}")
    xs: List[float] = []
    vs: List[float] = []
    with p.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["x", "value"]:
            raise ParsingError("expected header x,value", line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParsingError(f"expected 2 fields, got {len(row)}", line=reader.line_num)
            try:
                xs.append(float(row[0]))
                vs.append(float(row[1]))
            except ValueError as e:
                raise ParsingError(f"malformed row: {e}", line=reader.line_num) from e
    if not xs:
        raise ParsingError("no samples")
    order = np.argsort(xs, kind="stable")
    return SampledFunction(np.asarray(xs)[order], np.asarray(vs)[order])


# ---------------------------------------------------------------- commands

def cmd_fit(args) -> Dict[str, Any]:
    """Calibrate a model from a fishery series; economics other than (q, b) come from --base."""
    series = calibrate.load_series(args.series)
    base = load_model(args.base)
    fitted = calibrate.fit_model(series, args.mortality, base.model.econ)
    cfg = ModelConfig(
        model=HarvestModel(bio=fitted.bio, econ=fitted.econ,
                           shock_points=base.model.shock_points,
                           monotone_shortcut=base.model.monotone_shortcut),
        step=base.step,
        horizon=base.horizon,
    )
    out = output_dir(args.out)
    rows = [("recruitment", i, float(r)) for i, r in enumerate(fitted.recruitment.residuals)]
    rows += [("effort", i, float(r)) for i, r in enumerate(fitted.effort.residuals)]
    return {
        "model": write_json(str(out / "model.json"), config_to_dict(cfg)),
        "residuals": write_csv(str(out / "residuals.csv"), ["series", "index", "residual"], rows),
        "recruitment": to_serializable({k: v for k, v in vars(fitted.recruitment).items() if k != "residuals"}),
        "effort": to_serializable({k: v for k, v in vars(fitted.effort).items() if k != "residuals"}),
        "shock_support": [fitted.bio.shock_lo, fitted.bio.shock_hi],
    }


def cmd_synth(args) -> Dict[str, Any]:
    """Write a synthetic constant-rate series generated from a model."""
    cfg = load_model(args.model)
    series = calibrate.synthetic_series(
        cfg.model.bio, cfg.model.econ, years=args.years, x1=args.x1,
        start_year=args.start_year, rate=args.rate, seed=args.seed, effort_noise=args.noise,
    )
    target = Path(args.out) if args.out else output_dir() / "series.csv"
    return {"series": calibrate.write_series(str(target), series), "records": len(series), "seed": args.seed}


def cmd_solve(args) -> Dict[str, Any]:
    """Solve the minimax recursion and write thresholds, values and counters."""
    cfg = load_model(args.model).with_overrides(step=args.grid_step, x_max=args.x_max, horizon=args.horizon)
    grid = cfg.grid()
    methods = ["dense", "fast"] if args.solver == "both" else [args.solver]
    results = {m: _solve(cfg, m) for m in methods}
    result = results[methods[-1]]
    stats: Dict[str, Any] = {
        "method": args.solver,
        "nodes": grid.count,
        "x_max": grid.x_max,
        "step": grid.step,
        "x_ref": grid.x_ref,
        "horizon": cfg.horizon,
        "condition8": to_serializable(condition8_holds(cfg.model.econ, grid)),
    }
    for m, r in results.items():
        counters = to_serializable(r.stats)
        counters.pop("wall_time")
        counters["flagged_stages"] = list(r.schedule.flagged)
        stats[m] = counters
    if len(results) == 2:
        dense, fast = results["dense"], results["fast"]
        for n in range(1, cfg.horizon + 1):
            if dense.schedule.stage(n) != fast.schedule.stage(n):
                raise NumericalError("dense and fast schedules disagree", stage=n)
        scale = np.maximum(1.0, np.abs(dense.values.values))
        stats["max_relative_value_gap"] = float(np.max(np.abs(dense.values.values - fast.values.values) / scale))

    out = output_dir(args.out)
    big_n = cfg.horizon
    thresholds = [(t, big_n - t + 1, result.schedule.for_year(t).S, result.schedule.for_year(t).s)
                  for t in range(1, big_n + 1)]
    nodes = result.values.nodes
    value_rows = [[x] + list(result.values.values[1:, i]) for i, x in enumerate(nodes)]
    first_year = result.policy[big_n]
    policy_rows = [(x, z, x - z) for x, z in zip(nodes, first_year)]
    first = result.schedule.for_year(1)
    logger.info("first-year rule: S=%g s=%g", first.S, first.s)
    return {
        "thresholds": write_csv(str(out / "thresholds.csv"), ["stage", "periods_remaining", "S", "s"], thresholds),
        "values": write_csv(str(out / "values.csv"), ["x"] + [f"C_{n}" for n in range(1, big_n + 1)], value_rows),
        "policy": write_csv(str(out / "policy.csv"), ["x", "escapement", "harvest"], policy_rows),
        "stats": write_json(str(out / "stats.json"), stats),
        "S_1": first.S,
        "s_1": first.s,
    }


def cmd_simulate(args) -> Dict[str, Any]:
    """Simulate one policy under a shock rule and write its trajectory."""
    cfg = load_model(args.model).with_overrides(step=args.grid_step, horizon=args.years)
    policy = _parse_policy(args.policy, cfg, lambda: _solve(cfg))
    traj = simulate(policy, args.x1, cfg.periods(), _shock_rule(args.shocks), cfg.model, cfg.grid())
    rows = [(s.year, s.stock_before, s.harvest, s.shock, s.stock_after, s.utility, s.discounted_utility)
            for s in traj.steps]
    out = output_dir(args.out)
    header = ["year", "stock_before", "harvest", "shock", "stock_after", "utility", "discounted_utility"]
    return {
        "trajectory": write_csv(str(out / "trajectory.csv"), header, rows),
        "policy": traj.policy,
        "total": traj.total,
        "final_year_share": discount_share(traj),
        "closure_runs": closure_runs(traj),
    }


def cmd_compare(args) -> Dict[str, Any]:
    """Worst-case comparison of the optimal, constant-proportional and rolling-horizon policies."""
    cfg = load_model(args.model).with_overrides(step=args.grid_step, horizon=args.horizon)
    grid = cfg.grid()
    policies: List[Policy] = [
        ThresholdPolicy(schedule=_solve(cfg).schedule),
        ProportionalPolicy(rate=args.cpp_rate),
        RollingHorizonPolicy(model=cfg.model, grid=grid, lookahead=Horizon(args.lookahead or cfg.horizon)),
    ]
    if args.sequence:
        policies.append(SequencePolicy(fractions=tuple(float(f) for f in args.sequence.split(","))))
    rows = compare(policies, args.x1, cfg.periods(), cfg.model, grid)
    out = output_dir(args.out)
    table = [(r.policy, r.revenue, r.loss, r.worst_case_value, r.simulated_value) for r in rows]
    return {
        "comparison": write_csv(str(out / "comparison.csv"),
                                ["policy", "discounted_revenue", "loss", "worst_case_value", "simulated_value"],
                                table),
        "summary": write_json(str(out / "comparison.json"),
                              {"x1": args.x1, "horizon": cfg.horizon, "rows": rows,
                               # the rolling rule re-solves from the state reached under worst-case shocks
                               "rolling_horizon_realization": "worst_case",
                               "revenue_valuation": "start of first season"}),
        "rows": to_serializable(rows),
    }


def cmd_check(args) -> Dict[str, Any]:
    """K-concavity verdict for a sampled function."""
    report = check_k_concave(_load_samples(args.samples), args.k, args.tol)
    verdict = to_serializable(report)
    if args.out:
        write_json(str(Path(args.out) / "check.json"), verdict)
    return verdict


# ---------------------------------------------------------------- entry points

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="harvest-minimax", description="Worst-case optimal (S-s) harvest policies")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    noise.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="calibrate a model from a year,biomass,harvest,effort CSV")
    p.add_argument("series")
    p.add_argument("-m", "--mortality", type=float, required=True)
    p.add_argument("--base", default="table1", help="model supplying price, costs and discount rate")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("synth", help="write a synthetic fishery series")
    p.add_argument("model", nargs="?", default="table1")
    p.add_argument("--years", type=int, default=33)
    p.add_argument("--x1", type=float, default=X1)
    p.add_argument("--start-year", type=int, default=1975)
    p.add_argument("--rate", type=float, default=CPP_RATE)
    p.add_argument("--seed", type=int, default=calibrate.DEMO_SEED)
    p.add_argument("--noise", type=float, default=0.0, help="relative effort noise")
    p.add_argument("--out", help="series CSV path")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("solve", help="solve the minimax recursion")
    p.add_argument("model", help="model JSON or 'table1'")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--solver", choices=["dense", "fast", "both"], default="fast")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("simulate", help="simulate a policy")
    p.add_argument("model")
    p.add_argument("--policy", default="optimal", help="optimal | cpp:<rate> | rolling:<N> | sequence:<f1,...>")
    p.add_argument("--x1", type=float, default=X1)
    p.add_argument("--shocks", default="worst", help="worst | constant:<w> | sequence:<w1,...>")
    p.add_argument("--years", type=int)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="compare policies under worst-case shocks")
    p.add_argument("model")
    p.add_argument("--x1", type=float, default=X1)
    p.add_argument("--horizon", type=int)
    p.add_argument("--cpp-rate", type=float, default=CPP_RATE)
    p.add_argument("--lookahead", type=int)
    p.add_argument("--sequence", help="per-year harvest fractions of an extra policy")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("check", help="K-concavity check of x,value samples")
    p.add_argument("samples")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="directory for check.json")
    p.set_defaults(handler=cmd_check)
    return parser


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("harvest_minimax").setLevel(level)


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args)
        summary = args.handler(args)
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HarvestError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(dumps(summary))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
