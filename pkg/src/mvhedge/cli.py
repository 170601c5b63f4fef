"""Command-line front end.

    mvhedge solve --config run.json
    mvhedge quantiles --config run.json --grid-points 10
    mvhedge reproduce-paper --output-dir out/

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analytics import (
    Instance,
    Strategy,
    correlation_sweep,
    hedged_profit_distribution,
    quantile_table,
    solve_strategy,
    volatility_sweep,
)
from .config import RunConfig, load_config
from .distributions import (
    GaussianSpec,
    discretize_real_world,
    discretize_risk_neutral,
)
from .errors import HedgeError, InvalidInputError
from .frontier import frontier_sweep, proxy_frontier_sweep
from .io import write_csv, write_json, write_manifest, write_matrix, write_numeric_csv
from .moments import assemble_system, hedged_moments, utility_value
from .solver import HedgeSolution, verify_foc

log = logging.getLogger("mvhedge")

COMMANDS = {
    "solve": "solve",
    "frontier": "frontier",
    "quantiles": "quantiles",
    "sweep-rho": "rho-sweep",
    "sweep-sigma": "sigma-sweep",
    "reproduce-paper": "reproduce-paper",
}
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def build_from_config(cfg: RunConfig) -> Instance:
    psi_src, phi_src = cfg.specs_with_grid()
    psi = discretize_real_world(psi_src) if isinstance(psi_src, GaussianSpec) else psi_src
    if isinstance(phi_src, GaussianSpec):
        phi = discretize_risk_neutral(phi_src, psi.grid.prices, psi.grid.weather)
    else:
        phi = phi_src
    return Instance(psi=psi, phi=phi, system=assemble_system(psi, phi, cfg.retail_rate))


def _tag(value: float) -> str:
    return f"{value:g}".replace("-", "m")


def claim_rows(levels: np.ndarray, payoff: np.ndarray):
    return zip(levels.tolist(), payoff.tolist())


def write_solution(out: Path, stem: str, inst: Instance, sol: HedgeSolution) -> list[Path]:
    sys_ = inst.system
    report = verify_foc(sys_, sol)
    mean, var = hedged_moments(sys_, sol.x_p, sol.x_w)
    record = sol.to_dict() | {
        "feasibilityResidual": report.feasibility,
        "residualScale": report.scale,
        "utility": utility_value(sys_, sol.x_p, sol.x_w, sol.risk_aversion),
        "mean": mean,
        "variance": var,
    }
    return [
        write_json(out / f"solution_{stem}.json", record),
        write_csv(out / f"claims_price_{stem}.csv", ["price", "payoff"], claim_rows(sys_.prices, sol.x_p)),
        write_csv(out / f"claims_weather_{stem}.csv", ["weather", "payoff"], claim_rows(sys_.weather, sol.x_w)),
    ]


def dump_matrices(out: Path, inst: Instance) -> list[Path]:
    s = inst.system
    return [
        write_matrix(out / "M.csv", s.M),
        write_matrix(out / "c.csv", s.c),
        write_matrix(out / "d.csv", s.d),
        write_matrix(out / "b.csv", s.b),
    ]


def run_solve(cfg: RunConfig) -> list[Path]:
    inst = build_from_config(cfg)
    out = cfg.output_dir
    paths = []
    for name in cfg.strategies or [Strategy.PRICE_AND_WEATHER.value]:
        sol = solve_strategy(inst.system, cfg.risk_aversion, Strategy(name))
        paths += write_solution(out, name, inst, sol)
    if cfg.dump_matrices:
        paths += dump_matrices(out, inst)
    return paths


def frontier_rows(points):
    return [(p.a, p.mean, p.variance, p.stdev) for p in points]


def run_frontier(cfg: RunConfig) -> list[Path]:
    inst = build_from_config(cfg)
    header = ["a", "mean", "variance", "stdev"]
    general = frontier_sweep(inst.system, cfg.a_sweep)
    proxy = proxy_frontier_sweep(inst.system, cfg.a_sweep)
    return [
        write_csv(cfg.output_dir / "frontier.csv", header, frontier_rows(general)),
        write_csv(cfg.output_dir / "frontier_proxy.csv", header, frontier_rows(proxy)),
    ]


def strategy_distributions(inst: Instance, r: float, a: float, names: Sequence[str]):
    dists = []
    for name in names:
        strategy = Strategy(name)
        sol = None if strategy is Strategy.NO_HEDGE else solve_strategy(inst.system, a, strategy)
        dists.append(hedged_profit_distribution(inst.psi, r, sol, strategy.value))
    return dists


def write_quantiles(out: Path, stem: str, dists, levels) -> list[Path]:
    table = quantile_table(dists, levels)
    labels = list(table)
    rows = [[lvl] + [table[k][i] for k in labels] for i, lvl in enumerate(levels)]
    paths = [write_csv(out / f"{stem}.csv", ["level"] + labels, rows)]
    for d in dists:
        paths.append(write_numeric_csv(
            out / f"distribution_{stem}_{d.label}.csv", ["profit", "probability"], [d.values, d.probs]
        ))
    paths.append(write_csv(
        out / f"moments_{stem}.csv", ["strategy", "mean", "variance", "stdev"],
        [(d.label, d.mean, d.variance, np.sqrt(d.variance)) for d in dists],
    ))
    return paths


def run_quantiles(cfg: RunConfig) -> list[Path]:
    inst = build_from_config(cfg)
    names = cfg.strategies or [s.value for s in Strategy]
    dists = strategy_distributions(inst, cfg.retail_rate, cfg.risk_aversion, names)
    return write_quantiles(cfg.output_dir, "quantiles", dists, cfg.levels)


def write_rho_sweep(out: Path, records) -> list[Path]:
    paths = []
    summary = []
    for rec in records:
        s = rec.system
        rows = [("price", p, g, x) for p, g, x in zip(s.prices, rec.general.x_p, rec.proxy.x_p)]
        rows += [("weather", w, g, x) for w, g, x in zip(s.weather, rec.general.x_w, rec.proxy.x_w)]
        paths.append(write_csv(out / f"claims_rho_{_tag(rec.rho)}.csv", ["claim", "level", "general", "proxy"], rows))
        gm, gv = hedged_moments(s, rec.general.x_p, rec.general.x_w)
        pm, pv = hedged_moments(s, rec.proxy.x_p, rec.proxy.x_w)
        summary.append((rec.rho, rec.general_utility, gm, gv, rec.proxy_utility, pm, pv, rec.utility_gap))
    header = ["rho", "general_utility", "general_mean", "general_variance",
              "proxy_utility", "proxy_mean", "proxy_variance", "utility_gap"]
    paths.append(write_csv(out / "rho_sweep_summary.csv", header, summary))
    return paths


def run_rho_sweep(cfg: RunConfig) -> list[Path]:
    psi, phi = cfg.specs_with_grid()
    records = correlation_sweep(psi, phi, cfg.rho_values, cfg.risk_aversion, cfg.retail_rate)
    return write_rho_sweep(cfg.output_dir, records)


def write_sigma_sweep(out: Path, records, a: float) -> list[Path]:
    paths = []
    summary = []
    for rec in records:
        s, sol = rec.system, rec.solution
        rows = [("price", p, x) for p, x in zip(s.prices, sol.x_p)]
        rows += [("weather", w, x) for w, x in zip(s.weather, sol.x_w)]
        paths.append(write_csv(
            out / f"claims_sigma_{rec.axis}_{_tag(rec.sigma)}.csv", ["claim", "level", "payoff"], rows
        ))
        mean, var = hedged_moments(s, sol.x_p, sol.x_w)
        summary.append((rec.axis, rec.sigma, utility_value(s, sol.x_p, sol.x_w, a), mean, var, rec.payoff_range))
    header = ["axis", "sigma", "utility", "mean", "variance", "payoff_range"]
    axis = records[0].axis if records else "none"
    paths.append(write_csv(out / f"sigma_sweep_{axis}_summary.csv", header, summary))
    return paths


def run_sigma_sweep(cfg: RunConfig) -> list[Path]:
    psi, phi = cfg.specs_with_grid()
    records = volatility_sweep(
        psi, phi, cfg.sigma_values, cfg.sigma_axis, cfg.risk_aversion, cfg.retail_rate, rho=cfg.sigma_rho
    )
    return write_sigma_sweep(cfg.output_dir, records, cfg.risk_aversion)


def run(cfg: RunConfig) -> list[Path]:
    """Execute one configured pipeline and write its manifest."""
    cfg.validate()
    cfg.output_dir = Path(cfg.output_dir)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "reproduce-paper":
        from .reproduce import reproduce_paper

        return reproduce_paper(cfg.output_dir)
    runners = {
        "solve": run_solve,
        "frontier": run_frontier,
        "quantiles": run_quantiles,
        "rho-sweep": run_rho_sweep,
        "sigma-sweep": run_sigma_sweep,
    }
    artifacts = runners[cfg.mode](cfg)
    artifacts.append(write_manifest(cfg.output_dir, artifacts))
    return artifacts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvhedge", description="Optimal zero-cost price and weather claims for an energy retailer."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--risk-aversion", type=float)
        p.add_argument("--grid-points", type=int)
        p.add_argument("--strategy", action="append", dest="strategies",
                       choices=[s.value for s in Strategy])
        p.add_argument("--output-dir", type=Path)
        p.add_argument("--dump-matrices", action="store_true")
    return parser


def configure_logging() -> None:
    level = os.environ.get("HEDGE_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    mode = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, mode)
        if args.risk_aversion is not None:
            cfg.risk_aversion = args.risk_aversion
        if args.grid_points is not None:
            cfg.grid_points = args.grid_points
        if args.strategies:
            cfg.strategies = args.strategies
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        if args.dump_matrices:
            cfg.dump_matrices = True
        artifacts = run(cfg)
    except InvalidInputError as exc:
        print(f"mvhedge: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mvhedge: error: {exc}", file=sys.stderr)
        return 2
    except (HedgeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mvhedge: numerical failure: {exc}", file=sys.stderr)
        return 3
    log.info("wrote %d artifacts to %s", len(artifacts), cfg.output_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
