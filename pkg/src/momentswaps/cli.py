"""Command line interface and pipeline orchestration.

Exit codes: 0 on success, 2 for validation problems (bad config, missing
inputs), 3 when a stage fails mid-run.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from . import quotes as quotes_mod
from . import report as report_mod
from . import sim as sim_mod
from . import stats as stats_mod
from . import stores, surface
from .config import PipelineConfig, load_config, validate_config
from .contracts import build_contract_panel
from .errors import MomentSwapsError, StageError, ValidationError
from .series import (FREQUENCY_STEPS, MonitoringPartition, SERIES_SPECS,
                     build_pnl_series, _expiry_increment)

log = logging.getLogger("momentswaps")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, inputs: list[str], out: str) -> list[Path]:
    quote_sets = quotes_mod.load_quotes(inputs, schema=cfg.schema or None,
                                        discount_column=cfg.discount_column)
    filtered = [quotes_mod.filter_quotes(
        qs, min_days=cfg.min_days, max_days=cfg.max_days, min_mid=cfg.min_mid,
        min_iv=cfg.min_iv, max_iv=cfg.max_iv, min_strikes=cfg.min_strikes)
        for qs in quote_sets]
    kept = [qs for qs in filtered if len(qs)]
    log.info("ingest: %d trade dates, %d quotes kept",
             len(kept), sum(len(qs) for qs in kept))
    return stores.write_quote_store(kept, out)


def stage_surface(cfg: PipelineConfig, quote_store: str, out: str) -> list[Path]:
    grids = []
    for qs in stores.read_quote_store(quote_store):
        curves, warnings = quotes_mod.curves_for_date(qs)
        for message in warnings:
            log.warning("surface: %s", message)
        if curves:
            grids.extend(surface.fit_surface(
                curves, n_points=cfg.grid_points, sigma_range=cfg.sigma_range,
                smoothing=cfg.smoothing))
    if not grids:
        raise StageError("surface: no curves could be fitted")
    check = surface.check_static_arbitrage(grids)
    if not check.clean:
        raise StageError(f"surface: arbitrage violations remain: {check.violations[:3]}")
    return stores.write_grid_store(grids, out)


def stage_contracts(cfg: PipelineConfig, grid_store: str, out: str) -> list[Path]:
    panels: dict = {}
    for grid in stores.read_grid_store(grid_store):
        panel = build_contract_panel(grid, rule=cfg.quadrature)
        panels.setdefault(grid.trade_date, {})[grid.expiry] = panel
    return stores.write_panel_store(panels, out)


def stage_swaps(cfg: PipelineConfig, panel_store: str, spec: str, out: str) -> list[Path]:
    """Fixed-expiry one-period increments for every (date, expiry) pair."""
    panels = stores.read_panel_store(panel_store)
    dates = sorted(panels)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "expiry", "increment", "realised_part", "implied_part"))
        for prev_d, cur_d in zip(dates, dates[1:]):
            for expiry in sorted(set(panels[prev_d]) & set(panels[cur_d])):
                value, realised, implied = _expiry_increment(
                    spec, panels[prev_d][expiry], panels[cur_d][expiry])
                writer.writerow([cur_d.isoformat(), expiry.isoformat(),
                                 repr(value), repr(realised), repr(implied)])
    return [out_path]


def stage_series(cfg: PipelineConfig, panel_store: str, spec: str, frequency: str,
                 tau: int, method: str, out: str) -> list[Path]:
    panels = stores.read_panel_store(panel_store)
    partition = MonitoringPartition.from_trading_dates(panels.keys(), frequency)
    series = build_pnl_series(panels, spec, partition, tau=tau, method=method)
    if not len(series.increments):
        log.warning("series %s/%s: no investable increments (gaps: %d)",
                    spec, frequency, len(series.gaps))
    return [stores.write_pnl_series(series, out)]


def stage_simulate(cfg: PipelineConfig, measure: str, check: str, n_paths: int,
                   out: str) -> list[Path]:
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    model = cfg.model
    rows = []
    for payoff in cfg.sim_payoffs:
        if check == "ap":
            for row in sim_mod.verify_aggregation(
                    payoff, model, list(cfg.sim_partitions),
                    horizon_days=cfg.sim_horizon_days, n_paths=n_paths):
                rows.append({"payoff": payoff, "check": "ap",
                             "partition": row["partition"],
                             "estimate": row["deviation"], "se": row["se"],
                             "n_paths": n_paths})
        elif check == "qbias":
            for partition in cfg.sim_partitions:
                eps, se = sim_mod.estimate_q_bias(
                    payoff, model, partition, n_paths=n_paths,
                    horizon_days=cfg.sim_horizon_days)
                rows.append({"payoff": payoff, "check": "qbias",
                             "partition": partition, "estimate": eps, "se": se,
                             "n_paths": n_paths})
        elif check == "pbias":
            for partition in cfg.sim_partitions:
                b, se = sim_mod.estimate_p_bias(
                    payoff, model, partition, n_paths=n_paths,
                    horizon_days=cfg.sim_horizon_days)
                rows.append({"payoff": payoff, "check": "pbias",
                             "partition": partition, "estimate": b, "se": se,
                             "n_paths": n_paths})
        elif check == "variance":
            for partition in cfg.sim_partitions:
                var, se = sim_mod.estimator_variance(
                    payoff, model, partition, n_paths=n_paths,
                    horizon_days=cfg.sim_horizon_days, measure=measure)
                rows.append({"payoff": payoff, "check": "variance",
                             "partition": partition, "estimate": var, "se": se,
                             "n_paths": n_paths})
        else:
            raise ValidationError(f"unknown simulation check {check!r}")
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["payoff", "check", "partition",
                                                "estimate", "se", "n_paths"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return [out_path]


def _parse_period(period: tuple[str, str] | None):
    if period is None:
        return None
    start = datetime.strptime(period[0], "%Y-%m-%d").date()
    end = datetime.strptime(period[1], "%Y-%m-%d").date()
    return start, end


def stage_regress(cfg: PipelineConfig, pnl_path: str, factor_path: str,
                  out: str) -> list[Path]:
    pnl = stores.read_pnl_series(pnl_path)
    factors = stats_mod.load_factor_file(factor_path)
    period = _parse_period(cfg.period)
    rows = [(d, x) for d, x in zip(pnl.dates, pnl.increments)
            if d in factors and (period is None or period[0] <= d <= period[1])]
    if len(rows) < 10:
        raise StageError(f"regress: only {len(rows)} overlapping observations")
    y = stats_mod.standardize(np.array([x for _, x in rows]))
    aligned = {name: stats_mod.standardize(
        np.array([factors[d][name] for d, _ in rows]))
        for name in stats_mod.FACTOR_NAMES}
    restricted = stats_mod.ols_factor_regression(
        y, aligned, restricted=True, robust=cfg.robust,
        er_squared_from=cfg.er_squared_from)
    full = stats_mod.ols_factor_regression(
        y, aligned, restricted=False, robust=cfg.robust,
        er_squared_from=cfg.er_squared_from)
    return [report_mod.regression_table({pnl.label: (restricted, full)}, out)]


def stage_report(cfg: PipelineConfig, out_dir: str) -> list[Path]:
    """Assemble tables and figures from whatever stores already exist."""
    root = Path(out_dir)
    artifacts: list[Path] = []
    pnl_dir = root / "pnl"
    by_freq: dict[str, dict[str, stores.StoredPnl]] = {}
    if pnl_dir.is_dir():
        for path in sorted(pnl_dir.glob("*.csv")):
            pnl = stores.read_pnl_series(path)
            by_freq.setdefault(pnl.frequency, {})[pnl.label] = pnl
    for freq, pnls in sorted(by_freq.items()):
        artifacts.append(report_mod.cumulative_chart(
            pnls, root / "report" / f"cumulative_{freq}.svg",
            f"Cumulative {freq} premia"))
        artifacts.append(report_mod.increments_chart(
            pnls, root / "report" / f"increments_{freq}.svg",
            f"{freq} increments"))
        if len(pnls) >= 2:
            artifacts.append(report_mod.correlation_table(
                pnls, root / "report" / f"correlations_{freq}.csv"))
    sim_model = cfg.model
    paths = sim_mod.simulate_paths(sim_model, "P", cfg.sim_horizon_days, 20, 2000)
    returns = paths.increments().reshape(-1)
    artifacts.append(report_mod.iid_scaling_table(
        returns, root / "report" / "iid_scaling.csv"))
    if not artifacts:
        raise StageError("report: no stores found to report on")
    return artifacts


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentswaps",
        description="Discretisation-invariant moment swaps: surface fitting, "
                    "contract replication, investable P&L series, simulation "
                    "checks and factor regressions.")
    parser.add_argument("--config", help="INI config file", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override top-level seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for data-parallel stages")
    parser.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate and filter option quotes")
    p.add_argument("--input", required=True, nargs="+", help="delimited quote file(s)")
    p.add_argument("--out", required=True, help="quote store directory")

    p = sub.add_parser("surface", help="fit arbitrage-free strike grids")
    p.add_argument("--quotes", required=True, help="quote store directory")
    p.add_argument("--out", required=True, help="grid store directory")

    p = sub.add_parser("contracts", help="price power log and entropy contracts")
    p.add_argument("--grids", required=True, help="grid store directory")
    p.add_argument("--out", required=True, help="panel store directory")

    p = sub.add_parser("swaps", help="fixed-expiry one-period swap increments")
    p.add_argument("--panel", required=True, help="panel store directory")
    p.add_argument("--spec", required=True, choices=SERIES_SPECS)
    p.add_argument("--out", required=True, help="output csv")

    p = sub.add_parser("series", help="constant-maturity investable P&L series")
    p.add_argument("--panel", required=True, help="panel store directory")
    p.add_argument("--spec", required=True, choices=SERIES_SPECS)
    p.add_argument("--freq", required=True, choices=tuple(FREQUENCY_STEPS))
    p.add_argument("--tau", type=int, default=30, help="constant maturity in calendar days")
    p.add_argument("--method", default="c", choices=("a", "b", "c"),
                   help="roll methodology; (c) interpolates increments")
    p.add_argument("--out", required=True, help="output csv")

    p = sub.add_parser("simulate", help="Monte Carlo aggregation and bias checks")
    p.add_argument("--model", help="INI file with a [sim] section", default=None)
    p.add_argument("--measure", default="Q", choices=("P", "Q"))
    p.add_argument("--check", required=True, choices=("ap", "qbias", "pbias", "variance"))
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--out", required=True, help="report csv")

    p = sub.add_parser("regress", help="factor regression of premia increments")
    p.add_argument("--pnl", required=True, help="P&L series csv")
    p.add_argument("--factors", required=True, help="daily factor file")
    p.add_argument("--period", default=None, help="from:to (ISO dates)")
    p.add_argument("--restricted", default="no", choices=("yes", "no"))
    p.add_argument("--out", required=True, help="report csv")

    p = sub.add_parser("report", help="tables and figures from existing stores")
    p.add_argument("--out", default=None, help="output directory (default from config)")

    sub.add_parser("run", help="run the configured pipeline end to end")
    return parser


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.model = sim_mod.MarketModel(**{**cfg.model.__dict__, "seed": args.seed})
    return cfg


def run_pipeline(cfg: PipelineConfig) -> list[Path]:
    """Execute the configured stages in dependency order and write a manifest."""
    stages = cfg.stages or ("simulate",)
    validate_config(cfg, stages)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    artifacts: list[Path] = []
    order = ("ingest", "surface", "contracts", "swaps", "series",
             "simulate", "regress", "report")
    for stage in sorted(stages, key=order.index):
        try:
            if stage == "ingest":
                artifacts += stage_ingest(cfg, list(cfg.quotes_input), str(root / "quotes"))
            elif stage == "surface":
                artifacts += stage_surface(cfg, str(root / "quotes"), str(root / "grids"))
            elif stage == "contracts":
                artifacts += stage_contracts(cfg, str(root / "grids"), str(root / "panel"))
            elif stage == "swaps":
                for spec in cfg.specs:
                    artifacts += stage_swaps(cfg, str(root / "panel"), spec,
                                             str(root / "swaps" / f"{spec}.csv"))
            elif stage == "series":
                for spec in cfg.specs:
                    for freq in cfg.frequencies:
                        for tau in cfg.tau_days:
                            name = f"{spec}_{freq}_{tau}d.csv"
                            artifacts += stage_series(
                                cfg, str(root / "panel"), spec, freq, tau,
                                cfg.method, str(root / "pnl" / name))
            elif stage == "simulate":
                for check in cfg.sim_checks:
                    artifacts += stage_simulate(
                        cfg, "Q", check, cfg.sim_paths,
                        str(root / "sim" / f"{check}.csv"))
            elif stage == "regress":
                for spec in cfg.specs:
                    for freq in cfg.frequencies:
                        for tau in cfg.tau_days:
                            pnl = root / "pnl" / f"{spec}_{freq}_{tau}d.csv"
                            if pnl.exists():
                                artifacts += stage_regress(
                                    cfg, str(pnl), cfg.factor_file,
                                    str(root / "regress" / f"{spec}_{freq}_{tau}d.csv"))
            elif stage == "report":
                artifacts += stage_report(cfg, str(root))
        except MomentSwapsError as exc:
            raise StageError(f"stage {stage!r} failed: {exc}") from exc
    artifacts.append(stores.write_manifest(artifacts, root))
    return artifacts


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            validate_config(cfg, cfg.stages or ("simulate",))
            run_pipeline(cfg)
        elif args.command == "ingest":
            validate_config(cfg, ())
            stage_ingest(cfg, args.input, args.out)
        elif args.command == "surface":
            validate_config(cfg, ())
            stage_surface(cfg, args.quotes, args.out)
        elif args.command == "contracts":
            validate_config(cfg, ())
            stage_contracts(cfg, args.grids, args.out)
        elif args.command == "swaps":
            stage_swaps(cfg, args.panel, args.spec, args.out)
        elif args.command == "series":
            stage_series(cfg, args.panel, args.spec, args.freq, args.tau,
                         args.method, args.out)
        elif args.command == "simulate":
            if args.model:
                cfg = load_config(args.model)
            cfg.model = sim_mod.MarketModel(
                **{**cfg.model.__dict__,
                   "seed": args.seed if args.seed is not None else cfg.model.seed})
            stage_simulate(cfg, args.measure, args.check, args.paths, args.out)
        elif args.command == "regress":
            if args.period:
                parts = args.period.split(":")
                if len(parts) != 2:
                    raise ValidationError("--period must be from:to")
                cfg.period = (parts[0], parts[1])
            cfg.restricted = args.restricted == "yes"
            stage_regress(cfg, args.pnl, args.factors, args.out)
        elif args.command == "report":
            stage_report(cfg, args.out or cfg.output_dir)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except MomentSwapsError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
