"""Pipeline configuration: an INI file with one section per stage."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .series import FREQUENCY_STEPS, SERIES_SPECS
from .sim import MarketModel


@dataclass
class PipelineConfig:
    # [paths]
    quotes_input: tuple[str, ...] = ()
    factor_file: str | None = None
    output_dir: str = "out"
    # [ingest]
    schema: dict[str, str] = field(default_factory=dict)
    discount_column: str | None = None
    # [filters]
    min_days: int = 7
    max_days: int = 365
    min_mid: float = 0.5
    min_iv: float = 0.01
    max_iv: float = 1.0
    min_strikes: int = 3
    # [grid]
    grid_points: int = 2000
    sigma_range: float = 6.0
    smoothing: float = 1e-8
    quadrature: str = "grid"
    # [series]
    tau_days: tuple[int, ...] = (30,)
    frequencies: tuple[str, ...] = ("daily",)
    specs: tuple[str, ...] = ("variance", "third", "fourth", "skew", "kurtosis")
    method: str = "c"
    # [sim]
    model: MarketModel = field(default_factory=MarketModel)
    sim_checks: tuple[str, ...] = ("ap",)
    sim_payoffs: tuple[str, ...] = ("variance",)
    sim_partitions: tuple[int, ...] = (1, 5, 20, 30)
    sim_paths: int = 100_000
    sim_horizon_days: float = 30.0
    # [regress]
    period: tuple[str, str] | None = None
    restricted: bool = False
    robust: bool = False
    er_squared_from: str = "standardized"
    # [run]
    stages: tuple[str, ...] = ()
    seed: int = 0


_ALL_STAGES = ("ingest", "surface", "contracts", "swaps", "series",
               "simulate", "regress", "report")


def _split(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.replace(",", " ").split() if part.strip())


def load_config(path: str | Path) -> PipelineConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file {path} not found or unreadable")
    cfg = PipelineConfig()

    if parser.has_section("paths"):
        sec = parser["paths"]
        cfg.quotes_input = _split(sec.get("quotes_input", ""))
        cfg.factor_file = sec.get("factor_file", None)
        cfg.output_dir = sec.get("output_dir", cfg.output_dir)
    if parser.has_section("ingest"):
        sec = parser["ingest"]
        cfg.discount_column = sec.get("discount_column", None)
        cfg.schema = {key: value for key, value in sec.items()
                      if key not in ("discount_column",)}
    if parser.has_section("filters"):
        sec = parser["filters"]
        cfg.min_days = sec.getint("min_days", cfg.min_days)
        cfg.max_days = sec.getint("max_days", cfg.max_days)
        cfg.min_mid = sec.getfloat("min_mid", cfg.min_mid)
        cfg.min_iv = sec.getfloat("min_iv", cfg.min_iv)
        cfg.max_iv = sec.getfloat("max_iv", cfg.max_iv)
        cfg.min_strikes = sec.getint("min_strikes", cfg.min_strikes)
    if parser.has_section("grid"):
        sec = parser["grid"]
        cfg.grid_points = sec.getint("points", cfg.grid_points)
        cfg.sigma_range = sec.getfloat("sigma_range", cfg.sigma_range)
        cfg.smoothing = sec.getfloat("smoothing", cfg.smoothing)
        cfg.quadrature = sec.get("quadrature", cfg.quadrature)
    if parser.has_section("series"):
        sec = parser["series"]
        cfg.tau_days = tuple(int(t) for t in _split(sec.get("tau", "30")))
        cfg.frequencies = _split(sec.get("frequencies", "daily"))
        cfg.specs = _split(sec.get("specs", " ".join(cfg.specs)))
        cfg.method = sec.get("method", cfg.method)
    if parser.has_section("sim"):
        sec = parser["sim"]
        cfg.model = MarketModel(
            kind=sec.get("kind", "gbm"),
            sigma=sec.getfloat("sigma", 0.2),
            p_drift=sec.getfloat("p_drift", 0.0),
            jump_intensity=sec.getfloat("jump_intensity", 0.0),
            jump_mean=sec.getfloat("jump_mean", 0.0),
            jump_vol=sec.getfloat("jump_vol", 0.0),
            seed=sec.getint("seed", cfg.seed),
            steps_per_day=sec.getint("steps_per_day", 1),
        )
        cfg.sim_checks = _split(sec.get("checks", "ap"))
        cfg.sim_payoffs = _split(sec.get("payoffs", "variance"))
        cfg.sim_partitions = tuple(int(p) for p in _split(sec.get("partitions", "1 5 20 30")))
        cfg.sim_paths = sec.getint("paths", cfg.sim_paths)
        cfg.sim_horizon_days = sec.getfloat("horizon_days", cfg.sim_horizon_days)
    if parser.has_section("regress"):
        sec = parser["regress"]
        period = sec.get("period", "")
        if period:
            parts = period.split(":")
            if len(parts) != 2:
                raise ValidationError("regress period must be 'from:to' dates")
            cfg.period = (parts[0].strip(), parts[1].strip())
        cfg.restricted = sec.getboolean("restricted", cfg.restricted)
        cfg.robust = sec.getboolean("robust", cfg.robust)
        cfg.er_squared_from = sec.get("er_squared_from", cfg.er_squared_from)
    if parser.has_section("run"):
        cfg.stages = _split(parser["run"].get("stages", ""))
        cfg.seed = parser["run"].getint("seed", cfg.seed)
    return cfg


def validate_config(cfg: PipelineConfig, stages: tuple[str, ...] | None = None) -> None:
    """Fail fast, before any stage runs, on anything inconsistent or missing."""
    problems = []
    stages = stages if stages is not None else cfg.stages
    for stage in stages:
        if stage not in _ALL_STAGES:
            problems.append(f"unknown stage {stage!r}")
    if "ingest" in stages:
        if not cfg.quotes_input:
            problems.append("ingest stage needs paths.quotes_input")
        for p in cfg.quotes_input:
            if not Path(p).exists():
                problems.append(f"quotes input {p} does not exist")
    if "regress" in stages:
        if not cfg.factor_file:
            problems.append("regress stage needs paths.factor_file")
        elif not Path(cfg.factor_file).exists():
            problems.append(f"factor file {cfg.factor_file} does not exist")
    if cfg.grid_points < 10:
        problems.append(f"grid points {cfg.grid_points} too few")
    if cfg.sigma_range <= 0:
        problems.append("sigma_range must be positive")
    if not (0 < cfg.min_iv < cfg.max_iv):
        problems.append("need 0 < min_iv < max_iv")
    if cfg.min_days < 1 or cfg.max_days <= cfg.min_days:
        problems.append("need 1 <= min_days < max_days")
    for freq in cfg.frequencies:
        if freq not in FREQUENCY_STEPS:
            problems.append(f"unknown frequency {freq!r}")
    for spec in cfg.specs:
        if spec not in SERIES_SPECS:
            problems.append(f"unknown spec {spec!r}")
    if cfg.method not in ("a", "b", "c"):
        problems.append(f"unknown series method {cfg.method!r}")
    for t in cfg.tau_days:
        if t < 1:
            problems.append(f"tau {t} must be at least one day")
    if cfg.quadrature not in ("grid", "trapezoid"):
        problems.append(f"unknown quadrature rule {cfg.quadrature!r}")
    if problems:
        raise ValidationError("; ".join(problems))
