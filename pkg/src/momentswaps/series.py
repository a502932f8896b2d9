"""Constant-maturity, non-overlapping, investable P&L series.

Every monitoring interval holds freshly incepted swaps at the two traded
maturities bracketing the target date and linearly interpolates their one
period P&L increments (method (c), the default).  Interpolating swap-rate
levels instead (method (b)) or rolling at maturity (method (a)) are available
behind the ``method`` flag to reproduce the artefacts they induce.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping

import numpy as np

from .contracts import ContractPanel
from .errors import BracketingError, MomentSwapsError
from .swaps import (incremental_pnl, make_swap, neuberger_skew_payoff,
                    standardise_moment_pnl, state_from_panel)

log = logging.getLogger(__name__)

FREQUENCY_STEPS = {"daily": 1, "weekly": 5, "monthly": 20}

SERIES_SPECS = ("variance", "third", "fourth", "skew", "kurtosis", "rv", "lv", "psi")

_SPEC_ORDER = {"variance": 1, "third": 2, "fourth": 3, "skew": 2, "kurtosis": 3}
_STANDARDISED = {"skew": 3, "kurtosis": 4}


@dataclass(frozen=True)
class MonitoringPartition:
    frequency: str
    dates: tuple[date, ...]

    def __post_init__(self):
        if self.frequency not in FREQUENCY_STEPS:
            raise MomentSwapsError(f"frequency must be one of {tuple(FREQUENCY_STEPS)}")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise MomentSwapsError("partition dates must be strictly increasing")

    @property
    def step(self) -> int:
        return FREQUENCY_STEPS[self.frequency]

    @classmethod
    def from_trading_dates(cls, dates, frequency: str) -> "MonitoringPartition":
        """Every step-th trading date, so spacing is the frequency in trading days."""
        step = FREQUENCY_STEPS[frequency]
        ordered = sorted(set(dates))
        return cls(frequency, tuple(ordered[::step]))


@dataclass(frozen=True)
class Leg:
    """Audit record: the two tradable positions composing one increment."""
    expiry_lower: date
    expiry_upper: date
    weight_lower: float
    weight_upper: float
    increment_lower: float
    increment_upper: float


@dataclass(frozen=True)
class PnlSeries:
    label: str
    tau_days: int
    frequency: str
    dates: tuple[date, ...]
    increments: np.ndarray
    realised: np.ndarray
    implied: np.ndarray
    legs: tuple[Leg, ...] = ()
    gaps: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.dates)
        if not (len(self.increments) == len(self.realised) == len(self.implied) == n):
            raise MomentSwapsError("series arrays must align with its dates")

    def cumulative(self) -> np.ndarray:
        return cumulate(self)


def cumulate(series: PnlSeries) -> np.ndarray:
    """Running sum of the increments, anchored at zero wealth before the first."""
    return np.cumsum(series.increments)


def constant_maturity_weights(t_l: date, t_u: date, t: date, tau: int) -> tuple[float, float]:
    target = t + timedelta(days=tau)
    if t_l >= t_u:
        raise BracketingError(f"need T_l < T_u, got {t_l} >= {t_u}")
    if not (t_l <= target <= t_u):
        raise BracketingError(f"target {target} outside [{t_l}, {t_u}]")
    denom = (t_u - t_l).days
    w_l = (t_u - target).days / denom
    return w_l, 1.0 - w_l


def constant_maturity_increment(incr_lower: float, incr_upper: float,
                                t_l: date, t_u: date, t: date, tau: int) -> float:
    """Linear interpolation of two fixed-maturity increments to maturity ``tau``.

    The weights collapse to (1, 0) when t + tau hits the lower maturity and
    (0, 1) at the upper one; outside the bracket is an error.
    """
    w_l, w_u = constant_maturity_weights(t_l, t_u, t, tau)
    return w_l * incr_lower + w_u * incr_upper


def _expiry_increment(label: str, prev: ContractPanel, cur: ContractPanel):
    """One monitoring period's P&L on a freshly incepted swap at a fixed expiry."""
    if label in _SPEC_ORDER:
        order = _SPEC_ORDER[label]
        spec = make_swap(label, x0=prev.x1, x20=prev.x2, x30=prev.x3)
        s_prev = state_from_panel(prev, order)
        s_cur = state_from_panel(cur, order)
        inc = incremental_pnl(spec, s_prev.values, s_cur.values - s_prev.values,
                              s_cur.sigma - s_prev.sigma)
        value, realised, implied = inc.value, inc.realised_part, inc.implied_part
        if label in _STANDARDISED:
            n = _STANDARDISED[label]
            scale = standardise_moment_pnl(1.0, prev.x1, prev.x2, n)
            value, realised, implied = value * scale, realised * scale, implied * scale
        return value, realised, implied

    x_hat = math.log(cur.forward) - math.log(prev.forward)
    if label == "rv":
        realised = x_hat * x_hat
        implied = cur.conv_var_rate - prev.conv_var_rate
    elif label == "lv":
        realised = 2.0 * (math.expm1(x_hat) - x_hat)
        implied = cur.conv_var_rate - prev.conv_var_rate
    elif label == "psi":
        realised = float(neuberger_skew_payoff(x_hat, cur.v_eta - prev.v_eta))
        implied = 3.0 * ((cur.v_eta - cur.conv_var_rate)
                         - (prev.v_eta - prev.conv_var_rate))
    else:
        raise MomentSwapsError(f"unknown series spec {label!r}")
    return realised + implied, realised, implied


def rate_level(label: str, panel: ContractPanel) -> float:
    """Fresh-inception swap rate at one (date, expiry); the level method (b) interpolates."""
    if label == "variance":
        return panel.implied_variance
    if label == "third":
        return panel.third_central
    if label == "fourth":
        return panel.fourth_central
    if label == "skew":
        return standardise_moment_pnl(panel.third_central, panel.x1, panel.x2, 3)
    if label == "kurtosis":
        return standardise_moment_pnl(panel.fourth_central, panel.x1, panel.x2, 4)
    if label in ("rv", "lv"):
        return panel.conv_var_rate
    if label == "psi":
        return 3.0 * (panel.v_eta - panel.conv_var_rate)
    raise MomentSwapsError(f"unknown series spec {label!r}")


def _bracket(expiries, target: date):
    lower = max((e for e in expiries if e <= target), default=None)
    upper = min((e for e in expiries if e >= target), default=None)
    return lower, upper


def _cm_rate_level(label: str, panels: Mapping[date, ContractPanel],
                   t: date, tau: int) -> float:
    target = t + timedelta(days=tau)
    t_l, t_u = _bracket(panels.keys(), target)
    if t_l is None or t_u is None:
        raise BracketingError(f"no maturities bracketing {target} on {t}")
    if t_l == t_u:
        return rate_level(label, panels[t_l])
    w_l, w_u = constant_maturity_weights(t_l, t_u, t, tau)
    return w_l * rate_level(label, panels[t_l]) + w_u * rate_level(label, panels[t_u])


def build_pnl_series(panel_store: Mapping[date, Mapping[date, ContractPanel]],
                     spec: str, partition: MonitoringPartition,
                     tau: int = 30, method: str = "c") -> PnlSeries:
    """Assemble the constant-maturity P&L series for one spec and partition.

    Extrapolation is never attempted: intervals without a bracketing pair of
    traded maturities are recorded as gaps and the series continues after them.
    """
    if spec not in SERIES_SPECS:
        raise MomentSwapsError(f"spec must be one of {SERIES_SPECS}, got {spec!r}")
    if method not in ("a", "b", "c"):
        raise MomentSwapsError(f"method must be 'a', 'b' or 'c', got {method!r}")

    dates, values, realised, implied, legs, gaps = [], [], [], [], [], []
    held_expiry: date | None = None
    for t_prev, t in zip(partition.dates, partition.dates[1:]):
        if t_prev not in panel_store or t not in panel_store:
            gaps.append(f"{t}: no panel data for the interval [{t_prev}, {t}]")
            continue
        prev_panels, cur_panels = panel_store[t_prev], panel_store[t]
        common = sorted(set(prev_panels) & set(cur_panels))
        target = t + timedelta(days=tau)

        if method == "a":
            if held_expiry is None or held_expiry not in common or held_expiry <= t:
                candidates = [e for e in common if e >= t_prev + timedelta(days=tau)]
                if not candidates:
                    gaps.append(f"{t}: no expiry at or beyond the {tau}-day horizon")
                    held_expiry = None
                    continue
                held_expiry = candidates[0]
            v, r, i = _expiry_increment(spec, prev_panels[held_expiry],
                                        cur_panels[held_expiry])
            leg = Leg(held_expiry, held_expiry, 1.0, 0.0, v, 0.0)
        else:
            t_l, t_u = _bracket(common, target)
            if t_l is None or t_u is None:
                gaps.append(f"{t}: no traded maturities bracketing {target}")
                continue
            v_l, r_l, i_l = _expiry_increment(spec, prev_panels[t_l], cur_panels[t_l])
            if t_l == t_u:
                w_l, w_u = 1.0, 0.0
                v_u = r_u = i_u = 0.0
            else:
                w_l, w_u = constant_maturity_weights(t_l, t_u, t, tau)
                v_u, r_u, i_u = _expiry_increment(spec, prev_panels[t_u], cur_panels[t_u])
            r = w_l * r_l + w_u * r_u
            if method == "c":
                v = w_l * v_l + w_u * v_u
                i = w_l * i_l + w_u * i_u
            else:  # method (b): difference of level-interpolated swap rates
                try:
                    i = (_cm_rate_level(spec, cur_panels, t, tau)
                         - _cm_rate_level(spec, prev_panels, t_prev, tau))
                except BracketingError as exc:
                    gaps.append(f"{t}: {exc}")
                    continue
                v = r + i
            leg = Leg(t_l, t_u, w_l, w_u, v_l, v_u)

        dates.append(t)
        values.append(v)
        realised.append(r)
        implied.append(i)
        legs.append(leg)

    for message in gaps:
        log.warning("series %s/%s gap: %s", spec, partition.frequency, message)
    return PnlSeries(
        label=spec, tau_days=tau, frequency=partition.frequency,
        dates=tuple(dates),
        increments=np.asarray(values, dtype=float),
        realised=np.asarray(realised, dtype=float),
        implied=np.asarray(implied, dtype=float),
        legs=tuple(legs), gaps=tuple(gaps),
    )
