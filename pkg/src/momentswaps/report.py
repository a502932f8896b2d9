"""Report stage: deterministic CSV tables and SVG figures from the stores."""

from __future__ import annotations

import csv
from datetime import date
from pathlib import Path

import numpy as np

from . import svgplot
from .stats import (MomentSummary, RegressionResult, correlation_matrix,
                    iid_scale, sample_moments)
from .stores import StoredPnl

_STATS = ("mean", "stdev", "skewness", "excess_kurtosis")


def _cell(value) -> str:
    return "" if value is None else f"{value:.6g}"


def iid_scaling_table(returns: np.ndarray, out: str | Path,
                      horizons: tuple[int, ...] = (5, 20)) -> Path:
    """Observed moments at several horizons next to their iid predictions.

    ``returns`` are base-period (daily) increments; horizon aggregation sums
    consecutive non-overlapping blocks.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    daily = sample_moments(returns)
    rows = []
    for stat in _STATS:
        row = {"statistic": stat, "daily_obs": _cell(getattr(daily, stat))}
        for h in horizons:
            blocks = len(returns) // h
            agg = returns[:blocks * h].reshape(blocks, h).sum(axis=1)
            observed = sample_moments(agg) if blocks >= 2 else None
            predicted = iid_scale(daily, h)
            row[f"h{h}_obs"] = _cell(getattr(observed, stat) if observed else None)
            row[f"h{h}_iid"] = _cell(getattr(predicted, stat))
        rows.append(row)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return out


def correlation_table(pnls: dict[str, StoredPnl], out: str | Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    series = {label: p.by_date() for label, p in pnls.items()}
    labels, matrix, undefined = correlation_matrix(series)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + labels)
        for i, label in enumerate(labels):
            writer.writerow([label] + [f"{matrix[i, j]:.4f}" for j in range(len(labels))])
        for a, b in undefined:
            fh.write(f"# undefined pair: {a}, {b}\n")
    return out


def regression_table(results: dict[str, tuple[RegressionResult, RegressionResult]],
                     out: str | Path) -> Path:
    """One column pair (restricted, unrestricted) per dependent series."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    names = ("alpha", "ER", "ER2", "size", "growth", "momentum")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [""]
        for label in results:
            header += [f"{label} (restricted)", f"{label} (full)"]
        writer.writerow(header)
        for name in names:
            row, trow = [name], [f"t({name})"]
            for restricted, full in results.values():
                for res in (restricted, full):
                    coef = res.coefficients.get(name)
                    tstat = res.t_stats.get(name)
                    row.append("" if coef is None else f"{coef:.4f}")
                    trow.append("" if tstat is None else f"({tstat:.2f})")
            writer.writerow(row)
            writer.writerow(trow)
        row = ["adj_R2"]
        frow = ["F"]
        for restricted, full in results.values():
            row += [f"{restricted.adjusted_r2:.4f}", f"{full.adjusted_r2:.4f}"]
            frow += ["", f"({full.f_stat:.2f})" if full.f_stat is not None else ""]
        writer.writerow(row)
        writer.writerow(frow)
    return out


def _day_numbers(dates: tuple[date, ...]) -> list[float]:
    base = dates[0].toordinal() if dates else 0
    return [d.toordinal() - base for d in dates]


def cumulative_chart(pnls: dict[str, StoredPnl], out: str | Path, title: str) -> Path:
    series = []
    for label, p in pnls.items():
        series.append((label, _day_numbers(p.dates),
                       np.cumsum(p.increments).tolist()))
    return svgplot.line_chart(out, series, title, y_label="cumulative P&L")


def increments_chart(pnls: dict[str, StoredPnl], out: str | Path, title: str) -> Path:
    series = []
    for label, p in pnls.items():
        series.append((label, _day_numbers(p.dates), p.increments.tolist()))
    return svgplot.line_chart(out, series, title, y_label="increment")
