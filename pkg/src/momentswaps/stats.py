"""Sample moments, iid horizon scaling, correlations, standardisation and the
five-factor OLS regression with restricted-model F-tests."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import CollinearDesignError, MomentSwapsError

FACTOR_NAMES = ("ER", "size", "growth", "momentum")
RESTRICTED_ZERO = ("size", "growth", "momentum")

CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class MomentSummary:
    n: int
    mean: float
    stdev: float | None = None
    skewness: float | None = None
    excess_kurtosis: float | None = None


def sample_moments(series, bias_corrected: bool = False) -> MomentSummary:
    """Mean, stdev, skewness and excess kurtosis of a sample.

    Moments that need more observations than supplied, or a non-degenerate
    spread, come back as None.  The default estimators are the population-style
    normalised central moments used in descriptive tables; ``bias_corrected``
    switches to the adjusted Fisher-Pearson forms.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 1:
        raise MomentSwapsError("sample_moments needs at least one observation")
    mean = float(np.mean(x))
    if n < 2:
        return MomentSummary(n=n, mean=mean)
    d = x - mean
    m2 = float(np.mean(d * d))
    stdev = math.sqrt(m2 * n / (n - 1)) if bias_corrected else math.sqrt(m2)
    if m2 <= 0.0:
        return MomentSummary(n=n, mean=mean, stdev=0.0)
    skew = kurt = None
    if n >= 3:
        skew = float(np.mean(d ** 3)) / m2 ** 1.5
        if bias_corrected:
            skew *= math.sqrt(n * (n - 1)) / (n - 2)
    if n >= 4:
        kurt = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
        if bias_corrected:
            kurt = ((n + 1) * kurt + 6.0) * (n - 1) / ((n - 2) * (n - 3))
    return MomentSummary(n=n, mean=mean, stdev=stdev, skewness=skew,
                         excess_kurtosis=kurt)


def iid_scale(summary: MomentSummary, h: float) -> MomentSummary:
    """Predicted moments at horizon h base periods under iid returns.

    Mean scales with h, standard deviation with sqrt(h), skewness with
    1/sqrt(h) and excess kurtosis with 1/h.
    """
    if h < 1:
        raise MomentSwapsError(f"horizon must be >= 1 base period, got {h}")
    root = math.sqrt(h)
    return replace(
        summary,
        mean=summary.mean * h,
        stdev=None if summary.stdev is None else summary.stdev * root,
        skewness=None if summary.skewness is None else summary.skewness / root,
        excess_kurtosis=(None if summary.excess_kurtosis is None
                         else summary.excess_kurtosis / h),
    )


def align_series(series: Mapping[str, Mapping]) -> tuple[list[str], np.ndarray]:
    """Intersect the timestamp sets of named series into a dense matrix."""
    labels = list(series)
    common = None
    for label in labels:
        keys = set(series[label].keys())
        common = keys if common is None else common & keys
    if not common:
        raise MomentSwapsError("series share no timestamps")
    ordered = sorted(common)
    data = np.array([[series[label][t] for t in ordered] for label in labels])
    return labels, data


def correlation_matrix(series: Mapping[str, Mapping]) -> tuple[list[str], np.ndarray, list[tuple[str, str]]]:
    """Pairwise Pearson correlations on the common timestamps.

    Returns (labels, matrix, undefined_pairs); pairs involving a zero-variance
    series are NaN and reported rather than raised.
    """
    labels, data = align_series(series)
    if data.shape[1] < 2:
        raise MomentSwapsError("need at least two overlapping observations")
    sd = data.std(axis=1)
    n = len(labels)
    out = np.eye(n)
    undefined = []
    demeaned = data - data.mean(axis=1, keepdims=True)
    for i in range(n):
        for j in range(i + 1, n):
            if sd[i] == 0.0 or sd[j] == 0.0:
                out[i, j] = out[j, i] = np.nan
                undefined.append((labels[i], labels[j]))
                continue
            rho = float(np.dot(demeaned[i], demeaned[j]) / (len(demeaned[i]) * sd[i] * sd[j]))
            out[i, j] = out[j, i] = rho
    return labels, out, undefined


def standardize(series) -> np.ndarray:
    """Z-score a series; zero variance is an error."""
    x = np.asarray(series, dtype=float)
    sd = float(np.std(x))
    if sd <= 0.0:
        raise MomentSwapsError("cannot standardize a zero-variance series")
    return (x - np.mean(x)) / sd


def lag1_autocorrelation(series) -> tuple[float, float]:
    """Lag-1 autocorrelation and its approximate standard error 1/sqrt(n)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 3:
        raise MomentSwapsError("need at least three observations")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom <= 0.0:
        raise MomentSwapsError("zero-variance series has no autocorrelation")
    rho = float(np.dot(d[:-1], d[1:]) / denom)
    return rho, 1.0 / math.sqrt(n)


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    t_stats: dict[str, float]
    adjusted_r2: float
    r2: float
    f_stat: float | None
    f_pvalue: float | None
    n_obs: int
    restricted: bool
    robust: bool


def _design(factors: Mapping[str, np.ndarray], er_squared_from: str,
            restricted: bool) -> tuple[list[str], np.ndarray]:
    er = np.asarray(factors["ER"], dtype=float)
    er_for_square = standardize(er) if er_squared_from == "standardized" else er
    columns = [("alpha", np.ones_like(er)), ("ER", er), ("ER2", er_for_square ** 2)]
    if not restricted:
        for name in RESTRICTED_ZERO:
            columns.append((name, np.asarray(factors[name], dtype=float)))
    names = [c[0] for c in columns]
    return names, np.column_stack([c[1] for c in columns])


def _ols(x: np.ndarray, y: np.ndarray, names: list[str], robust: bool):
    n, k = x.shape
    scale = np.linalg.norm(x, axis=0)
    scale[scale == 0.0] = 1.0
    cond = np.linalg.cond(x / scale)
    if cond > CONDITION_LIMIT:
        xs = x / scale
        corr = np.abs(np.corrcoef(xs[:, 1:], rowvar=False))
        np.fill_diagonal(corr, 0.0)
        i, j = np.unravel_index(np.argmax(corr), corr.shape)
        raise CollinearDesignError(
            f"design condition number {cond:.3g} exceeds {CONDITION_LIMIT:.0e}; "
            f"most collinear columns: {names[i + 1]}, {names[j + 1]}")
    q, r = np.linalg.qr(x)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - x @ beta
    rss = float(resid @ resid)
    rinv = np.linalg.solve(r, np.eye(k))
    xtx_inv = rinv @ rinv.T
    dof = n - k
    if robust:
        meat = (x * (resid ** 2)[:, None]).T @ x
        cov = xtx_inv @ meat @ xtx_inv
    else:
        cov = xtx_inv * (rss / dof)
    se = np.sqrt(np.diag(cov))
    return beta, se, rss, dof


def ols_factor_regression(y, factors: Mapping[str, Sequence[float]],
                          restricted: bool = False, robust: bool = False,
                          er_squared_from: str = "standardized") -> RegressionResult:
    """Regress a risk-premium series on ER, ER^2 and the style factors.

    The unrestricted fit reports the F statistic for jointly zeroing the size,
    growth and momentum loadings.  ``er_squared_from`` controls whether the
    squared market factor is built from the raw or the standardized ER.
    """
    y = np.asarray(y, dtype=float)
    missing = [f for f in FACTOR_NAMES if f not in factors]
    if missing:
        raise MomentSwapsError(f"missing factors: {missing}")
    lengths = {len(np.asarray(factors[f])) for f in FACTOR_NAMES} | {len(y)}
    if len(lengths) != 1:
        raise MomentSwapsError("y and factors must share timestamps (equal lengths)")

    names, x = _design(factors, er_squared_from, restricted)
    n, k = x.shape
    if n <= k:
        raise MomentSwapsError(f"need more observations ({n}) than parameters ({k})")
    beta, se, rss, dof = _ols(x, y, names, robust)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof

    f_stat = f_pvalue = None
    if not restricted:
        names_r, x_r = _design(factors, er_squared_from, restricted=True)
        _, _, rss_r, _ = _ols(x_r, y, names_r, robust=False)
        q_restrictions = len(RESTRICTED_ZERO)
        f_stat = ((rss_r - rss) / q_restrictions) / (rss / dof)
        f_pvalue = float(sps.f.sf(f_stat, q_restrictions, dof))

    return RegressionResult(
        coefficients=dict(zip(names, beta.tolist())),
        t_stats=dict(zip(names, (beta / se).tolist())),
        adjusted_r2=float(adj), r2=float(r2),
        f_stat=None if f_stat is None else float(f_stat),
        f_pvalue=f_pvalue, n_obs=n, restricted=restricted, robust=robust,
    )


def load_factor_file(path: str | Path) -> dict[date, dict[str, float]]:
    """Read the published daily factor file layout.

    Expects a delimited file whose data rows start with a yyyymmdd date
    followed by Mkt-RF, SMB, HML, MOM and RF columns (header names honoured
    when present); non-data preamble and footer lines are skipped.
    """
    path = Path(path)
    out: dict[date, dict[str, float]] = {}
    header_map = None
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            first = row[0].strip()
            if header_map is None and not first.isdigit():
                lowered = [c.strip().lower() for c in row]
                if "mkt-rf" in lowered:
                    header_map = {
                        "ER": lowered.index("mkt-rf"),
                        "size": lowered.index("smb"),
                        "growth": lowered.index("hml"),
                        "momentum": lowered.index("mom"),
                        "RF": lowered.index("rf"),
                    }
                continue
            if not (len(first) == 8 and first.isdigit()):
                continue
            when = datetime.strptime(first, "%Y%m%d").date()
            if header_map is None:
                header_map = {"ER": 1, "size": 2, "growth": 3, "momentum": 4, "RF": 5}
            try:
                out[when] = {name: float(row[idx]) for name, idx in header_map.items()}
            except (IndexError, ValueError) as exc:
                raise MomentSwapsError(f"{path}: bad factor row for {first}: {exc}") from exc
    if not out:
        raise MomentSwapsError(f"{path}: no factor rows found")
    return out
