"""Arbitrage-free smoothing of OTM curves onto a dense equally spaced strike grid.

The fit runs in three stages per maturity:

1. a penalised least-squares fit of call prices at the observed strikes under
   discrete convexity, monotonicity and price bounds (quadratic programme);
2. implied vols at the fitted knots, interpolated across strikes with a shape
   respecting monotone cubic, held flat beyond the outermost knots, and
   re-priced on the dense grid;
3. an exactification pass that extracts the discrete risk-neutral density
   implied by the grid, clips it to be non-negative, restores unit mass and the
   forward mean, and rebuilds prices by summation, so butterflies are
   non-negative sums of non-negative terms and parity holds to rounding.

Across maturities, normalised call prices at common forward moneyness are
lifted to be non-decreasing in expiry (the pointwise max of convex curves is
convex, so the lift cannot break stage 3's guarantees).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date

import cvxpy as cp
import numpy as np
from scipy.interpolate import PchipInterpolator

from . import black
from .errors import InvalidGridError, SurfaceFitError
from .quotes import RawOtmCurve

log = logging.getLogger(__name__)

GRID_POINTS = 2000
SIGMA_RANGE = 6.0
NO_ARB_TOL = 1e-10
#: curvature penalty in forward-normalised units; the shape constraints do the
#: heavy lifting, this only damps density wiggles between knots
DEFAULT_SMOOTHING = 1e-8


@dataclass(frozen=True)
class StrikeGrid:
    """One maturity's smoothed OTM prices on an equally spaced strike grid."""

    trade_date: date
    expiry: date
    forward: float
    strikes: np.ndarray
    otm_prices: np.ndarray
    avg_implied_vol: float

    @property
    def tau(self) -> float:
        return (self.expiry - self.trade_date).days / 365.0

    def call_prices(self) -> np.ndarray:
        """OTM prices mapped to calls via parity (mids are forward prices)."""
        return self.otm_prices + np.maximum(self.forward - self.strikes, 0.0)

    def put_prices(self) -> np.ndarray:
        return self.otm_prices + np.maximum(self.strikes - self.forward, 0.0)

    def butterflies(self) -> np.ndarray:
        """Second differences of the call curve; >= 0 in the absence of arbitrage."""
        c = self.call_prices()
        return c[:-2] - 2.0 * c[1:-1] + c[2:]

    def density(self) -> np.ndarray:
        """Implied probability mass at each interior grid node."""
        return self.butterflies() / (self.strikes[1] - self.strikes[0])

    def price_at(self, k) -> np.ndarray:
        """OTM price at arbitrary strikes.

        Interpolates the call curve, which is piecewise linear in the grid's
        discrete-density representation, then maps back through parity; the
        OTM curve itself has a kink at the forward and must not be
        interpolated directly.
        """
        k = np.asarray(k, dtype=float)
        calls = np.interp(k, self.strikes, self.call_prices())
        return calls - np.maximum(self.forward - k, 0.0)

    def validate(self, tol: float = NO_ARB_TOL) -> None:
        k = self.strikes
        dk = np.diff(k)
        if np.any(dk <= 0.0):
            raise InvalidGridError("strikes not strictly increasing")
        if not np.allclose(dk, dk[0], rtol=1e-9, atol=0.0):
            raise InvalidGridError("strikes not equally spaced")
        if np.any(self.otm_prices < -tol):
            raise InvalidGridError(f"negative OTM price {self.otm_prices.min()}")
        b = self.butterflies()
        if b.size and b.min() < -tol:
            j = int(np.argmin(b))
            raise InvalidGridError(f"butterfly {b.min():.3e} at strike {k[j + 1]:.6g}")
        edge_tol = max(1e-6 * self.forward, tol)
        if self.otm_prices[0] > edge_tol or self.otm_prices[-1] > edge_tol:
            raise InvalidGridError("OTM prices do not vanish at the grid edges")


@dataclass(frozen=True)
class ArbitrageReport:
    min_butterfly: float
    min_calendar_spread: float | None
    butterfly_violations: int
    calendar_violations: int
    violations: tuple[str, ...]
    calendar_checked: bool

    @property
    def clean(self) -> bool:
        return not self.violations


def _fit_knot_calls(curve: RawOtmCurve, smoothing: float) -> np.ndarray:
    """Constrained penalised LSQ for call prices at the observed strikes.

    Solved in forward-normalised units (moneyness, call/forward) so the
    smoothing weight is independent of the underlying's price scale.  The
    convexity constraint is the real regulariser; the roughness penalty only
    damps density wiggles between knots.
    """
    k = np.asarray(curve.strikes, dtype=float)
    f = curve.forward
    m = k / f
    y = (np.asarray(curve.prices, dtype=float) + np.maximum(f - k, 0.0)) / f
    n = len(k)
    h = np.diff(m)

    # already arbitrage-consistent inputs are their own projection; skipping
    # the solver keeps exact curves exact
    y_slopes = np.diff(y) / h
    if (np.all(np.diff(y_slopes) >= 0.0) and np.all(y_slopes <= 0.0)
            and np.all(y_slopes >= -1.0) and np.all(y >= np.maximum(1.0 - m, 0.0))
            and np.all(y <= 1.0)):
        return y * f

    g = cp.Variable(n)
    slopes = cp.multiply(g[1:] - g[:-1], 1.0 / h)
    curv = slopes[1:] - slopes[:-1]
    # penalise changes in curvature (density wiggles), not its level, so the
    # fit is not biased toward lower option prices
    objective = cp.Minimize(cp.sum_squares(g - y)
                            + smoothing * cp.sum_squares(curv[1:] - curv[:-1]))
    constraints = [
        curv >= 0.0,
        slopes <= 0.0,
        slopes >= -1.0,
        g >= np.maximum(1.0 - m, 0.0),
        g <= 1.0,
    ]
    problem = cp.Problem(objective, constraints)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise SurfaceFitError(f"QP solver failed: {exc}") from exc
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise SurfaceFitError(
            f"convexity/monotonicity constraint system infeasible ({problem.status})")
    fitted = np.asarray(g.value, dtype=float) * f
    # the solver honours constraints only to its tolerance; snap to the bounds
    fitted = np.minimum(np.maximum(fitted, np.maximum(f - k, 0.0)), f)
    return fitted


def _knot_vols(curve: RawOtmCurve, knot_calls: np.ndarray) -> np.ndarray:
    k = np.asarray(curve.strikes, dtype=float)
    f = curve.forward
    vols = np.empty(len(k))
    for i, (ki, ci) in enumerate(zip(k, knot_calls)):
        if ki < f:
            price, side = ci - (f - ki), "put"
        else:
            price, side = ci, "call"
        try:
            vols[i] = black.implied_vol(max(price, 0.0), f, ki, curve.tau, side)
        except ValueError as exc:
            raise SurfaceFitError(f"no implied vol at strike {ki}: {exc}") from exc
    return vols


def _grid_from_vols(curve, knot_vols, n_points, sigma_range):
    """Dense OTM prices: interpolated vols inside the knots, flat vol outside."""
    k_obs = np.asarray(curve.strikes, dtype=float)
    f, tau = curve.forward, curve.tau
    avg_vol = float(np.mean(knot_vols))
    half_width = sigma_range * avg_vol * np.sqrt(tau)
    grid = np.linspace(f * np.exp(-half_width), f * np.exp(half_width), n_points)

    if len(k_obs) >= 2:
        interp = PchipInterpolator(k_obs, knot_vols, extrapolate=False)
        vols = interp(grid)
    else:
        vols = np.full(n_points, np.nan)
    vols = np.where(grid <= k_obs[0], knot_vols[0], vols)
    vols = np.where(grid >= k_obs[-1], knot_vols[-1], vols)
    vols = np.maximum(vols, black.MIN_VOL)
    prices = black.otm_price(f, grid, vols, tau)
    return grid, prices, avg_vol


def _match_mean(w: np.ndarray, k: np.ndarray, forward: float) -> None:
    """Shift mass into the far boundary node until the density mean is the forward.

    Donors are consumed from the opposite end inward, so the transfer is always
    feasible while the forward lies inside the strike hull; the mass moved is
    tiny when the input curve was already nearly consistent.
    """
    mean_gap = forward - float(np.dot(w, k))
    tol = 1e-13 * max(forward, 1.0)
    if abs(mean_gap) <= tol:
        return
    if mean_gap > 0.0:
        receiver, donors = len(k) - 1, range(len(k) - 1)
    else:
        receiver, donors = 0, range(len(k) - 1, 0, -1)
    for i in donors:
        if w[i] <= 0.0:
            continue
        lever = k[receiver] - k[i]
        if lever == 0.0:
            continue
        t = min(mean_gap / lever, w[i])  # same sign as lever, so always >= 0
        w[i] -= t
        w[receiver] += t
        mean_gap -= t * lever
        if abs(mean_gap) <= tol:
            return
    raise SurfaceFitError(
        "density projection infeasible: forward outside the reachable strike hull")


def _pool_adjacent_violators(values: np.ndarray) -> np.ndarray:
    """Least-squares non-decreasing fit; the identity on already sorted input.

    Pooling preserves block means, so the sum of the values (and hence the
    total price change across the grid) is invariant.
    """
    vals: list[float] = []
    counts: list[int] = []
    for v in values:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    return np.repeat(vals, counts)


def _exactify(strikes: np.ndarray, otm: np.ndarray, forward: float):
    """Project grid prices onto an exactly consistent discrete density.

    Call-curve slopes are made non-decreasing (isotonic projection, a no-op
    when the interpolation stage already produced a convex curve) and clamped
    to the [-1, 0] no-arbitrage band; the implied node masses are then rescaled
    to unit total with the mean restored to the forward.  Rebuilding prices
    from the density makes butterflies sums of non-negative terms and parity,
    price positivity and vanishing edge prices exact identities.
    """
    k = strikes
    dk = k[1] - k[0]
    if not (k[0] <= forward <= k[-1]):
        raise SurfaceFitError("forward outside the strike grid")
    calls = otm + np.maximum(forward - k, 0.0)
    slopes = np.diff(calls) / dk
    if np.any(np.diff(slopes) < 0.0):
        slopes = _pool_adjacent_violators(slopes)
    slopes = np.clip(slopes, -1.0, 0.0)

    # 1 + C'(k) is the implied CDF: interior masses are slope changes, the
    # boundary nodes absorb the tail mass beyond the grid
    w = np.empty_like(k)
    w[1:-1] = np.diff(slopes)
    w[0] = 1.0 + slopes[0]
    w[-1] = -slopes[-1]
    total = float(np.sum(w))
    if total <= 0.0:
        raise SurfaceFitError("flat call curve carries no probability mass")
    w /= total
    _match_mean(w, k, forward)

    # exact rebuild: P(k_i) = sum_j w_j (k_i - k_j)^+, C(k_i) = sum_j w_j (k_j - k_i)^+
    weighted_k = w * k
    cum_w = np.cumsum(w)
    cum_wk = np.cumsum(weighted_k)
    puts = k * np.concatenate(([0.0], cum_w[:-1])) - np.concatenate(([0.0], cum_wk[:-1]))
    suf_w = cum_w[-1] - cum_w
    suf_wk = cum_wk[-1] - cum_wk
    calls_rebuilt = suf_wk - k * suf_w
    out = np.where(k < forward, puts, calls_rebuilt)
    return np.maximum(out, 0.0)


def _lift_calendar(grid: StrikeGrid, prev: StrikeGrid) -> StrikeGrid:
    """Raise normalised calls to at least the previous maturity's at common moneyness."""
    m = grid.strikes / grid.forward
    m_prev = prev.strikes / prev.forward
    c_prev = np.interp(m, m_prev, prev.call_prices() / prev.forward,
                       left=None, right=None)
    inside = (m >= m_prev[0]) & (m <= m_prev[-1])
    calls = grid.call_prices()
    floor = np.where(inside, c_prev * grid.forward, 0.0)
    if np.all(calls >= floor - 1e-16 * grid.forward):
        return grid
    lifted = np.maximum(calls, floor)
    otm = lifted - np.maximum(grid.forward - grid.strikes, 0.0)
    otm = _exactify(grid.strikes, otm, grid.forward)
    return StrikeGrid(grid.trade_date, grid.expiry, grid.forward,
                      grid.strikes, otm, grid.avg_implied_vol)


def fit_surface(
    curves: list[RawOtmCurve],
    n_points: int = GRID_POINTS,
    sigma_range: float = SIGMA_RANGE,
    smoothing: float = DEFAULT_SMOOTHING,
    calendar: bool = True,
) -> list[StrikeGrid]:
    """Fit every maturity of one trade date and enforce calendar monotonicity.

    Returns one StrikeGrid per input curve, sorted by expiry.  Raises
    SurfaceFitError naming the constraint when a fit is infeasible.
    """
    if not curves:
        raise SurfaceFitError("no curves supplied")
    grids: list[StrikeGrid] = []
    for curve in sorted(curves, key=lambda c: c.expiry):
        knot_calls = _fit_knot_calls(curve, smoothing)
        vols = _knot_vols(curve, knot_calls)
        strikes, otm, avg_vol = _grid_from_vols(curve, vols, n_points, sigma_range)
        otm = _exactify(strikes, otm, curve.forward)
        grid = StrikeGrid(curve.trade_date, curve.expiry, curve.forward,
                          strikes, otm, avg_vol)
        if calendar and grids:
            grid = _lift_calendar(grid, grids[-1])
        grid.validate()
        grids.append(grid)
    return grids


def check_static_arbitrage(grids: list[StrikeGrid], tol: float = NO_ARB_TOL) -> ArbitrageReport:
    """Report butterfly and calendar violations beyond ``tol`` across grids.

    Butterflies are checked on parity-implied call prices per grid; calendar
    spreads compare normalised calls of adjacent maturities (same trade date)
    at the longer maturity's moneyness nodes inside the overlap.
    """
    violations: list[str] = []
    min_butterfly = np.inf
    n_butterfly = 0
    for g in grids:
        b = g.butterflies()
        if not b.size:
            continue
        min_butterfly = min(min_butterfly, float(b.min()))
        bad = np.flatnonzero(b < -tol)
        n_butterfly += len(bad)
        for j in bad[:5]:
            violations.append(
                f"butterfly {b[j]:.3e} at {g.trade_date} {g.expiry} strike "
                f"{g.strikes[j + 1]:.6g}")

    by_date: dict[date, list[StrikeGrid]] = {}
    for g in grids:
        by_date.setdefault(g.trade_date, []).append(g)
    min_calendar = np.inf
    n_calendar = 0
    checked = False
    for d, group in sorted(by_date.items()):
        group = sorted(group, key=lambda g: g.expiry)
        for short, long in zip(group, group[1:]):
            checked = True
            m_long = long.strikes / long.forward
            m_short = short.strikes / short.forward
            inside = (m_long >= m_short[0]) & (m_long <= m_short[-1])
            if not np.any(inside):
                continue
            c_short = np.interp(m_long[inside], m_short,
                                short.call_prices() / short.forward)
            spread = long.call_prices()[inside] / long.forward - c_short
            min_calendar = min(min_calendar, float(spread.min()))
            bad = np.flatnonzero(spread < -tol)
            n_calendar += len(bad)
            if len(bad):
                violations.append(
                    f"calendar spread {spread.min():.3e} between {short.expiry} "
                    f"and {long.expiry} on {d}")
    return ArbitrageReport(
        min_butterfly=float(min_butterfly) if np.isfinite(min_butterfly) else 0.0,
        min_calendar_spread=float(min_calendar) if checked and np.isfinite(min_calendar) else None,
        butterfly_violations=n_butterfly,
        calendar_violations=n_calendar,
        violations=tuple(violations),
        calendar_checked=checked,
    )


def grid_from_flat_vol(trade_date, expiry, forward, vol,
                       n_points: int = GRID_POINTS,
                       sigma_range: float = SIGMA_RANGE) -> StrikeGrid:
    """Closed-form flat-vol grid, used as a fixture and simulation bridge."""
    tau = (expiry - trade_date).days / 365.0
    half_width = sigma_range * vol * np.sqrt(tau)
    strikes = np.linspace(forward * np.exp(-half_width),
                          forward * np.exp(half_width), n_points)
    prices = black.otm_price(forward, strikes, vol, tau)
    return StrikeGrid(trade_date, expiry, float(forward), strikes,
                      np.asarray(prices, dtype=float), float(vol))
