"""Discretisation-invariant swap algebra: specs, rates, incremental P&L,
hedge coefficients, and the competing realised characteristics.

A swap spec is a pair (alpha, Omega) over a state vector of contract prices.
The fair rate is tr(Omega (Sigma - x x')) with Sigma the implied second-moment
matrix of the terminal state, and the one-period P&L is
alpha' xhat + tr(Omega (Sigmahat - 2 x_prev xhat')); its split into a realised
part alpha' xhat + tr(Omega xhat xhat') and an implied remainder is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .contracts import ContractPanel
from .errors import MomentSwapsError, NonPositiveImpliedVarianceError

POWER_STATE_NAMES = ("X", "X2", "X3", "X4", "X5", "X6")


@dataclass(frozen=True)
class StateVector:
    """Contract prices x_t with, when available, Sigma_t = E_t[x_T x_T']."""

    names: tuple[str, ...]
    values: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.names) != len(self.values):
            raise MomentSwapsError("state names and values disagree in length")
        if self.sigma is not None:
            sig = np.asarray(self.sigma, dtype=float)
            if sig.shape != (len(self.values), len(self.values)):
                raise MomentSwapsError(f"sigma shape {sig.shape} does not match state")
            if not np.allclose(sig, sig.T, rtol=0.0, atol=1e-12 * (1 + np.abs(sig).max())):
                raise MomentSwapsError("sigma must be symmetric")
            object.__setattr__(self, "sigma", sig)


@dataclass(frozen=True)
class SwapSpec:
    """A DI payoff: linear weights alpha and symmetric quadratic weights omega."""

    label: str
    state: tuple[str, ...]
    alpha: np.ndarray
    omega: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        n = len(self.state)
        if alpha.shape != (n,) or omega.shape != (n, n) or x0.shape != (n,):
            raise MomentSwapsError("spec dimensions do not match the state")
        if not np.allclose(omega, omega.T, rtol=0.0, atol=1e-12 * (1 + np.abs(omega).max())):
            raise MomentSwapsError("omega must be symmetric")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "x0", x0)

    @property
    def dim(self) -> int:
        return len(self.state)

    def payoff(self, x_hat: np.ndarray) -> float:
        """phi(xhat) = alpha' xhat + xhat' Omega xhat."""
        x_hat = np.asarray(x_hat, dtype=float)
        return float(self.alpha @ x_hat + x_hat @ self.omega @ x_hat)


@dataclass(frozen=True)
class PnlIncrement:
    value: float
    realised_part: float
    implied_part: float
    stamp: date | None = None

    def __post_init__(self):
        if not math.isclose(self.value, self.realised_part + self.implied_part,
                            rel_tol=1e-9, abs_tol=1e-12):
            raise MomentSwapsError("increment does not split into realised + implied")


def make_variance_swap(x0: float) -> SwapSpec:
    """State [X], Omega = [1]: pays squared log-contract price changes."""
    return SwapSpec("variance", ("X",), np.zeros(1), np.ones((1, 1)),
                    np.array([x0], dtype=float))


def make_third_moment_swap(x0: float, x20: float = 0.0) -> SwapSpec:
    """State [X, X2]; rate is the third central moment of the terminal log price."""
    omega = np.array([[-2.0 * x0, 0.5], [0.5, 0.0]])
    return SwapSpec("third", ("X", "X2"), np.zeros(2), omega,
                    np.array([x0, x20], dtype=float))


def make_fourth_moment_swap(x0: float, x20: float = 0.0, x30: float = 0.0) -> SwapSpec:
    """State [X, X2, X3]; rate is the fourth central moment of the terminal log price."""
    omega = np.array([
        [3.0 * x0 ** 2, -1.5 * x0, 0.5],
        [-1.5 * x0, 0.0, 0.0],
        [0.5, 0.0, 0.0],
    ])
    return SwapSpec("fourth", ("X", "X2", "X3"), np.zeros(3), omega,
                    np.array([x0, x20, x30], dtype=float))


def swap_rate(spec: SwapSpec, state: StateVector) -> float:
    """Model-free fair rate tr(Omega (Sigma - x x')); the linear leg prices at zero."""
    if state.sigma is None:
        raise MomentSwapsError("swap_rate needs the state's Sigma matrix")
    if len(state.values) != spec.dim:
        raise MomentSwapsError("state dimension does not match the spec")
    x = state.values
    return float(np.trace(spec.omega @ (state.sigma - np.outer(x, x))))


def incremental_pnl(spec: SwapSpec, x_prev, x_hat, sigma_hat,
                    stamp: date | None = None) -> PnlIncrement:
    """One monitoring period's mark-to-market P&L and its realised/implied split."""
    x_prev = np.asarray(x_prev, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    n = spec.dim
    if x_prev.shape != (n,) or x_hat.shape != (n,) or sigma_hat.shape != (n, n):
        raise MomentSwapsError("increment dimensions do not match the spec")
    value = float(spec.alpha @ x_hat
                  + np.trace(spec.omega @ (sigma_hat - 2.0 * np.outer(x_prev, x_hat))))
    realised = spec.payoff(x_hat)
    return PnlIncrement(value=value, realised_part=realised,
                        implied_part=value - realised, stamp=stamp)


def hedge_coefficients(spec: SwapSpec, x_prev) -> np.ndarray:
    """Holdings h such that the period P&L is Xhat^(n+1) - sum_i h_i Xhat^(i).

    Valid for specs on power log contract states whose Sigma increments are the
    higher-order contracts: collecting tr(Omega Sigmahat) by contract order and
    subtracting the dynamic leg 2 (Omega x_prev) gives the holdings directly.
    The top-order coefficient must be one for the decomposition to exist.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    n = spec.dim
    by_order = np.zeros(2 * n + 1)
    for i in range(n):
        for j in range(n):
            by_order[i + 1 + j + 1] += spec.omega[i, j]
    top = n + 1
    if not math.isclose(by_order[top], 1.0, rel_tol=1e-12):
        raise MomentSwapsError(
            f"spec {spec.label!r} has no unit-coefficient order-{top} hedge decomposition")
    if np.any(np.abs(by_order[top + 1:]) > 1e-12):
        raise MomentSwapsError("spec involves contracts beyond the hedgeable order")
    dynamic = 2.0 * spec.omega @ x_prev
    h = np.zeros(n)
    for order in range(1, n + 1):
        h[order - 1] = dynamic[order - 1] - by_order[order]
    return h


def standardise_moment_pnl(pnl: float, x0: float, x20: float, n: int) -> float:
    """Scale an n-th moment P&L by implied variance^{-n/2} (n in {3, 4})."""
    if n not in (3, 4):
        raise MomentSwapsError(f"standardisation defined for n in {{3, 4}}, got {n}")
    implied_var = x20 - x0 * x0
    if implied_var <= 0.0:
        raise NonPositiveImpliedVarianceError(
            f"implied variance {implied_var} must be positive")
    return pnl * implied_var ** (-n / 2.0)


def realised_variance(log_return_increments) -> float:
    """Sum of squared log price increments."""
    x = np.asarray(log_return_increments, dtype=float)
    return float(np.sum(x * x))


def log_variance(log_return_increments) -> float:
    """Sum of 2(e^x - 1 - x) over increments; every term is non-negative."""
    x = np.asarray(log_return_increments, dtype=float)
    return float(np.sum(2.0 * (np.expm1(x) - x)))


def _cubic_kernel(x):
    """6(x e^x - 2 e^x + x + 2), stable for small x via its power series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    # coefficients (n-2)/n! for n = 3..7
    series = xs ** 3 * (1.0 / 6.0 + xs * (1.0 / 12.0 + xs * (1.0 / 40.0 + xs * (
        1.0 / 180.0 + xs / 1008.0))))
    direct = (x - 2.0) * np.expm1(x) + 2.0 * x
    return 6.0 * np.where(small, series, direct)


def neuberger_skew_payoff(x_hat, v_eta_hat) -> float:
    """3 vhat (e^xhat - 1) plus the cubic kernel of the log increment."""
    x_hat = np.asarray(x_hat, dtype=float)
    v_eta_hat = np.asarray(v_eta_hat, dtype=float)
    out = 3.0 * v_eta_hat * np.expm1(x_hat) + _cubic_kernel(x_hat)
    return float(out) if out.ndim == 0 else out


def erp_estimator(x_terminal: float, log_contract_price: float) -> float:
    """Realisation of the expectation risk premium: x_T minus the log contract."""
    return x_terminal - log_contract_price


def make_swap(label: str, x0: float, x20: float = 0.0, x30: float = 0.0) -> SwapSpec:
    if label == "variance":
        return make_variance_swap(x0)
    if label in ("third", "skew"):
        return make_third_moment_swap(x0, x20)
    if label in ("fourth", "kurtosis"):
        return make_fourth_moment_swap(x0, x20, x30)
    raise MomentSwapsError(f"unknown swap label {label!r}")


def state_from_panel(panel: ContractPanel, order: int) -> StateVector:
    """State [X^(1)..X^(order)] with the power-contract Sigma proxy.

    Terminal power contracts collapse to powers of the terminal log price, so
    E_t[X^(a)_T X^(b)_T] = X^(a+b)_t and Sigma is observable from the panel.
    """
    if not 1 <= order <= 3:
        raise MomentSwapsError(f"panel states support orders 1..3, got {order}")
    values = np.array([panel.power(p) for p in range(1, order + 1)])
    sigma = np.array([[panel.power(a + b)
                       for b in range(1, order + 1)]
                      for a in range(1, order + 1)])
    return StateVector(POWER_STATE_NAMES[:order], values, sigma)


def power_sigma(panel: ContractPanel, order: int) -> np.ndarray:
    return state_from_panel(panel, order).sigma
