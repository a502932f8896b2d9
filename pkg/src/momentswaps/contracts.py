"""Replication of power log contracts, the entropy-variance contract and the
conventional variance swap rate from a strike grid.

A claim paying H(F_T) with H twice differentiable is worth
H(F) + integral of H''(k) q(k) dk when q(k) is the OTM forward option price.
For H = (ln k)^p the weight is the second strike derivative implemented in
``gamma_weight``; the integral is discretised exactly as the grid sum
sum_{j>=2} w(k_j) q(k_j) (k_j - k_{j-1}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import InvalidGridError, UnsupportedOrderError
from .surface import StrikeGrid

#: public replication orders; 5 and 6 exist only to assemble second-moment
#: matrices for fourth-moment swaps
MAX_PUBLIC_ORDER = 4
MAX_ORDER = 6

QUADRATURE_RULES = ("grid", "trapezoid")


def _gamma(p: int, k: np.ndarray) -> np.ndarray:
    """d^2 (ln k)^p / dk^2 for any order p >= 1."""
    k = np.asarray(k, dtype=float)
    if p == 1:
        return -1.0 / (k * k)
    lk = np.log(k)
    return p * lk ** (p - 2) * (p - 1.0 - lk) / (k * k)


def gamma_weight(p: int, k):
    """Replication weight of the p-th power log contract at strike k.

    p = 1 gives -k^{-2}; higher orders give p (ln k)^{p-2} k^{-2} (p - 1 - ln k).
    """
    if not 1 <= p <= MAX_PUBLIC_ORDER:
        raise UnsupportedOrderError(f"order must be in 1..{MAX_PUBLIC_ORDER}, got {p}")
    out = _gamma(p, np.asarray(k, dtype=float))
    return float(out) if np.isscalar(k) else out


def _replicate(grid: StrikeGrid, weights: np.ndarray, rule: str) -> float:
    q = grid.otm_prices
    dk = np.diff(grid.strikes)
    f = weights * q
    if rule == "grid":
        return float(np.dot(f[1:], dk))
    if rule == "trapezoid":
        return float(np.dot(0.5 * (f[1:] + f[:-1]), dk))
    raise ValueError(f"unknown quadrature rule {rule!r}")


def price_power_log_contract(grid: StrikeGrid, p: int, rule: str = "grid") -> float:
    """Fair value of the claim paying (ln F_T)^p, replicated from the grid."""
    if not 1 <= p <= MAX_PUBLIC_ORDER:
        raise UnsupportedOrderError(f"order must be in 1..{MAX_PUBLIC_ORDER}, got {p}")
    return _power_log(grid, p, rule)


def _power_log(grid: StrikeGrid, p: int, rule: str = "grid") -> float:
    grid.validate()
    x = math.log(grid.forward)
    return x ** p + _replicate(grid, _gamma(p, grid.strikes), rule)


def price_entropy_contract(grid: StrikeGrid, rule: str = "grid") -> float:
    """Entropy variance 2 F^{-1} int k^{-1} q(k) dk."""
    grid.validate()
    weights = 2.0 / (grid.forward * grid.strikes)
    return _replicate(grid, weights, rule)


def conventional_variance_rate(grid: StrikeGrid, rule: str = "grid") -> float:
    """The textbook variance swap rate 2 int k^{-2} q(k) dk."""
    grid.validate()
    weights = 2.0 / np.square(grid.strikes)
    return _replicate(grid, weights, rule)


@dataclass(frozen=True)
class ContractPanel:
    """Per (trade date, expiry) contract prices feeding the swap layer.

    x1..x4 are the public power log contracts; x5 and x6 exist so the implied
    second-moment matrix of a fourth-moment swap is observable.
    """

    trade_date: date
    expiry: date
    forward: float
    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    x6: float
    v_eta: float
    conv_var_rate: float

    @property
    def log_forward(self) -> float:
        return math.log(self.forward)

    @property
    def implied_variance(self) -> float:
        return self.x2 - self.x1 ** 2

    @property
    def third_central(self) -> float:
        return self.x3 - 3.0 * self.x1 * self.x2 + 2.0 * self.x1 ** 3

    @property
    def fourth_central(self) -> float:
        return (self.x4 - 4.0 * self.x1 * self.x3
                + 6.0 * self.x1 ** 2 * self.x2 - 3.0 * self.x1 ** 4)

    def power(self, p: int) -> float:
        if not 1 <= p <= MAX_ORDER:
            raise UnsupportedOrderError(f"order must be in 1..{MAX_ORDER}, got {p}")
        return getattr(self, f"x{p}")

    def validate(self, tol: float = 1e-10) -> None:
        if self.implied_variance < -tol:
            raise InvalidGridError(f"implied variance negative: {self.implied_variance}")
        if self.fourth_central < -tol:
            raise InvalidGridError(f"fourth central moment negative: {self.fourth_central}")
        if self.v_eta < -tol:
            raise InvalidGridError(f"entropy variance negative: {self.v_eta}")
        if self.conv_var_rate < -tol:
            raise InvalidGridError(f"conventional rate negative: {self.conv_var_rate}")


def build_contract_panel(grid: StrikeGrid, rule: str = "grid") -> ContractPanel:
    """Price every contract the swap layer needs off one grid."""
    powers = {p: _power_log(grid, p, rule) for p in range(1, MAX_ORDER + 1)}
    panel = ContractPanel(
        trade_date=grid.trade_date,
        expiry=grid.expiry,
        forward=grid.forward,
        x1=powers[1], x2=powers[2], x3=powers[3],
        x4=powers[4], x5=powers[5], x6=powers[6],
        v_eta=price_entropy_contract(grid, rule),
        conv_var_rate=conventional_variance_rate(grid, rule),
    )
    panel.validate()
    return panel
