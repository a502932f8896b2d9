"""Synthetic market engine: GBM / jump-diffusion paths under P or Q with exact
conditional contract prices, and Monte Carlo measurement of aggregation
violations, Q-bias, P-bias and estimator variance.

The two measures differ only by a drift on the log forward (the jump law and
volatility are shared, with the Q drift carrying the jump compensator), which
is all the bias diagnostics require.  Contract prices along a path are exact:
the increment to maturity has known cumulants, so conditional power-log prices
are polynomials in the current log price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.random import Generator, Philox

from .errors import MomentSwapsError
from .swaps import SwapSpec, make_swap, neuberger_skew_payoff

#: paths per RNG block; fixed so serial and parallel runs draw identically
BLOCK = 1 << 14

SCALAR_PAYOFFS = ("rv", "lv", "cubed", "psi", "erp")
SPEC_PAYOFFS = ("variance", "third", "fourth")
PAYOFFS = SPEC_PAYOFFS + SCALAR_PAYOFFS

_BINOM = [[math.comb(n, k) for k in range(n + 1)] for n in range(7)]


@dataclass(frozen=True)
class MarketModel:
    kind: str = "gbm"
    sigma: float = 0.2
    p_drift: float = 0.0
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_vol: float = 0.0
    seed: int = 0
    steps_per_day: int = 1

    def __post_init__(self):
        if self.kind not in ("gbm", "gbm_jumps"):
            raise MomentSwapsError(f"unsupported model kind {self.kind!r}")
        if self.sigma <= 0.0:
            raise MomentSwapsError("sigma must be positive")
        if self.kind == "gbm_jumps" and self.jump_intensity < 0.0:
            raise MomentSwapsError("jump intensity must be non-negative")

    @property
    def jump_compensator(self) -> float:
        """lambda * (E[e^J] - 1); subtracted from the Q drift for martingality."""
        if self.kind == "gbm":
            return 0.0
        kappa = math.exp(self.jump_mean + 0.5 * self.jump_vol ** 2) - 1.0
        return self.jump_intensity * kappa

    def drift(self, measure: str) -> float:
        """Per-year drift of the log forward under the requested measure."""
        base = -0.5 * self.sigma ** 2 - self.jump_compensator
        if measure == "Q":
            return base
        if measure == "P":
            return base + self.p_drift
        raise MomentSwapsError(f"measure must be 'P' or 'Q', got {measure!r}")


def _jump_raw_moments(a: float, b: float) -> list[float]:
    """Raw moments 1..6 of a normal jump size N(a, b^2)."""
    b2 = b * b
    return [
        a,
        a ** 2 + b2,
        a ** 3 + 3 * a * b2,
        a ** 4 + 6 * a ** 2 * b2 + 3 * b2 ** 2,
        a ** 5 + 10 * a ** 3 * b2 + 15 * a * b2 ** 2,
        a ** 6 + 15 * a ** 4 * b2 + 45 * a ** 2 * b2 ** 2 + 15 * b2 ** 3,
    ]


def increment_cumulants(model: MarketModel, tau: float, measure: str = "Q") -> list[float]:
    """Cumulants 1..6 of the log-forward increment over ``tau`` years."""
    k = [0.0] * 6
    k[0] = model.drift(measure) * tau
    k[1] = model.sigma ** 2 * tau
    if model.kind == "gbm_jumps" and model.jump_intensity > 0.0:
        lam_t = model.jump_intensity * tau
        jm = _jump_raw_moments(model.jump_mean, model.jump_vol)
        k[0] += lam_t * jm[0]
        k[1] += lam_t * jm[1]
        for n in range(3, 7):
            k[n - 1] = lam_t * jm[n - 1]
    return k


def raw_moments_from_cumulants(kappa: list[float]) -> list[float]:
    """Raw moments m_0..m_6 via m_n = sum C(n-1, j-1) kappa_j m_{n-j}."""
    m = [1.0]
    for n in range(1, 7):
        m.append(sum(_BINOM[n - 1][j - 1] * kappa[j - 1] * m[n - j]
                     for j in range(1, n + 1)))
    return m


def entropy_variance(model: MarketModel, tau: float) -> float:
    """v^eta over ``tau``: 2 E^Q[u e^u] with u the Q increment to maturity."""
    c = model.drift("Q")
    out = c * tau + model.sigma ** 2 * tau
    if model.kind == "gbm_jumps" and model.jump_intensity > 0.0:
        a, b = model.jump_mean, model.jump_vol
        out += model.jump_intensity * tau * math.exp(a + 0.5 * b * b) * (a + b * b)
    return 2.0 * out


def _cgf_at_one(model: MarketModel, tau: float, measure: str) -> tuple[float, float]:
    """(cgf(1), cgf'(1)) of the log-forward increment: E[e^u] and E[u e^u] follow."""
    c = model.drift(measure)
    value = c * tau + 0.5 * model.sigma ** 2 * tau
    slope = c * tau + model.sigma ** 2 * tau
    if model.kind == "gbm_jumps" and model.jump_intensity > 0.0:
        a, b = model.jump_mean, model.jump_vol
        ej = math.exp(a + 0.5 * b * b)
        value += model.jump_intensity * tau * (ej - 1.0)
        slope += model.jump_intensity * tau * ej * (a + b * b)
    return value, slope


def total_payoff_mean(payoff: str, model: MarketModel, tau: float,
                      measure: str) -> float:
    """Closed-form E[phi(x_T - x_0)] under either measure.

    Both supported models have independent increments with known cumulant
    generating functions, so every payoff's whole-horizon expectation is exact;
    this is the control variate behind the P-bias estimator.
    """
    m = raw_moments_from_cumulants(increment_cumulants(model, tau, measure))
    if payoff == "rv":
        return m[2]
    if payoff == "cubed":
        return m[3]
    if payoff in ("lv", "psi"):
        cgf1, dcgf1 = _cgf_at_one(model, tau, measure)
        e_exp = math.exp(cgf1)
        if payoff == "lv":
            return 2.0 * (e_exp - 1.0 - m[1])
        v0 = entropy_variance(model, tau)
        cubic = 6.0 * (dcgf1 * e_exp - 2.0 * e_exp + m[1] + 2.0)
        return 3.0 * (-v0) * (e_exp - 1.0) + cubic
    if payoff == "erp":
        mq = raw_moments_from_cumulants(increment_cumulants(model, tau, "Q"))
        return m[1] - mq[1]
    if payoff in SPEC_PAYOFFS:
        spec = _spec_for(payoff, model, tau)
        n = spec.dim
        x0 = np.array(raw_moments_from_cumulants(
            increment_cumulants(model, tau, "Q"))[1:n + 1])
        # terminal state components are powers of x_T = u (paths start at 0)
        e_prod = np.array([[m[a + b] for b in range(1, n + 1)] for a in range(1, n + 1)])
        e_pow = np.array(m[1:n + 1])
        cross = np.outer(x0, e_pow)
        total = e_prod - cross - cross.T + np.outer(x0, x0)
        return float(np.trace(spec.omega @ total) + spec.alpha @ (e_pow - x0))
    raise MomentSwapsError(f"unknown payoff {payoff!r}")


def conventional_rate(model: MarketModel, tau: float) -> float:
    """Closed form of 2 int k^{-2} q dk: equals -2 E^Q[x_T - x_t] for a martingale forward."""
    return -2.0 * increment_cumulants(model, tau, "Q")[0]


class PathSet:
    """Simulated log-forward paths with exact conditional contract prices."""

    def __init__(self, model: MarketModel, measure: str, tau: float,
                 x: np.ndarray, x0: float):
        self.model = model
        self.measure = measure
        self.tau = tau
        self.x = x                      # (n_paths, n_steps + 1)
        self.x0 = x0
        self.n_paths, n = x.shape
        self.n_steps = n - 1
        self.times = np.linspace(0.0, tau, n)
        self._moments = [raw_moments_from_cumulants(
            increment_cumulants(model, tau - t, "Q")) for t in self.times]

    def increments(self) -> np.ndarray:
        return np.diff(self.x, axis=1)

    def forwards(self) -> np.ndarray:
        return np.exp(self.x)

    def contract_values(self, p: int) -> np.ndarray:
        """X^(p) at every monitoring date: sum_j C(p,j) x^{p-j} m_j(tau - t)."""
        out = np.empty_like(self.x)
        for s in range(self.n_steps + 1):
            m = self._moments[s]
            xs = self.x[:, s]
            acc = np.zeros_like(xs)
            for j in range(p + 1):
                acc += _BINOM[p][j] * m[j] * xs ** (p - j)
            out[:, s] = acc
        return out

    def entropy_path(self) -> np.ndarray:
        """v^eta at each monitoring date (state-independent for these models)."""
        return np.array([entropy_variance(self.model, self.tau - t)
                         for t in self.times])


def _block_paths(model: MarketModel, measure: str, tau: float, n_steps: int,
                 block_index: int, n_keep: int, x0: float,
                 negate: bool = False) -> PathSet:
    rng = Generator(Philox(key=np.array([model.seed, block_index], dtype=np.uint64)))
    dt = tau / n_steps
    z = rng.standard_normal((BLOCK, n_steps))
    if negate:
        z = -z
    steps = model.drift(measure) * dt + model.sigma * math.sqrt(dt) * z
    if model.kind == "gbm_jumps" and model.jump_intensity > 0.0:
        counts = rng.poisson(model.jump_intensity * dt, size=(BLOCK, n_steps))
        zj = rng.standard_normal((BLOCK, n_steps))
        if negate:
            zj = -zj
        steps += counts * model.jump_mean + np.sqrt(counts) * model.jump_vol * zj
    x = np.empty((BLOCK, n_steps + 1))
    x[:, 0] = x0
    np.cumsum(steps, axis=1, out=x[:, 1:])
    x[:, 1:] += x0
    return PathSet(model, measure, tau, x[:n_keep], x0)


def iter_path_blocks(model: MarketModel, measure: str, horizon_days: float,
                     n_steps: int, n_paths: int, x0: float = 0.0):
    """Yield PathSets in fixed-size blocks; path i is identical for any n_paths >= i."""
    tau = horizon_days / 365.0
    for b in range((n_paths + BLOCK - 1) // BLOCK):
        keep = min(BLOCK, n_paths - b * BLOCK)
        yield _block_paths(model, measure, tau, n_steps, b, keep, x0)


def simulate_paths(model: MarketModel, measure: str, horizon_days: float,
                   n_steps: int, n_paths: int, x0: float = 0.0) -> PathSet:
    """Materialise one PathSet (use the block iterator for large runs)."""
    blocks = list(iter_path_blocks(model, measure, horizon_days, n_steps, n_paths, x0))
    x = np.vstack([ps.x for ps in blocks])
    return PathSet(model, measure, horizon_days / 365.0, x, x0)


def _spec_for(label: str, model: MarketModel, tau: float) -> SwapSpec:
    m = raw_moments_from_cumulants(increment_cumulants(model, tau, "Q"))
    return make_swap(label, x0=m[1], x20=m[2], x30=m[3])


def _spec_rate(label: str, model: MarketModel, tau: float) -> float:
    """tr(Omega (Sigma_0 - x_0 x_0')) evaluated from the model's exact moments."""
    spec = _spec_for(label, model, tau)
    m = raw_moments_from_cumulants(increment_cumulants(model, tau, "Q"))
    n = spec.dim
    x0 = np.array(m[1:n + 1])
    sigma0 = np.array([[m[a + b] for b in range(1, n + 1)] for a in range(1, n + 1)])
    return float(np.trace(spec.omega @ (sigma0 - np.outer(x0, x0))))


def _payoff_terms(label: str, ps: PathSet):
    """Per-path (sum of phi over the partition, phi of the total increment)."""
    if label in SPEC_PAYOFFS:
        spec = _spec_for(label, ps.model, ps.tau)
        n = spec.dim
        states = np.stack([ps.contract_values(p) for p in range(1, n + 1)])
        deltas = np.diff(states, axis=2)           # (n, paths, steps)
        floating = np.einsum("ij,ips,jps->p", spec.omega, deltas, deltas)
        total = states[:, :, -1] - states[:, :, :1].reshape(n, -1)
        total_payoff = np.einsum("ij,ip,jp->p", spec.omega, total, total)
        if np.any(spec.alpha):
            floating = floating + spec.alpha @ (states[:, :, -1] - states[:, :, 0])
            total_payoff = total_payoff + spec.alpha @ total
        return floating, total_payoff

    xhat = ps.increments()
    dx = ps.x[:, -1] - ps.x[:, 0]
    if label == "rv":
        return np.sum(xhat * xhat, axis=1), dx * dx
    if label == "lv":
        return (np.sum(2.0 * (np.expm1(xhat) - xhat), axis=1),
                2.0 * (np.expm1(dx) - dx))
    if label == "cubed":
        return np.sum(xhat ** 3, axis=1), dx ** 3
    if label == "psi":
        v = ps.entropy_path()
        vhat = np.diff(v)
        floating = np.sum(neuberger_skew_payoff(xhat, vhat[None, :]), axis=1)
        return floating, neuberger_skew_payoff(dx, v[-1] - v[0])
    if label == "erp":
        x_contract = ps.contract_values(1)
        return x_contract[:, -1] - x_contract[:, 0], dx + (ps.x[:, 0] - x_contract[:, 0])
    raise MomentSwapsError(f"unknown payoff {label!r}")


def payoff_rate(label: str, model: MarketModel, tau: float) -> float:
    """Inception swap rate used against the floating leg of each payoff."""
    if label in SPEC_PAYOFFS:
        return _spec_rate(label, model, tau)
    if label in ("rv", "lv"):
        return conventional_rate(model, tau)
    if label == "psi":
        return 3.0 * (entropy_variance(model, tau) - conventional_rate(model, tau))
    if label in ("cubed", "erp"):
        return 0.0
    raise MomentSwapsError(f"unknown payoff {label!r}")


@dataclass(frozen=True)
class BiasReport:
    payoff: str
    partition: int
    n_paths: int
    epsilon: float | None = None
    epsilon_se: float | None = None
    b: float | None = None
    b_se: float | None = None
    sigma_sq: float | None = None
    sigma_sq_se: float | None = None


class _MeanAccumulator:
    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray):
        self.n += len(values)
        self.total += float(np.sum(values))
        self.total_sq += float(np.sum(values * values))

    @property
    def mean(self) -> float:
        return self.total / self.n

    @property
    def variance(self) -> float:
        return max(self.total_sq / self.n - self.mean ** 2, 0.0) * self.n / (self.n - 1)

    @property
    def se(self) -> float:
        return math.sqrt(self.variance / self.n)


def verify_aggregation(payoff: str, model: MarketModel, partitions: list[int],
                       horizon_days: float = 30.0, n_paths: int = 100_000):
    """AP check per partition: mean and SE of sum phi(xhat) - phi(total) under Q."""
    rows = []
    for n_steps in partitions:
        acc = _MeanAccumulator()
        for ps in iter_path_blocks(model, "Q", horizon_days, n_steps, n_paths):
            floating, total = _payoff_terms(payoff, ps)
            acc.add(floating - total)
        rows.append({"payoff": payoff, "partition": n_steps,
                     "deviation": acc.mean, "se": acc.se, "n_paths": n_paths})
    return rows


def estimate_q_bias(payoff: str, model: MarketModel, partition: int,
                    n_paths: int = 100_000, horizon_days: float = 30.0):
    """Mean swap P&L under Q (floating leg minus the payoff's swap rate)."""
    tau = horizon_days / 365.0
    rate = payoff_rate(payoff, model, tau)
    acc = _MeanAccumulator()
    for ps in iter_path_blocks(model, "Q", horizon_days, partition, n_paths):
        floating, _ = _payoff_terms(payoff, ps)
        acc.add(floating - rate)
    return acc.mean, acc.se


def estimate_p_bias(payoff: str, model: MarketModel, partition: int,
                    n_paths: int = 1_000_000, horizon_days: float = 30.0,
                    antithetic: bool = True, exact_total: bool = True):
    """AP violation under P: E^P[sum phi(xhat)] - E^P[phi(total)] on drifting paths.

    The floating leg is sampled; the whole-horizon leg is taken at its exact
    model expectation (a zero-variance control variate, available in closed
    form for both model kinds), and antithetic pairing removes the odd-in-noise
    part of the floating leg.  Both reductions leave the estimate unbiased; the
    SE is the spread of the remaining sampled term.  ``exact_total=False``
    falls back to the plain pathwise paired difference.
    """
    tau = horizon_days / 365.0
    acc = _MeanAccumulator()

    def leg_values(ps: PathSet) -> np.ndarray:
        floating, total = _payoff_terms(payoff, ps)
        return floating if exact_total else floating - total

    if antithetic:
        n_pairs = n_paths // 2
        for b in range((n_pairs + BLOCK - 1) // BLOCK):
            keep = min(BLOCK, n_pairs - b * BLOCK)
            plus = _block_paths(model, "P", tau, partition, b, keep, 0.0)
            minus = _block_paths(model, "P", tau, partition, b, keep, 0.0, negate=True)
            acc.add(0.5 * (leg_values(plus) + leg_values(minus)))
    else:
        for ps in iter_path_blocks(model, "P", horizon_days, partition, n_paths):
            acc.add(leg_values(ps))
    offset = total_payoff_mean(payoff, model, tau, "P") if exact_total else 0.0
    return acc.mean - offset, acc.se


def estimator_variance(payoff: str, model: MarketModel, partition: int,
                       n_paths: int = 100_000, horizon_days: float = 30.0,
                       measure: str = "P", one_shot: bool = False):
    """MC variance of the realised leg, with the SE of that variance estimate."""
    values = _MeanAccumulator()
    centered4 = 0.0
    samples = []
    for ps in iter_path_blocks(model, measure, horizon_days, partition, n_paths):
        floating, total = _payoff_terms(payoff, ps)
        v = total if one_shot else floating
        values.add(v)
        samples.append(v)
    allv = np.concatenate(samples)
    var = float(np.var(allv, ddof=1))
    m4 = float(np.mean((allv - allv.mean()) ** 4))
    se = math.sqrt(max(m4 - var * var, 0.0) / len(allv))
    return var, se
