"""Undiscounted Black-76 option values on a forward and their implied vols.

All prices here are forward prices: q(k) is what the option settles to at
expiry, discounting handled (or absent) upstream.  ``vol`` is annualised,
``tau`` in years.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

MIN_VOL = 1e-8
MAX_VOL = 10.0


def _d12(forward, strike, vol, tau):
    st = vol * np.sqrt(tau)
    d1 = np.log(forward / strike) / st + 0.5 * st
    return d1, d1 - st


def call_price(forward, strike, vol, tau):
    """Forward value of a call, exp-intrinsic in the vol -> 0 limit."""
    forward = np.asarray(forward, dtype=float)
    strike = np.asarray(strike, dtype=float)
    if np.any(vol * np.sqrt(tau) <= 0.0):
        return np.maximum(forward - strike, 0.0)
    d1, d2 = _d12(forward, strike, vol, tau)
    return forward * ndtr(d1) - strike * ndtr(d2)


def put_price(forward, strike, vol, tau):
    forward = np.asarray(forward, dtype=float)
    strike = np.asarray(strike, dtype=float)
    if np.any(vol * np.sqrt(tau) <= 0.0):
        return np.maximum(strike - forward, 0.0)
    d1, d2 = _d12(forward, strike, vol, tau)
    return strike * ndtr(-d2) - forward * ndtr(-d1)


def otm_price(forward, strike, vol, tau):
    """Price of the out-of-the-money side: put below the forward, call at or above."""
    strike = np.asarray(strike, dtype=float)
    put = put_price(forward, strike, vol, tau)
    call = call_price(forward, strike, vol, tau)
    return np.where(strike < forward, put, call)


def implied_vol(price, forward, strike, tau, side):
    """Invert Black-76 for one option; ``side`` is "put" or "call".

    Prices at (or numerically below) intrinsic return MIN_VOL rather than
    failing: the flat-vol extrapolation rule needs a usable vol at every knot.
    """
    if side == "call":
        intrinsic = max(forward - strike, 0.0)
        fn = call_price
        upper = forward
    elif side == "put":
        intrinsic = max(strike - forward, 0.0)
        fn = put_price
        upper = strike
    else:
        raise ValueError(f"unknown option side {side!r}")
    if price >= upper:
        raise ValueError(f"{side} price {price} breaches upper bound {upper}")
    if price - intrinsic <= 1e-14 * max(forward, 1.0):
        return MIN_VOL

    def gap(vol):
        return float(fn(forward, strike, vol, tau)) - price

    lo, hi = MIN_VOL, 2.0
    while gap(hi) < 0.0 and hi < MAX_VOL:
        hi *= 2.0
    if gap(hi) < 0.0:
        raise ValueError(f"implied vol above {MAX_VOL} for price {price}")
    if gap(lo) > 0.0:
        return MIN_VOL
    return brentq(gap, lo, hi, xtol=1e-12, rtol=8.9e-16)


def lognormal_pdf(x, forward, vol, tau):
    """Risk-neutral density of the terminal forward under flat lognormal vol."""
    s = vol * math.sqrt(tau)
    mu = math.log(forward) - 0.5 * s * s
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * ((np.log(x) - mu) / s) ** 2) / (x * s * math.sqrt(2.0 * math.pi))
