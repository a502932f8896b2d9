"""Option-chain ingestion, filtering, parity forwards and raw OTM curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CurveUnavailableError, ForwardUnavailableError, QuoteDataError

SIDES = ("put", "call")

#: canonical column name -> default header name in input files
DEFAULT_SCHEMA = {
    "trade_date": "trade_date",
    "expiry": "expiry",
    "strike": "strike",
    "side": "side",
    "mid": "mid",
    "volume": "volume",
    "implied_vol": "implied_vol",
}


@dataclass(frozen=True)
class OptionQuote:
    trade_date: date
    expiry: date
    strike: float
    side: str
    mid: float
    volume: float
    implied_vol: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise QuoteDataError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.strike <= 0.0:
            raise QuoteDataError(f"strike must be positive, got {self.strike}")
        if self.expiry <= self.trade_date:
            raise QuoteDataError(
                f"expiry {self.expiry} not after trade date {self.trade_date}")
        if self.mid < 0.0:
            raise QuoteDataError(f"mid must be non-negative, got {self.mid}")
        if self.volume < 0.0:
            raise QuoteDataError(f"volume must be non-negative, got {self.volume}")
        if self.implied_vol < 0.0:
            raise QuoteDataError(f"implied vol must be non-negative, got {self.implied_vol}")

    @property
    def days_to_expiry(self) -> int:
        """Calendar days, exclusive of the trade date, inclusive of expiry."""
        return (self.expiry - self.trade_date).days


@dataclass(frozen=True)
class QuoteSet:
    """All quotes observed on one trade date, unique per (expiry, strike, side)."""

    trade_date: date
    quotes: tuple[OptionQuote, ...]

    def __post_init__(self):
        seen = set()
        for q in self.quotes:
            if q.trade_date != self.trade_date:
                raise QuoteDataError(
                    f"quote dated {q.trade_date} in set for {self.trade_date}")
            key = (q.expiry, q.strike, q.side)
            if key in seen:
                raise QuoteDataError(
                    f"duplicate quote for expiry {q.expiry}, strike {q.strike}, {q.side}")
            seen.add(key)

    def by_expiry(self) -> dict[date, list[OptionQuote]]:
        out: dict[date, list[OptionQuote]] = {}
        for q in self.quotes:
            out.setdefault(q.expiry, []).append(q)
        return {k: out[k] for k in sorted(out)}

    def __len__(self):
        return len(self.quotes)


@dataclass(frozen=True)
class RawOtmCurve:
    """Out-of-the-money mid prices for one (trade date, expiry), put side below
    the forward and call side at or above it, strictly increasing in strike."""

    trade_date: date
    expiry: date
    forward: float
    strikes: tuple[float, ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        if self.forward <= 0.0:
            raise CurveUnavailableError(f"forward must be positive, got {self.forward}")
        ks = np.asarray(self.strikes)
        if len(ks) != len(self.prices):
            raise CurveUnavailableError("strike / price length mismatch")
        if np.any(np.diff(ks) <= 0.0):
            raise CurveUnavailableError("strikes must be strictly increasing")
        if any(p < 0.0 for p in self.prices):
            raise CurveUnavailableError("OTM prices must be non-negative")

    @property
    def tau(self) -> float:
        return (self.expiry - self.trade_date).days / 365.0


def _parse_date(text: str) -> date:
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%Y%m%d", "%d/%m/%Y"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _sniff_delimiter(sample: str) -> str:
    return "\t" if sample.count("\t") >= sample.count(",") else ","


def load_quotes(
    source: str | Path | Sequence[str | Path],
    schema: Mapping[str, str] | None = None,
    discount_column: str | None = None,
) -> list[QuoteSet]:
    """Read delimited quote files into one QuoteSet per trade date.

    ``schema`` maps canonical field names to the file's column headers.  When
    ``discount_column`` is given, mids are divided by that column so downstream
    code always sees forward option prices.  Several files may be passed; rows
    for the same trade date are merged and duplicates rejected.
    """
    paths = [source] if isinstance(source, (str, Path)) else list(source)
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)

    rows_by_date: dict[date, list[OptionQuote]] = {}
    total = 0
    for path in paths:
        path = Path(path)
        with open(path, newline="") as fh:
            head = fh.read(4096)
            if not head.strip():
                raise QuoteDataError(f"{path}: empty file")
            fh.seek(0)
            reader = csv.DictReader(fh, delimiter=_sniff_delimiter(head.splitlines()[0]))
            missing = [c for c in colmap.values() if c not in (reader.fieldnames or [])]
            if discount_column and discount_column not in (reader.fieldnames or []):
                missing.append(discount_column)
            if missing:
                raise QuoteDataError(f"{path}: missing columns {missing}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    mid = float(row[colmap["mid"]])
                    if discount_column:
                        df = float(row[discount_column])
                        if df <= 0.0:
                            raise ValueError(f"discount factor must be positive, got {df}")
                        mid /= df
                    quote = OptionQuote(
                        trade_date=_parse_date(row[colmap["trade_date"]]),
                        expiry=_parse_date(row[colmap["expiry"]]),
                        strike=float(row[colmap["strike"]]),
                        side=row[colmap["side"]].strip().lower(),
                        mid=mid,
                        volume=float(row[colmap["volume"]]),
                        implied_vol=float(row[colmap["implied_vol"]]),
                    )
                except (ValueError, KeyError, QuoteDataError) as exc:
                    raise QuoteDataError(f"{path}: line {lineno}: {exc}") from exc
                rows_by_date.setdefault(quote.trade_date, []).append(quote)
                total += 1
    if total == 0:
        raise QuoteDataError(f"no quotes found in {', '.join(str(p) for p in paths)}")
    return [QuoteSet(d, tuple(rows_by_date[d])) for d in sorted(rows_by_date)]


def filter_quotes(
    qs: QuoteSet,
    min_days: int = 7,
    max_days: int = 365,
    min_mid: float = 0.5,
    min_iv: float = 0.01,
    max_iv: float = 1.0,
    min_strikes: int = 3,
) -> QuoteSet:
    """Drop unusable quotes, then expiries left with too few distinct strikes.

    A quote is dropped when days to expiry < ``min_days`` or > ``max_days``,
    volume is zero, mid <= ``min_mid`` (in index points; configurable for other
    underlyings), or implied vol <= ``min_iv`` / >= ``max_iv``.
    """
    kept = [
        q for q in qs.quotes
        if min_days <= q.days_to_expiry <= max_days
        and q.volume > 0.0
        and q.mid > min_mid
        and min_iv < q.implied_vol < max_iv
    ]
    strikes_per_expiry: dict[date, set[float]] = {}
    for q in kept:
        strikes_per_expiry.setdefault(q.expiry, set()).add(q.strike)
    kept = [q for q in kept if len(strikes_per_expiry[q.expiry]) >= min_strikes]
    return QuoteSet(qs.trade_date, tuple(kept))


def extract_forward(quotes: Iterable[OptionQuote]) -> float:
    """Put-call-parity forward from the strike with the smallest |P - C|.

    Mids are treated as forward option prices, so F = k* + C(k*) - P(k*).
    Ties in |P - C| resolve to the lower strike.
    """
    puts: dict[float, float] = {}
    calls: dict[float, float] = {}
    expiries = set()
    for q in quotes:
        expiries.add(q.expiry)
        (puts if q.side == "put" else calls)[q.strike] = q.mid
    if len(expiries) > 1:
        raise ForwardUnavailableError(f"quotes span several expiries: {sorted(expiries)}")
    both = sorted(set(puts) & set(calls))
    if not both:
        raise ForwardUnavailableError("no strike quotes both a put and a call")
    k_star = min(both, key=lambda k: (abs(puts[k] - calls[k]), k))
    forward = k_star + calls[k_star] - puts[k_star]
    if forward <= 0.0:
        raise ForwardUnavailableError(f"parity forward non-positive: {forward}")
    return forward


def to_otm_curve(quotes: Sequence[OptionQuote], forward: float) -> RawOtmCurve:
    """Keep put mids below the forward and call mids at or above it.

    Where both sides are quoted at one strike the OTM side wins.  Fewer than
    three surviving points is an error.
    """
    quotes = list(quotes)
    if not quotes:
        raise CurveUnavailableError("no quotes supplied")
    expiry = quotes[0].expiry
    trade_date = quotes[0].trade_date
    by_strike: dict[float, float] = {}
    for q in quotes:
        otm_side = "put" if q.strike < forward else "call"
        if q.side == otm_side:
            by_strike[q.strike] = q.mid
    if len(by_strike) < 3:
        raise CurveUnavailableError(
            f"only {len(by_strike)} OTM points for {expiry}, need at least 3")
    strikes = tuple(sorted(by_strike))
    return RawOtmCurve(
        trade_date=trade_date,
        expiry=expiry,
        forward=forward,
        strikes=strikes,
        prices=tuple(by_strike[k] for k in strikes),
    )


def curves_for_date(qs: QuoteSet) -> tuple[list[RawOtmCurve], list[str]]:
    """Forward extraction and OTM-curve assembly per expiry; failures become warnings."""
    curves, warnings = [], []
    for expiry, quotes in qs.by_expiry().items():
        try:
            forward = extract_forward(quotes)
            curves.append(to_otm_curve(quotes, forward))
        except (ForwardUnavailableError, CurveUnavailableError) as exc:
            warnings.append(f"{qs.trade_date} {expiry}: {exc}")
    return curves, warnings
