"""Write-once artifact stores shared by the pipeline stages.

Every store is a directory of delimited text files keyed by date (and expiry
where relevant).  Floats are written with ``repr`` so values round-trip to full
precision; no stage ever rewrites a predecessor's store.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .contracts import ContractPanel
from .errors import StageError
from .quotes import OptionQuote, QuoteSet
from .series import PnlSeries
from .surface import StrikeGrid

QUOTE_COLUMNS = ("expiry", "strike", "side", "mid", "volume", "implied_vol")
PANEL_COLUMNS = ("expiry", "forward", "x1", "x2", "x3", "x4", "x5", "x6",
                 "v_eta", "conv_var_rate")
PNL_COLUMNS = ("date", "increment", "realised_part", "implied_part", "cumulative")


def _date_str(d: date) -> str:
    return d.isoformat()


def _parse_date(text: str) -> date:
    return datetime.strptime(text, "%Y-%m-%d").date()


def _ensure_dir(root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    return root


# ---------------------------------------------------------------------------
# quote store: one file per trade date
# ---------------------------------------------------------------------------

def write_quote_store(quote_sets: list[QuoteSet], root: str | Path) -> list[Path]:
    root = _ensure_dir(root)
    written = []
    for qs in quote_sets:
        path = root / f"{_date_str(qs.trade_date)}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(QUOTE_COLUMNS)
            for q in sorted(qs.quotes, key=lambda q: (q.expiry, q.strike, q.side)):
                writer.writerow([_date_str(q.expiry), repr(q.strike), q.side,
                                 repr(q.mid), repr(q.volume), repr(q.implied_vol)])
        written.append(path)
    return written


def read_quote_store(root: str | Path) -> list[QuoteSet]:
    root = Path(root)
    out = []
    for path in sorted(root.glob("*.csv")):
        trade_date = _parse_date(path.stem)
        quotes = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                quotes.append(OptionQuote(
                    trade_date=trade_date,
                    expiry=_parse_date(row["expiry"]),
                    strike=float(row["strike"]),
                    side=row["side"],
                    mid=float(row["mid"]),
                    volume=float(row["volume"]),
                    implied_vol=float(row["implied_vol"]),
                ))
        out.append(QuoteSet(trade_date, tuple(quotes)))
    if not out:
        raise StageError(f"no quote files under {root}")
    return out


# ---------------------------------------------------------------------------
# grid store: one file per (trade date, expiry)
# ---------------------------------------------------------------------------

def write_grid_store(grids: list[StrikeGrid], root: str | Path) -> list[Path]:
    root = _ensure_dir(root)
    written = []
    for g in grids:
        path = root / f"{_date_str(g.trade_date)}__{_date_str(g.expiry)}.csv"
        with open(path, "w", newline="") as fh:
            fh.write(f"# forward={g.forward!r} avg_implied_vol={g.avg_implied_vol!r}\n")
            writer = csv.writer(fh)
            writer.writerow(("strike", "otm_price"))
            for k, q in zip(g.strikes, g.otm_prices):
                writer.writerow([repr(float(k)), repr(float(q))])
        written.append(path)
    return written


def read_grid_store(root: str | Path) -> list[StrikeGrid]:
    root = Path(root)
    grids = []
    for path in sorted(root.glob("*__*.csv")):
        day_s, expiry_s = path.stem.split("__")
        with open(path, newline="") as fh:
            meta = fh.readline().strip()
            fields = dict(part.split("=") for part in meta.lstrip("# ").split())
            reader = csv.reader(fh)
            next(reader)
            rows = [(float(k), float(q)) for k, q in reader]
        strikes = np.array([r[0] for r in rows])
        prices = np.array([r[1] for r in rows])
        grids.append(StrikeGrid(
            trade_date=_parse_date(day_s), expiry=_parse_date(expiry_s),
            forward=float(fields["forward"]), strikes=strikes, otm_prices=prices,
            avg_implied_vol=float(fields["avg_implied_vol"]),
        ))
    if not grids:
        raise StageError(f"no grid files under {root}")
    return grids


# ---------------------------------------------------------------------------
# panel store: one file per trade date, one row per expiry
# ---------------------------------------------------------------------------

def write_panel_store(panels: dict[date, dict[date, ContractPanel]],
                      root: str | Path) -> list[Path]:
    root = _ensure_dir(root)
    written = []
    for trade_date in sorted(panels):
        path = root / f"{_date_str(trade_date)}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(PANEL_COLUMNS)
            for expiry in sorted(panels[trade_date]):
                p = panels[trade_date][expiry]
                writer.writerow([_date_str(expiry)] + [
                    repr(getattr(p, c)) for c in PANEL_COLUMNS[1:]])
        written.append(path)
    return written


def read_panel_store(root: str | Path) -> dict[date, dict[date, ContractPanel]]:
    root = Path(root)
    out: dict[date, dict[date, ContractPanel]] = {}
    for path in sorted(root.glob("*.csv")):
        trade_date = _parse_date(path.stem)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                panel = ContractPanel(
                    trade_date=trade_date,
                    expiry=_parse_date(row["expiry"]),
                    **{c: float(row[c]) for c in PANEL_COLUMNS[1:]})
                out.setdefault(trade_date, {})[panel.expiry] = panel
    if not out:
        raise StageError(f"no panel files under {root}")
    return out


# ---------------------------------------------------------------------------
# P&L store: one file per series
# ---------------------------------------------------------------------------

def write_pnl_series(series: PnlSeries, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cumulative = series.cumulative()
    with open(path, "w", newline="") as fh:
        fh.write(f"# label={series.label} tau_days={series.tau_days} "
                 f"frequency={series.frequency} gaps={len(series.gaps)}\n")
        writer = csv.writer(fh)
        writer.writerow(PNL_COLUMNS)
        for i, d in enumerate(series.dates):
            writer.writerow([_date_str(d), repr(float(series.increments[i])),
                             repr(float(series.realised[i])),
                             repr(float(series.implied[i])),
                             repr(float(cumulative[i]))])
    return path


@dataclass(frozen=True)
class StoredPnl:
    label: str
    tau_days: int
    frequency: str
    dates: tuple[date, ...]
    increments: np.ndarray
    realised: np.ndarray
    implied: np.ndarray

    def by_date(self) -> dict[date, float]:
        return dict(zip(self.dates, self.increments.tolist()))


def read_pnl_series(path: str | Path) -> StoredPnl:
    path = Path(path)
    with open(path, newline="") as fh:
        meta = dict(part.split("=") for part in
                    fh.readline().strip().lstrip("# ").split())
        rows = list(csv.DictReader(fh))
    return StoredPnl(
        label=meta.get("label", path.stem),
        tau_days=int(meta.get("tau_days", 30)),
        frequency=meta.get("frequency", "daily"),
        dates=tuple(_parse_date(r["date"]) for r in rows),
        increments=np.array([float(r["increment"]) for r in rows]),
        realised=np.array([float(r["realised_part"]) for r in rows]),
        implied=np.array([float(r["implied_part"]) for r in rows]),
    )


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(paths: list[Path], root: str | Path,
                   name: str = "manifest.json") -> Path:
    """Record every artifact with its content hash, relative to ``root``."""
    root = Path(root)
    entries = {str(Path(p).resolve().relative_to(root.resolve())): file_sha256(p)
               for p in paths}
    out = root / name
    with open(out, "w") as fh:
        json.dump(dict(sorted(entries.items())), fh, indent=2)
        fh.write("\n")
    return out
