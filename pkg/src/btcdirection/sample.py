"""Deterministic synthetic snapshot shipped with the package.

The bundled CSVs mimic the source families the pipeline expects (on-chain
network data, exchange data, market prices and volumes, monthly economic
series).  Values are simulated; BTC closes follow a log-space bridge through
hand-picked anchor levels and 2021-01-01 -> 2021-03-31 is pinned to
28,150 -> 52,350 USD.  A hidden AR(1) factor both drives next-day BTC returns
and is visible (noisily) in ``btc.confirmation_time``, so the direction task
carries a weak, learnable signal.

Regenerate with ``python -m btcdirection.sample <out_dir>``.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .ingestion import load_csv
from .trading import PricePath

START = np.datetime64("2013-04-01")
END = np.datetime64("2021-03-31")
DEFAULT_SEED = 2021

ANCHORS = [
    ("2013-04-01", 100.0),
    ("2013-12-04", 1150.0),
    ("2015-01-14", 180.0),
    ("2015-08-01", 280.0),
    ("2016-12-31", 960.0),
    ("2017-12-17", 19000.0),
    ("2018-12-15", 3200.0),
    ("2019-06-26", 12900.0),
    ("2020-03-12", 4900.0),
    ("2020-12-31", 28600.0),
    ("2021-01-01", 28150.0),
    ("2021-03-31", 52350.0),
]
SIGNAL_BETA = 0.012  # per unit of the hidden factor, in log-return terms
DAILY_VOL = 0.035


def data_dir() -> Path:
    return Path(str(resources.files("btcdirection") / "data"))


def manifest_path() -> Path:
    return data_dir() / "manifest.yaml"


def default_config_path() -> Path:
    return data_dir() / "config.yaml"


def _ar1(rng, n, phi, scale=1.0):
    h = np.empty(n)
    h[0] = rng.normal() * scale
    innov = rng.normal(size=n) * scale * np.sqrt(1 - phi**2)
    for t in range(1, n):
        h[t] = phi * h[t - 1] + innov[t]
    return h


def _btc_close(rng, dates, hidden):
    n = len(dates)
    logp = np.empty(n)
    noise = rng.normal(size=n) * DAILY_VOL
    pos = {np.datetime64(d): p for d, p in ANCHORS}
    idx = [int((np.datetime64(d) - dates[0]) // np.timedelta64(1, "D")) for d, _ in ANCHORS]
    logp[0] = np.log(ANCHORS[0][1])
    for (a, pa), (b, pb), ia, ib in zip(ANCHORS, ANCHORS[1:], idx, idx[1:]):
        # returns r[t] for t in (ia, ib]; r[t] depends on hidden[t-1]
        steps = np.arange(ia + 1, ib + 1)
        shock = SIGNAL_BETA * hidden[steps - 1] + noise[steps]
        drift = (np.log(pb) - np.log(pa) - shock.sum()) / len(steps)
        logp[steps] = np.log(pa) + np.cumsum(drift + shock)
    assert all(abs(np.exp(logp[i]) - pos[np.datetime64(d)]) < 1e-6 * p for (d, p), i in zip(ANCHORS, idx))
    return np.exp(logp)


def _gbm(rng, n, start, vol, drift=0.0):
    return start * np.exp(np.cumsum(drift + vol * rng.normal(size=n)))


def _write(path: Path, dates, cols: dict[str, np.ndarray], fmt: dict[str, str]) -> None:
    with path.open("w") as fh:
        fh.write(",".join(["date", *cols]) + "\n")
        for i, d in enumerate(dates):
            cells = []
            for name, col in cols.items():
                v = col[i]
                cells.append("" if np.isnan(v) else format(v, fmt.get(name, ".6g")))
            fh.write(f"{d}," + ",".join(cells) + "\n")


def generate(out_dir: str | Path, seed: int = DEFAULT_SEED) -> Path:
    """Write the sample sources and manifest into ``out_dir``."""
    out = Path(out_dir)
    (out / "sources").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    dates = np.arange(START, END + np.timedelta64(1, "D"))
    n = len(dates)
    t = np.arange(n)
    years = t / 365.25

    hidden = _ar1(rng, n, 0.9)
    close = _btc_close(rng, dates, hidden)
    dow = (dates.astype(np.int64) + 3) % 7
    weekly = 1.0 - 0.12 * (dow >= 5)

    hashrate = 1.5e6 * np.exp(0.72 * years + 0.04 * rng.normal(size=n)) / 1e3
    difficulty = np.repeat(hashrate[::14] * 1.4e5, 14)[:n]
    transactions = 55_000 * (1 + 0.16 * years) * weekly * np.exp(0.06 * rng.normal(size=n))
    active = 280_000 * (close / 1000) ** 0.25 * weekly * np.exp(0.05 * rng.normal(size=n))
    fee = close * 2.5e-5 * np.exp(0.35 * _ar1(rng, n, 0.95) + 0.1 * rng.normal(size=n))
    sent = transactions * close * 0.9 * np.exp(0.2 * rng.normal(size=n))
    profit = close / hashrate * 3.0 * np.exp(0.03 * rng.normal(size=n))
    confirm = 9.5 + 1.6 * hidden + 0.6 * rng.normal(size=n)

    internal = {
        "price": close,
        "transactions": transactions,
        "active_addresses": active,
        "hashrate": hashrate,
        "difficulty": difficulty,
        "fee_usd": fee,
        "sent_usd": sent,
        "mining_profitability": profit,
        "confirmation_time": confirm,
    }
    # sporadic scrape gaps, away from the calendar edges; price is kept whole
    for name, col in internal.items():
        if name == "price":
            continue
        holes = rng.random(n) < 0.006
        holes[:5] = holes[-5:] = False
        col[holes] = np.nan

    fmt_internal = {"price": ".2f", "transactions": ".0f", "active_addresses": ".0f", "difficulty": ".6e", "hashrate": ".2f", "confirmation_time": ".3f"}
    _write(out / "sources" / "btc_network.csv", dates, internal, fmt_internal)

    b_start = int((np.datetime64("2014-01-01") - START) // np.timedelta64(1, "D"))
    bdates = dates[b_start:]
    bn = len(bdates)
    exch = {
        "exchange_volume": 2.5e5 * np.exp(0.4 * _ar1(rng, bn, 0.97) + 0.2 * rng.normal(size=bn)),
        "bid_ask_spread": 0.002 * np.exp(0.3 * _ar1(rng, bn, 0.8)),
    }
    _write(out / "sources" / "exchanges.csv", bdates, exch, {"bid_ask_spread": ".6f"})

    # market data: weekdays only, plus a few random closures
    m_start = np.datetime64("2012-01-02")
    mdates_all = np.arange(m_start, END + np.timedelta64(1, "D"))
    mdow = (mdates_all.astype(np.int64) + 3) % 7
    open_day = (mdow < 5) & (rng.random(len(mdates_all)) > 0.025)
    mdates = mdates_all[open_day]
    mn = len(mdates)
    prices = {
        "gold": _gbm(rng, mn, 1600.0, 0.009),
        "crude_oil": _gbm(rng, mn, 100.0, 0.022, -0.0001),
        "sp500": _gbm(rng, mn, 1280.0, 0.01, 0.0004),
        "nikkei": _gbm(rng, mn, 8500.0, 0.012, 0.0004),
        "usd_eur": _gbm(rng, mn, 0.77, 0.005),
    }
    _write(out / "sources" / "markets.csv", mdates, prices, {k: ".4f" for k in prices})
    volumes = {
        "sp500_volume": 3.5e9 * np.exp(0.25 * rng.normal(size=mn)),
        "gold_volume": 1.8e5 * np.exp(0.35 * rng.normal(size=mn)),
    }
    _write(out / "sources" / "market_volumes.csv", mdates, volumes, {k: ".0f" for k in volumes})

    # monthly economic indicators; unemployment series begins 2015-08
    months = np.arange(np.datetime64("2012-01"), np.datetime64("2021-04")).astype("datetime64[D]")
    k = len(months)
    cpi = 226.0 * np.exp(np.cumsum(0.0015 + 0.002 * rng.normal(size=k)))
    unemp = np.clip(8.0 - 0.04 * np.arange(k) + 0.15 * rng.normal(size=k), 3.0, None)
    unemp[70:72] += 9.0
    unemp[months < np.datetime64("2015-08-01")] = np.nan
    _write(out / "sources" / "economic.csv", months, {"us_cpi": cpi, "us_unemployment": unemp}, {"us_cpi": ".3f", "us_unemployment": ".2f"})

    (out / "manifest.yaml").write_text(MANIFEST)
    return out


MANIFEST = """\
# Sample source manifest; paths are relative to this file.
sources:
  - path: sources/btc_network.csv
    id: btc
    category: internal
    columns: {price: float, transactions: float, active_addresses: float, hashrate: float, difficulty: float,
              fee_usd: float, sent_usd: float, mining_profitability: float, confirmation_time: float}
  - path: sources/exchanges.csv
    id: bitcoinity
    category: internal
    columns: {exchange_volume: float, bid_ask_spread: float}
  - path: sources/markets.csv
    id: yahoo
    category: market_price
    columns: {gold: float, crude_oil: float, sp500: float, nikkei: float, usd_eur: float}
  - path: sources/market_volumes.csv
    id: yahoo_vol
    category: market_volume
    columns: {sp500_volume: float, gold_volume: float}
  - path: sources/economic.csv
    id: dbnomics
    category: economic
    columns: {us_cpi: float, us_unemployment: float}
"""


def load_btc_close(start="2021-01-01", end="2021-03-31") -> PricePath:
    """Bundled BTC daily closes between two dates (inclusive)."""
    raw = load_csv(data_dir() / "sources" / "btc_network.csv", "internal", {"price": "float"})
    lo, hi = np.datetime64(start, "D"), np.datetime64(end, "D")
    keep = (raw.dates >= lo) & (raw.dates <= hi)
    return PricePath(raw.dates[keep], raw.columns["price"][keep])


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else data_dir()
    print(generate(target))
