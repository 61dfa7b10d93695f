"""One-unit daily long/short backtest with a confidence-gated abstention band.

A prediction made at day ``t``'s close concerns day ``t + 1``: the position is
opened at ``close[t]`` and neutralised at ``close[t + 1]``.  No fees.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .validation.metrics import roc_curve


class Side(str, enum.Enum):
    LONG = "long"
    SHORT = "short"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class PricePath:
    dates: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        close = np.asarray(self.close, dtype=float)
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if close.ndim != 1 or close.size == 0:
            raise ValueError("price path must be a non-empty 1-D series")
        if len(dates) != len(close):
            raise ValueError("dates and close differ in length")
        if not np.all(np.isfinite(close)) or np.any(close <= 0):
            raise ValueError("close prices must be finite and strictly positive")
        if len(dates) > 1 and not np.all(np.diff(dates) == np.timedelta64(1, "D")):
            raise ValueError("price dates must be contiguous days")
        object.__setattr__(self, "close", close)
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return len(self.close)

    @classmethod
    def from_array(cls, close, start: str = "2021-01-01") -> "PricePath":
        close = np.asarray(close, dtype=float)
        return cls(np.datetime64(start, "D") + np.arange(len(close)), close)


@dataclass(frozen=True)
class RiskPolicy:
    t_star: float = 0.5
    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.t_star < 1.0:
            raise ValueError(f"t_star must lie in (0, 1), got {self.t_star}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class Trade:
    date: np.datetime64
    side: Side
    entry: float
    exit: float
    pnl: float
    confidence: float


@dataclass(frozen=True)
class TradeLedger:
    entries: tuple[Trade, ...]
    cumulative_pnl: np.ndarray

    @property
    def total_pnl(self) -> float:
        return float(self.cumulative_pnl[-1]) if len(self.cumulative_pnl) else 0.0

    @property
    def pnl(self) -> np.ndarray:
        return np.array([t.pnl for t in self.entries])

    @property
    def sides(self) -> list[Side]:
        return [t.side for t in self.entries]

    def traded_days(self) -> set:
        return {t.date for t in self.entries if t.side is not Side.ABSTAIN}

    def net_positions(self) -> np.ndarray:
        """Position held after each day's exit leg; always zero."""
        out = np.zeros(len(self.entries))
        pos = 0
        for k, t in enumerate(self.entries):
            opened = {Side.LONG: 1, Side.SHORT: -1, Side.ABSTAIN: 0}[t.side]
            pos += opened  # entry at close[t]
            pos -= opened  # neutralised at close[t + 1]
            out[k] = pos
        return out

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "side", "entry", "exit", "pnl", "cum_pnl"])
            for t, cum in zip(self.entries, self.cumulative_pnl):
                w.writerow([str(t.date), t.side.value, repr(t.entry), repr(t.exit), repr(t.pnl), repr(float(cum))])


def gmean_scores(probs, labels) -> tuple[np.ndarray, np.ndarray]:
    """Candidate thresholds and their ``sqrt(TPR * (1 - FPR))``.

    Candidates are the distinct scores and the midpoints between neighbours,
    so a gap between classes is represented by its centre.
    """
    p = np.asarray(probs, dtype=float)
    lab = np.asarray(labels).astype(bool)
    u = np.unique(p)
    cands = np.unique(np.concatenate((u, (u[1:] + u[:-1]) / 2)))
    n_pos, n_neg = lab.sum(), (~lab).sum()
    tpr = np.array([(p[lab] >= c).sum() / n_pos for c in cands])
    fpr = np.array([(p[~lab] >= c).sum() / n_neg for c in cands])
    return cands, np.sqrt(tpr * (1 - fpr))


def optimal_threshold(probs, labels) -> float:
    """Threshold maximising the ROC geometric mean; ties go to the one closest to 0.5."""
    lab = np.asarray(labels).astype(bool)
    if lab.all() or not lab.any():
        raise ValueError("optimal threshold needs both classes")
    cands, g = gmean_scores(probs, lab)
    best = np.flatnonzero(np.isclose(g, g.max(), rtol=0, atol=1e-12))
    t = float(cands[best[np.argmin(np.abs(cands[best] - 0.5))]])
    eps = 1e-9
    return min(max(t, eps), 1 - eps)


def roc_gmean_curve(probs, labels):
    """ROC points and their geometric means (for reporting)."""
    fpr, tpr, thr = roc_curve(probs, labels)
    return fpr, tpr, thr, np.sqrt(tpr * (1 - fpr))


# confidences that equal the band edge in exact arithmetic still trade
_BAND_EPS = 1e-12


def confidence(p: float, policy: RiskPolicy) -> tuple[Side, float]:
    """Side implied by ``p`` and its normalised confidence beyond the pivot.

    Returns ``ABSTAIN`` when the confidence is below ``1 - tau``.
    """
    t = policy.t_star
    if p >= t:
        side, c = Side.LONG, (p - t) / (1 - t)
    else:
        side, c = Side.SHORT, (t - p) / t
    c = min(max(c, 0.0), 1.0)
    if c >= 1.0 - policy.tau - _BAND_EPS:
        return side, c
    return Side.ABSTAIN, c


def _cumulative(entries: Sequence[Trade]) -> np.ndarray:
    """Running total of per-trade P&L, each entry correctly rounded.

    Sums are kept exact so an always-long ledger telescopes to
    ``close[-1] - close[0]`` bit for bit.
    """
    acc = Fraction(0)
    out = np.zeros(len(entries))
    for k, t in enumerate(entries):
        if t.side is Side.LONG:
            acc += Fraction(t.exit) - Fraction(t.entry)
        elif t.side is Side.SHORT:
            acc += Fraction(t.entry) - Fraction(t.exit)
        out[k] = float(acc)
    return out


def run_backtest(prices: PricePath, probs, policy: RiskPolicy) -> TradeLedger:
    """Trade one unit per day from ``probs[t]`` and flatten the next day.

    ``probs`` may cover every day of the path (the last is ignored) or every
    day but the last.
    """
    p = np.asarray(probs, dtype=float)
    n = len(prices)
    if p.ndim != 1 or len(p) not in (n, n - 1):
        raise ValueError(f"{len(p)} probabilities do not align with {n} prices")
    c = prices.close
    entries = []
    for t in range(n - 1):
        side, conf = confidence(float(p[t]), policy)
        if side is Side.LONG:
            pnl = c[t + 1] - c[t]
        elif side is Side.SHORT:
            pnl = c[t] - c[t + 1]
        else:
            pnl = 0.0
        entries.append(Trade(prices.dates[t], side, float(c[t]), float(c[t + 1]), float(pnl), conf))
    return TradeLedger(tuple(entries), _cumulative(entries))


def buy_and_hold(prices: PricePath) -> np.ndarray:
    """Cumulative P&L of holding one unit from the first close."""
    return prices.close - prices.close[0]


def total_return(prices: PricePath) -> float:
    return float(prices.close[-1] / prices.close[0] - 1.0)


def tau_sweep(prices: PricePath, probs, t_star: float, taus: Iterable[float]) -> dict[float, TradeLedger]:
    return {float(tau): run_backtest(prices, probs, RiskPolicy(t_star, float(tau))) for tau in taus}


def flipped(ledger: TradeLedger) -> TradeLedger:
    """Same days with every traded side reversed."""
    swap = {Side.LONG: Side.SHORT, Side.SHORT: Side.LONG, Side.ABSTAIN: Side.ABSTAIN}
    entries = tuple(Trade(t.date, swap[t.side], t.entry, t.exit, -t.pnl if t.side is not Side.ABSTAIN else 0.0, t.confidence) for t in ledger.entries)
    return TradeLedger(entries, _cumulative(entries))


def summarize(ledgers: dict[float, TradeLedger], prices: PricePath) -> list[dict]:
    bh = float(buy_and_hold(prices)[-1])
    rows = []
    for tau, led in sorted(ledgers.items()):
        sides: Sequence[Side] = led.sides
        rows.append(
            {
                "tau": tau,
                "pnl": led.total_pnl,
                "buy_and_hold_pnl": bh,
                "relative_to_buy_and_hold": (led.total_pnl - bh) / abs(bh) if bh else float("nan"),
                "n_long": sum(s is Side.LONG for s in sides),
                "n_short": sum(s is Side.SHORT for s in sides),
                "n_abstain": sum(s is Side.ABSTAIN for s in sides),
            }
        )
    return rows
