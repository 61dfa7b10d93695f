"""Technical indicators, calendar encodings and the next-day direction target."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingestion import CalendarFrame, Category, IntegrityError


class WarmupError(ValueError):
    """Series too short to produce any value for the requested indicator."""


class Kind(str, enum.Enum):
    SMA = "SMA"
    EMA = "EMA"
    WMA = "WMA"
    RSI = "RSI"
    ROC = "ROC"
    MOM = "MOM"
    STDDEV = "STDDEV"
    VAR = "VAR"
    TRIX = "TRIX"


DEFAULT_WINDOWS = (3, 7, 14, 30, 90)


@dataclass(frozen=True)
class IndicatorSpec:
    kind: Kind
    window: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.window) != self.window or self.window < 2:
            raise ValueError(f"indicator window must be an integer >= 2, got {self.window}")
        object.__setattr__(self, "window", int(self.window))

    @property
    def warmup(self) -> int:
        """Number of leading outputs that are undefined."""
        w = self.window
        if self.kind in (Kind.MOM, Kind.ROC, Kind.RSI):
            return w
        if self.kind is Kind.TRIX:
            return 3 * (w - 1) + 1
        return w - 1

    def name(self, base: str) -> str:
        return f"{base}.{self.kind.value}.{self.window}"


def default_specs(windows: Sequence[int] = DEFAULT_WINDOWS) -> list[IndicatorSpec]:
    return [IndicatorSpec(k, w) for k in Kind for w in windows]


def _rolling(x: np.ndarray, w: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, w)


def _ema(x: np.ndarray, w: int) -> np.ndarray:
    # NaN until index w-1, then seeded with the SMA of the first w values.
    out = np.full(len(x), np.nan)
    if len(x) < w:
        return out
    a = 2.0 / (w + 1)
    prev = float(np.mean(x[:w]))
    out[w - 1] = prev
    for t in range(w, len(x)):
        prev = a * x[t] + (1 - a) * prev
        out[t] = prev
    return out


def _ema_of_defined(x: np.ndarray, w: int) -> np.ndarray:
    out = np.full(len(x), np.nan)
    defined = np.flatnonzero(~np.isnan(x))
    if defined.size:
        s = defined[0]
        out[s:] = _ema(x[s:], w)
    return out


def _rsi(x: np.ndarray, w: int) -> np.ndarray:
    out = np.full(len(x), np.nan)
    d = np.diff(x)
    gains = np.clip(d, 0, None)
    losses = np.clip(-d, 0, None)
    ag = float(np.mean(gains[:w]))
    al = float(np.mean(losses[:w]))

    def value(g: float, l: float) -> float:
        if l == 0.0:
            return 50.0 if g == 0.0 else 100.0
        return 100.0 - 100.0 / (1.0 + g / l)

    out[w] = value(ag, al)
    for t in range(w + 1, len(x)):
        ag = (ag * (w - 1) + gains[t - 1]) / w
        al = (al * (w - 1) + losses[t - 1]) / w
        out[t] = value(ag, al)
    return out


def _pct_change(cur: np.ndarray, prev: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 100.0 * (cur - prev) / prev
    return np.where(prev == 0, 0.0, out)


def compute_indicator(series, spec: IndicatorSpec) -> np.ndarray:
    """One indicator over a fully observed series; warm-up entries are NaN.

    Each output value depends only on inputs at or before its index.
    """
    x = np.asarray(series, dtype=float)
    if np.isnan(x).any():
        raise ValueError("indicator input must not contain missing values")
    w = spec.window
    if len(x) <= spec.warmup:
        raise WarmupError(f"{spec.kind.value}({w}) needs more than {spec.warmup} values, got {len(x)}")
    out = np.full(len(x), np.nan)
    k = spec.kind
    if k is Kind.SMA:
        out[w - 1 :] = _rolling(x, w).mean(axis=1)
    elif k is Kind.EMA:
        out = _ema(x, w)
    elif k is Kind.WMA:
        weights = np.arange(1, w + 1, dtype=float)
        out[w - 1 :] = _rolling(x, w) @ weights / weights.sum()
    elif k is Kind.MOM:
        out[w:] = x[w:] - x[:-w]
    elif k is Kind.ROC:
        out[w:] = _pct_change(x[w:], x[:-w])
    elif k is Kind.RSI:
        out = _rsi(x, w)
    elif k is Kind.STDDEV:
        out[w - 1 :] = _rolling(x, w).std(axis=1, ddof=1)
    elif k is Kind.VAR:
        out[w - 1 :] = _rolling(x, w).var(axis=1, ddof=1)
    elif k is Kind.TRIX:
        e3 = _ema_of_defined(_ema_of_defined(_ema(x, w), w), w)
        s = 3 * (w - 1)
        out[s + 1 :] = _pct_change(e3[s + 1 :], e3[s:-1])
    return out


def _observed_block(col: np.ndarray, name: str) -> tuple[int, int]:
    obs = np.flatnonzero(~np.isnan(col))
    if obs.size == 0:
        raise ValueError(f"base column {name!r} has no observations")
    lo, hi = int(obs[0]), int(obs[-1]) + 1
    if obs.size != hi - lo:
        raise ValueError(f"base column {name!r} has interior gaps; impute first")
    return lo, hi


def expand_features(frame: CalendarFrame, base_columns: Sequence[str], specs: Sequence[IndicatorSpec]) -> CalendarFrame:
    """Add one ``base.KIND.window`` column per (base column, spec) pair.

    A base column may have leading or trailing missing days (a source that
    starts late); indicators are computed over its observed block and the
    rest stays missing.
    """
    if not specs:
        return frame
    new: dict[str, np.ndarray] = {}
    for base in base_columns:
        if base not in frame.columns:
            raise KeyError(f"unknown base column {base!r}")
        col = frame.columns[base]
        lo, hi = _observed_block(col, base)
        for spec in specs:
            name = spec.name(base)
            if name in new or name in frame.columns:
                raise IntegrityError(f"column name collision: {name}")
            out = np.full(len(col), np.nan)
            if hi - lo > spec.warmup:
                out[lo:hi] = compute_indicator(col[lo:hi], spec)
            new[name] = out
    category = None
    cats = {frame.categories.get(b) for b in base_columns}
    if len(cats) == 1:
        category = cats.pop()
    return frame.with_columns(new, category or Category.INTERNAL)


CYCLICAL_NAMES = ("dow_sin", "dow_cos", "dom_sin", "dom_cos")


def day_of_week(dates) -> np.ndarray:
    """Monday = 0 ... Sunday = 6."""
    days = np.asarray(dates, dtype="datetime64[D]").astype(np.int64)
    return (days + 3) % 7  # 1970-01-01 was a Thursday


def day_of_month(dates) -> np.ndarray:
    d = np.asarray(dates, dtype="datetime64[D]")
    return (d - d.astype("datetime64[M]")).astype(np.int64) + 1


def cyclical_time_features(dates) -> np.ndarray:
    """``(n, 4)`` array: sin/cos of weekday (period 7) and day of month (period 31)."""
    a = 2 * np.pi * day_of_week(dates) / 7.0
    b = 2 * np.pi * (day_of_month(dates) - 1) / 31.0
    return np.column_stack([np.sin(a), np.cos(a), np.sin(b), np.cos(b)])


def make_target(close, lag: int = 1) -> np.ndarray:
    """``y[t] = 1`` iff ``close[t + lag] > close[t]``; a flat day is 0.

    The result has ``len(close) - lag`` entries.
    """
    c = np.asarray(close, dtype=float)
    if lag < 1:
        raise ValueError("lag must be positive")
    if lag >= len(c):
        raise ValueError(f"lag {lag} leaves no labelled rows for a series of length {len(c)}")
    if np.isnan(c).any():
        raise ValueError("close series must be fully observed")
    return (c[lag:] > c[:-lag]).astype(np.int8)


@dataclass(frozen=True)
class LabeledDataset:
    dates: np.ndarray
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        if not (len(self.dates) == self.X.shape[0] == len(self.y)):
            raise ValueError("dates, X and y must have the same number of rows")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names does not match X")
        if np.isnan(self.X).any():
            raise ValueError("dataset contains missing values")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, rows) -> "LabeledDataset":
        return LabeledDataset(self.dates[rows], self.X[rows], self.y[rows], list(self.feature_names))


def feature_matrix(frame: CalendarFrame, columns: Sequence[str] | None = None) -> tuple[np.ndarray, list[str]]:
    """Frame columns plus cyclical calendar features as one matrix."""
    names = frame.names if columns is None else list(columns)
    X = np.column_stack([frame.matrix(names), cyclical_time_features(frame.dates)])
    return X, [*names, *CYCLICAL_NAMES]


def build_dataset(frame: CalendarFrame, target_column: str, lag: int = 1, start=None, end=None) -> LabeledDataset:
    """Labelled rows for days in ``[start, end]``.

    Labels may read closes after ``end`` when the frame has them; otherwise
    the last ``lag`` rows are dropped.
    """
    close = frame.columns[target_column]
    lo = 0 if start is None else frame.row_of(start)
    hi = len(frame) - 1 if end is None else frame.row_of(end)
    last_labelled = min(hi, len(frame) - 1 - lag)
    rows = np.arange(lo, last_labelled + 1)
    y = make_target(close[lo : last_labelled + 1 + lag], lag)
    X, names = feature_matrix(frame)
    return LabeledDataset(frame.dates[rows], X[rows], y, names)
