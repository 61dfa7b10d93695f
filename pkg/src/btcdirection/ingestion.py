"""Loading daily CSV sources onto a common calendar and imputing gaps.

Missing cells are ``NaN`` throughout.  Dates are ``numpy.datetime64[D]``.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

log = logging.getLogger(__name__)

MISSING = np.nan
DAY = np.timedelta64(1, "D")


class SchemaError(ValueError):
    """A CSV cell could not be parsed according to the declared schema."""


class IntegrityError(ValueError):
    """Duplicate dates, colliding column names, or broken calendar invariants."""


class ConfigurationError(ValueError):
    pass


class EmptyRangeError(ValueError):
    """No window without missing cells exists."""


class Category(str, enum.Enum):
    INTERNAL = "internal"
    MARKET_PRICE = "market_price"
    MARKET_VOLUME = "market_volume"
    ECONOMIC = "economic"


class Rule(str, enum.Enum):
    LINEAR = "linear"
    FORWARD_FILL = "ffill"
    ZERO = "zero"


DEFAULT_RULES: dict[Category, Rule] = {
    Category.INTERNAL: Rule.LINEAR,
    Category.MARKET_PRICE: Rule.FORWARD_FILL,
    Category.MARKET_VOLUME: Rule.ZERO,
    Category.ECONOMIC: Rule.FORWARD_FILL,
}


def to_date(value) -> np.datetime64:
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, (dt.date, dt.datetime)):
        return np.datetime64(value.isoformat()[:10], "D")
    return np.datetime64(str(value), "D")


@dataclass(frozen=True)
class RawSeries:
    source_id: str
    dates: np.ndarray
    columns: dict[str, np.ndarray]
    category: Category

    def __post_init__(self):
        if self.dates.size > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise IntegrityError(f"{self.source_id}: dates must be strictly increasing")
        for name, col in self.columns.items():
            if len(col) != len(self.dates):
                raise IntegrityError(f"{self.source_id}.{name}: length {len(col)} != {len(self.dates)} dates")

    def __len__(self) -> int:
        return len(self.dates)


def load_csv(
    path: str | Path,
    category: Category | str,
    schema: Mapping[str, str] | None = None,
    source_id: str | None = None,
) -> RawSeries:
    """Read one source file: ``date`` column first, real-valued columns after.

    ``schema`` maps column name to type (only ``"float"`` is supported).  When
    given, exactly those columns are kept and each must be present.
    """
    path = Path(path)
    category = Category(category)
    source_id = source_id or path.stem
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if not header or header[0].lower() != "date":
            raise SchemaError(f"{path}: first column must be 'date', got {header[:1]}")
        names = header[1:]
        if len(set(names)) != len(names):
            raise IntegrityError(f"{path}: duplicate column names in header")
        if schema is not None:
            for col, kind in schema.items():
                if col not in names:
                    raise SchemaError(f"{path}: column {col!r} declared in schema but missing from header")
                if kind not in ("float", "real", "number"):
                    raise SchemaError(f"{path}: unsupported type {kind!r} for column {col!r}")
        keep = [i for i, n in enumerate(names) if schema is None or n in schema]

        dates: list[np.datetime64] = []
        values: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            try:
                dates.append(np.datetime64(dt.date.fromisoformat(row[0].strip()), "D"))
            except ValueError:
                raise SchemaError(f"{path}: row {lineno}, column 'date': bad ISO date {row[0]!r}") from None
            parsed = []
            for i in keep:
                cell = row[i + 1].strip()
                if cell == "":
                    parsed.append(MISSING)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise SchemaError(f"{path}: row {lineno}, column {names[i]!r}: not a number: {cell!r}") from None
            values.append(parsed)

    date_arr = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(date_arr, kind="stable")
    date_arr = date_arr[order]
    dup = np.flatnonzero(np.diff(date_arr) == np.timedelta64(0, "D"))
    if dup.size:
        raise IntegrityError(f"{path}: duplicate date {date_arr[dup[0]]}")
    matrix = np.array(values, dtype=float).reshape(len(dates), len(keep))[order]
    columns = {names[i]: matrix[:, j].copy() for j, i in enumerate(keep)}
    return RawSeries(source_id, date_arr, columns, category)


@dataclass(frozen=True)
class CalendarFrame:
    """Contiguous daily table; every column is a float array, NaN = missing."""

    dates: np.ndarray
    columns: dict[str, np.ndarray]
    categories: dict[str, Category] = field(default_factory=dict)

    def __post_init__(self):
        if self.dates.size > 1 and not np.all(np.diff(self.dates) == DAY):
            raise IntegrityError("calendar must be contiguous daily")
        for name, col in self.columns.items():
            if len(col) != len(self.dates):
                raise IntegrityError(f"column {name!r} has length {len(col)}, calendar has {len(self.dates)}")
            col.setflags(write=False)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def start(self) -> np.datetime64:
        return self.dates[0]

    @property
    def end(self) -> np.datetime64:
        return self.dates[-1]

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.columns[n] for n in names])

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.matrix())

    def n_missing(self) -> int:
        return int(self.missing_mask().sum())

    def row_of(self, date) -> int:
        d = to_date(date)
        i = int((d - self.dates[0]) // DAY)
        if not 0 <= i < len(self):
            raise KeyError(f"{d} outside calendar {self.start}..{self.end}")
        return i

    def slice(self, start=None, end=None) -> "CalendarFrame":
        """Rows with ``start <= date <= end`` (inclusive)."""
        lo = 0 if start is None else max(0, int((to_date(start) - self.dates[0]) // DAY))
        hi = len(self) if end is None else min(len(self), int((to_date(end) - self.dates[0]) // DAY) + 1)
        return CalendarFrame(
            self.dates[lo:hi], {n: c[lo:hi].copy() for n, c in self.columns.items()}, dict(self.categories)
        )

    def with_columns(self, new: Mapping[str, np.ndarray], category: Category | None = None) -> "CalendarFrame":
        clash = set(new) & set(self.columns)
        if clash:
            raise IntegrityError(f"column name collision: {sorted(clash)}")
        cols = dict(self.columns)
        cols.update(new)
        cats = dict(self.categories)
        if category is not None:
            cats.update({n: category for n in new})
        return CalendarFrame(self.dates, cols, cats)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.names])
            mat = self.matrix()
            for d, row in zip(self.dates, mat):
                w.writerow([str(d), *("" if np.isnan(v) else repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path: str | Path, categories: Mapping[str, str] | None = None) -> "CalendarFrame":
        raw = load_csv(path, Category.INTERNAL)
        if raw.dates.size and not np.all(np.diff(raw.dates) == DAY):
            raise IntegrityError(f"{path}: dates are not a contiguous calendar")
        cats = {n: Category((categories or {}).get(n, Category.INTERNAL)) for n in raw.columns}
        return cls(raw.dates, raw.columns, cats)


def align_calendar(series: Sequence[RawSeries], start, end) -> CalendarFrame:
    """Place every source column on the daily calendar ``[start, end]``.

    Columns are named ``source_id.column``; days a source does not cover are
    missing.  No values are created.
    """
    start, end = to_date(start), to_date(end)
    if start > end:
        raise ValueError(f"start {start} is after end {end}")
    dates = np.arange(start, end + DAY, DAY)
    n = len(dates)
    columns: dict[str, np.ndarray] = {}
    categories: dict[str, Category] = {}
    for s in series:
        pos = ((s.dates - start) // DAY).astype(np.int64)
        inside = (pos >= 0) & (pos < n)
        for name, col in s.columns.items():
            full = f"{s.source_id}.{name}"
            if full in columns:
                raise IntegrityError(f"column name collision: {full}")
            out = np.full(n, MISSING)
            out[pos[inside]] = col[inside]
            columns[full] = out
            categories[full] = s.category
    return CalendarFrame(dates, columns, categories)


def _interpolate_interior(col: np.ndarray) -> np.ndarray:
    out = col.copy()
    obs = np.flatnonzero(~np.isnan(col))
    if obs.size < 2:
        return out
    inner = np.arange(obs[0], obs[-1] + 1)
    out[inner] = np.interp(inner, obs, col[obs])
    return out


def _forward_fill(col: np.ndarray) -> np.ndarray:
    valid = ~np.isnan(col)
    idx = np.where(valid, np.arange(len(col)), -1)
    np.maximum.accumulate(idx, out=idx)
    out = np.where(idx >= 0, col[np.maximum(idx, 0)], MISSING)
    return out


def _zero_fill(col: np.ndarray) -> np.ndarray:
    valid = ~np.isnan(col)
    if not valid.any():
        return col.copy()
    first = int(np.argmax(valid))
    out = col.copy()
    gaps = np.isnan(out)
    gaps[:first] = False
    out[gaps] = 0.0
    return out


_FILLERS = {Rule.LINEAR: _interpolate_interior, Rule.FORWARD_FILL: _forward_fill, Rule.ZERO: _zero_fill}


def impute(frame: CalendarFrame, rules: Mapping[Category | str, Rule | str] | None = None) -> CalendarFrame:
    """Fill gaps column by column according to each column's category.

    Leading gaps stay missing under every rule; linear interpolation also
    leaves trailing gaps.  Interpolation reads the next observation, so it is
    only configured for internal network data.
    """
    rules = DEFAULT_RULES if rules is None else {Category(k): Rule(v) for k, v in rules.items()}
    cols = {}
    for name, col in frame.columns.items():
        cat = frame.categories.get(name)
        if cat is None or cat not in rules:
            raise ConfigurationError(f"no imputation rule for column {name!r} (category {cat})")
        cols[name] = _FILLERS[rules[cat]](np.asarray(col, dtype=float))
    return CalendarFrame(frame.dates, cols, dict(frame.categories))


def complete_rows(frame: CalendarFrame) -> np.ndarray:
    return ~frame.missing_mask().any(axis=1) if frame.columns else np.ones(len(frame), dtype=bool)


def select_training_range(frame: CalendarFrame) -> tuple[np.datetime64, np.datetime64]:
    """Longest run of days on which every column is observed.

    Ties go to the later run.
    """
    ok = complete_rows(frame)
    if not ok.any():
        raise EmptyRangeError("no day has every column observed")
    padded = np.concatenate(([False], ok, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    lengths = stops - starts
    best = np.flatnonzero(lengths == lengths.max())[-1]
    return frame.dates[starts[best]], frame.dates[stops[best] - 1]


@dataclass(frozen=True)
class SourceSpec:
    path: Path
    category: Category
    columns: dict[str, str] | None = None
    source_id: str | None = None

    def load(self) -> RawSeries:
        return load_csv(self.path, self.category, self.columns, self.source_id)


def load_manifest(path: str | Path) -> list[SourceSpec]:
    """Parse a source manifest (YAML or JSON) into source specs.

    Relative ``path`` entries resolve against the manifest's directory::

        sources:
          - path: sources/btc_network.csv
            category: internal
            id: btc
            columns: {price: float, transactions: float}
    """
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    entries = doc.get("sources") if isinstance(doc, dict) else doc
    if not entries:
        raise ConfigurationError(f"{path}: manifest lists no sources")
    specs = []
    for i, e in enumerate(entries):
        try:
            p = Path(e["path"])
            cat = Category(e["category"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"{path}: source #{i}: {exc}") from None
        if not p.is_absolute():
            p = path.parent / p
        specs.append(SourceSpec(p, cat, e.get("columns"), e.get("id")))
    return specs


def load_sources(specs: Iterable[SourceSpec]) -> list[RawSeries]:
    out = []
    for spec in specs:
        s = spec.load()
        log.info("loaded %s: %d rows, %d columns", s.source_id, len(s), len(s.columns))
        out.append(s)
    return out
