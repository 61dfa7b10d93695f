"""Fit-scope auditing and the leaky-versus-clean training demonstration.

Every fitted transformer and classifier carries a :class:`FitFingerprint`
recording which row indices it saw.  :func:`assert_fit_scope` checks those
rows against the rows a fold is allowed to touch.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .validation.metrics import Metrics


class LeakageError(RuntimeError):
    """Raised when a fitted artifact saw rows outside its allowed scope."""

    def __init__(self, reports: Sequence["ScopeReport"]):
        self.reports = list(reports)
        names = ", ".join(r.artifact_id for r in self.reports)
        super().__init__(f"fit-scope violation in: {names}")


def _as_index_array(indices: Iterable[int]) -> np.ndarray:
    if not isinstance(indices, np.ndarray):
        indices = np.fromiter(indices, dtype=np.int64)
    arr = np.unique(indices.astype(np.int64, copy=False))
    if arr.size and arr[0] < 0:
        raise ValueError("row indices must be non-negative")
    return arr


def _to_ranges(sorted_idx: np.ndarray) -> list[tuple[int, int]]:
    if sorted_idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(sorted_idx) != 1)
    starts = np.concatenate(([sorted_idx[0]], sorted_idx[breaks + 1]))
    stops = np.concatenate((sorted_idx[breaks] + 1, [sorted_idx[-1] + 1]))
    return [(int(a), int(b)) for a, b in zip(starts, stops)]


def index_digest(indices: Iterable[int]) -> str:
    """Order-independent SHA-256 digest of a set of row indices."""
    arr = _as_index_array(indices)
    return hashlib.sha256(arr.astype("<i8").tobytes()).hexdigest()


@dataclass(frozen=True)
class FitFingerprint:
    """Which rows a fit operation consumed.

    Rows are kept as half-open ``(start, stop)`` runs so subset checks can name
    the offending indices; ``row_index_digest`` is the canonical identity.
    """

    artifact_id: str
    row_index_digest: str
    ranges: tuple[tuple[int, int], ...] = field(default=())

    @classmethod
    def from_indices(cls, artifact_id: str, indices: Iterable[int]) -> "FitFingerprint":
        arr = _as_index_array(indices)
        return cls(artifact_id, index_digest(arr), tuple(_to_ranges(arr)))

    def indices(self) -> np.ndarray:
        if not self.ranges:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.arange(a, b, dtype=np.int64) for a, b in self.ranges])

    @property
    def n_rows(self) -> int:
        return sum(b - a for a, b in self.ranges)

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "row_index_digest": self.row_index_digest,
            "ranges": [list(r) for r in self.ranges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitFingerprint":
        fp = cls(d["artifact_id"], d["row_index_digest"], tuple((int(a), int(b)) for a, b in d["ranges"]))
        if index_digest(fp.indices()) != fp.row_index_digest:
            raise ValueError(f"fingerprint {fp.artifact_id!r}: digest does not match its ranges")
        return fp


@dataclass(frozen=True)
class ScopeReport:
    artifact_id: str
    passed: bool
    offending: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"artifact_id": self.artifact_id, "passed": self.passed, "offending": list(self.offending)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def assert_fit_scope(fingerprint: FitFingerprint, allowed: Iterable[int]) -> ScopeReport:
    """Pass iff every row the artifact was fitted on lies in ``allowed``.

    A violation is returned, not raised; callers decide whether it is fatal.
    """
    seen = fingerprint.indices()
    bad = np.setdiff1d(seen, _as_index_array(allowed), assume_unique=True)
    return ScopeReport(fingerprint.artifact_id, bad.size == 0, tuple(int(i) for i in bad))


def check_all(pairs: Iterable[tuple[FitFingerprint, Iterable[int]]], *, raise_on_violation: bool = True) -> list[ScopeReport]:
    reports = [assert_fit_scope(fp, allowed) for fp, allowed in pairs]
    failed = [r for r in reports if not r.passed]
    if failed and raise_on_violation:
        raise LeakageError(failed)
    return reports


@dataclass(frozen=True)
class LeakComparison:
    leaky: Metrics
    clean: Metrics
    n_train: int
    n_test: int

    @property
    def accuracy_gain(self) -> float:
        return self.leaky.accuracy - self.clean.accuracy

    def to_dict(self) -> dict:
        return {
            "leaky": self.leaky.to_dict(),
            "clean": self.clean.to_dict(),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "accuracy_gain": self.accuracy_gain,
        }


def leaky_vs_clean(
    data,
    kind: str,
    hp: dict | None = None,
    *,
    seed: int = 42,
    test_fraction: float = 0.2,
    evr_target: float | None = None,
) -> LeakComparison:
    """Score one model trained with the test block included and one without.

    The last ``test_fraction`` of rows (time order) is the test block.  The
    leaky model (and its optional standardizer/PCA) is fitted on every row; the
    clean one only on the rows before the test block.  Both are scored on the
    test block.
    """
    from .models import fit_classifier
    from .reduce import fit_pipeline
    from .validation.metrics import evaluate

    n = len(data.y)
    if n < 100:
        raise ValueError(f"leaky_vs_clean needs at least 100 rows, got {n}")
    n_test = max(1, int(round(n * test_fraction)))
    split = n - n_test
    test_rows = np.arange(split, n)

    results = {}
    for label, rows in (("leaky", np.arange(n)), ("clean", np.arange(split))):
        X_fit, X_test = data.X[rows], data.X[test_rows]
        if evr_target is not None:
            pipe = fit_pipeline(data.X, rows, evr_target)
            X_fit, X_test = pipe.transform(X_fit), pipe.transform(X_test)
        model = fit_classifier(kind, X_fit, data.y[rows], hp or {}, seed=seed, rows=rows)
        results[label] = evaluate(model.predict_proba(X_test), data.y[test_rows])
    return LeakComparison(results["leaky"], results["clean"], split, n_test)
