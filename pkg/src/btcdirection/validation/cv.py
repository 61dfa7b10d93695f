"""Grid search, two-stage tuning and nested walk-forward cross-validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..audit import FitFingerprint, LeakageError, assert_fit_scope
from ..models import Classifier, DegenerateLabelError, fit_classifier
from ..reduce import ReducePipeline, fit_pipeline
from .folds import FoldPlan, time_series_folds
from .metrics import Metrics, evaluate, mean_metrics
from .search import BayesOptResult, SearchSpace, bayes_opt

log = logging.getLogger(__name__)


@dataclass
class PreparedFold:
    """One train/test split already passed through its own fitted reducer."""

    train_rows: np.ndarray
    test_rows: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    pipeline: ReducePipeline | None = None


def prepare_folds(X, y, plan: FoldPlan, evr_target: float | None, *, reduce: bool = True, scope: str = "train", tag: str = "") -> list[PreparedFold]:
    """Fit the standardizer/PCA per fold (on the fold's training rows) and
    transform both sides.

    ``scope="all"`` fits the reducer on every row instead; it exists only so
    the leakage audit can be exercised.
    """
    out = []
    for i, (tr, te) in enumerate(plan):
        tr, te = np.asarray(tr), np.asarray(te)
        if reduce:
            fit_rows = tr if scope == "train" else np.arange(X.shape[0])
            pipe = fit_pipeline(X, fit_rows, evr_target, tag=f"{tag}fold{i}")
            out.append(PreparedFold(tr, te, pipe.transform(X[tr]), y[tr], pipe.transform(X[te]), y[te], pipe))
        else:
            out.append(PreparedFold(tr, te, X[tr], y[tr], X[te], y[te]))
    return out


def fit_fold_model(kind: str, hp: dict, fold: PreparedFold, seed: int) -> Classifier | None:
    """Fit on a prepared fold; ``None`` when its training labels are single-class."""
    try:
        return fit_classifier(kind, fold.X_train, fold.y_train, hp, seed=seed, rows=fold.train_rows)
    except DegenerateLabelError:
        return None


def fold_probs(model: Classifier | None, fold: PreparedFold) -> np.ndarray:
    if model is None:
        return np.full(len(fold.test_rows), float(fold.y_train[0]))
    return model.predict_proba(fold.X_test)


def cv_accuracy(kind: str, hp: dict, folds: Sequence[PreparedFold], seed: int = 42) -> float:
    """Mean accuracy at threshold 0.5 across folds."""
    accs = []
    for f in folds:
        p = fold_probs(fit_fold_model(kind, hp, f, seed), f)
        accs.append(float(np.mean((p >= 0.5) == (f.y_test == 1))))
    return float(np.mean(accs))


@dataclass
class GridResult:
    best: dict
    best_score: float
    table: list[tuple[dict, float]]
    searches: list[BayesOptResult | None] = field(default_factory=list)


def grid_search(
    kind: str,
    space: SearchSpace,
    folds: Sequence[PreparedFold],
    *,
    budget: int = 0,
    seed: int = 42,
    init_points: int = 5,
) -> GridResult:
    """Exhaustive search over the categorical grid, scored by mean fold accuracy.

    With ``budget > 0`` each grid point's numeric parameters are tuned by
    :func:`bayes_opt` and the point is scored by its best result; otherwise
    numerics take model defaults.  Ties keep the earlier grid entry.
    """
    grid = space.grid()
    if not grid:
        raise ValueError("empty grid")
    if not folds:
        raise ValueError("no folds to score")
    table, searches = [], []
    best, best_score = None, -np.inf
    for point in grid:
        numeric = space.numeric(point)
        base = {**space.fixed, **point}
        if budget > 0 and numeric:
            res = bayes_opt(
                numeric,
                lambda a: cv_accuracy(kind, {**base, **a}, folds, seed),
                budget,
                seed,
                init_points=min(init_points, budget),
            )
            hp, score = {**base, **res.best}, res.best_value
            searches.append(res)
        else:
            hp, score = base, cv_accuracy(kind, base, folds, seed)
            searches.append(None)
        table.append((hp, score))
        if score > best_score:
            best, best_score = hp, score
    return GridResult(best, best_score, table, searches)


@dataclass
class FoldResult:
    index: int
    train: tuple[int, int]
    test: tuple[int, int]
    hp: dict
    inner_score: float
    metrics: Metrics
    probs: list[float]
    labels: list[int]
    fingerprints: list[dict]  # {"fingerprint": ..., "allowed": [start, stop]}

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "train": list(self.train),
            "test": list(self.test),
            "hp": self.hp,
            "inner_score": self.inner_score,
            "metrics": self.metrics.to_dict(),
            "probs": self.probs,
            "labels": self.labels,
            "fingerprints": self.fingerprints,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldResult":
        return cls(
            d["index"], tuple(d["train"]), tuple(d["test"]), d["hp"], d["inner_score"],
            Metrics.from_dict(d["metrics"]), d["probs"], d["labels"], d["fingerprints"],
        )


@dataclass
class CVReport:
    kind: str
    evr_target: float | None
    folds: list[FoldResult]
    mean: Metrics
    pooled: Metrics
    final_hp: dict
    final_model: Classifier | None = None
    final_pipeline: ReducePipeline | None = None

    @property
    def degenerate_all_long(self) -> bool:
        """Every outer-test prediction was class 1."""
        return self.pooled.all_long

    def oof(self) -> tuple[np.ndarray, np.ndarray]:
        """Out-of-fold (outer test) probabilities and labels, in time order."""
        p = np.concatenate([f.probs for f in self.folds])
        y = np.concatenate([f.labels for f in self.folds])
        return p, y

    def to_dict(self, include_model: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "evr_target": self.evr_target,
            "folds": [f.to_dict() for f in self.folds],
            "mean": self.mean.to_dict(),
            "pooled": self.pooled.to_dict(),
            "final_hp": self.final_hp,
            "degenerate_all_long": self.degenerate_all_long,
        }
        if include_model:
            d["final_model"] = None if self.final_model is None else self.final_model.to_dict()
            d["final_pipeline"] = None if self.final_pipeline is None else self.final_pipeline.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CVReport":
        from ..models import classifier_from_dict

        return cls(
            d["kind"],
            d["evr_target"],
            [FoldResult.from_dict(f) for f in d["folds"]],
            Metrics.from_dict(d["mean"]),
            Metrics.from_dict(d["pooled"]),
            d["final_hp"],
            classifier_from_dict(d["final_model"]) if d.get("final_model") else None,
            ReducePipeline.from_dict(d["final_pipeline"]) if d.get("final_pipeline") else None,
        )

    def csv_rows(self) -> list[dict]:
        rows = []
        for f in self.folds:
            rows.append({"fold": f.index, "model": self.kind, "evr_target": self.evr_target, "hp": f.hp, **_metric_cols(f.metrics)})
        rows.append({"fold": "mean", "model": self.kind, "evr_target": self.evr_target, "hp": self.final_hp, **_metric_cols(self.mean)})
        return rows


def _metric_cols(m: Metrics) -> dict:
    return {"accuracy": m.accuracy, "precision": m.precision, "recall": m.recall, "f1": m.f1, "auc": m.auc}


def _scope_entry(fp: FitFingerprint, allowed: np.ndarray) -> dict:
    lo, hi = int(allowed.min()), int(allowed.max()) + 1
    return {"fingerprint": fp.to_dict(), "allowed": [lo, hi]}


def audit_entries(entries: Sequence[dict]) -> list:
    """Re-run fit-scope checks on serialized (fingerprint, allowed range) pairs."""
    reports = []
    for e in entries:
        fp = FitFingerprint.from_dict(e["fingerprint"])
        lo, hi = e["allowed"]
        reports.append(assert_fit_scope(fp, np.arange(lo, hi)))
    return reports


def nested_cv(
    kind: str,
    data,
    outer: FoldPlan,
    space: SearchSpace,
    budget: int,
    seed: int = 42,
    *,
    inner_k: int = 3,
    min_train_fraction: float = 0.5,
    evr_target: float | None = None,
    reduce: bool = True,
    reduce_scope: str = "train",
    allow_leakage_for_demo: bool = False,
    fit_final: bool = True,
    init_points: int = 5,
    progress: Callable[[str], Any] | None = None,
) -> CVReport:
    """Nested time-series CV with per-fold reduction and two-stage tuning.

    For each outer fold the inner folds are carved from the outer training
    rows only, hyperparameters are chosen there (grid over categoricals, GP
    search over numerics), and the refitted model is scored on the outer test
    block.  Every fitted standardizer, PCA and model is checked against the
    rows its fold may use; a violation raises :class:`LeakageError` unless
    ``allow_leakage_for_demo`` is set.  The final model reuses the
    hyperparameters of the outer fold with the best inner score and is fitted
    on all rows.
    """
    X, y = data.X, np.asarray(data.y)
    results: list[FoldResult] = []
    for i, (tr, te) in enumerate(outer):
        tr, te = np.asarray(tr), np.asarray(te)
        inner_plan = time_series_folds(len(tr), inner_k, min_train_fraction).shifted(int(tr[0]))
        sub = X[: tr[-1] + 1] if reduce_scope == "train" else X
        inner = prepare_folds(sub, y[: len(sub)], inner_plan, evr_target, reduce=reduce, scope=reduce_scope, tag=f"outer{i}.inner.")
        scope = []
        for f in inner:
            if f.pipeline is not None:
                scope += [_scope_entry(fp, f.train_rows) for fp in f.pipeline.fingerprints]
        grid = grid_search(kind, space, inner, budget=budget, seed=seed, init_points=init_points)

        outer_fold = prepare_folds(X, y, FoldPlan((((int(tr[0]), int(tr[-1]) + 1), (int(te[0]), int(te[-1]) + 1)),)), evr_target,
                                   reduce=reduce, scope=reduce_scope, tag=f"outer{i}.")[0]
        model = fit_fold_model(kind, grid.best, outer_fold, seed)
        probs = fold_probs(model, outer_fold)
        if outer_fold.pipeline is not None:
            scope += [_scope_entry(fp, tr) for fp in outer_fold.pipeline.fingerprints]
        if model is not None:
            scope.append(_scope_entry(model.fingerprint, tr))
        if not allow_leakage_for_demo:
            failed = [r for r in audit_entries(scope) if not r.passed]
            if failed:
                raise LeakageError(failed)
        m = evaluate(probs, y[te])
        results.append(
            FoldResult(i, (int(tr[0]), int(tr[-1]) + 1), (int(te[0]), int(te[-1]) + 1), grid.best, grid.best_score,
                       m, [float(p) for p in probs], [int(v) for v in y[te]], scope)
        )
        if progress:
            progress(f"{kind} evr={evr_target} fold {i + 1}/{len(outer)}: inner={grid.best_score:.3f} acc={m.accuracy:.3f}")

    best_fold = max(results, key=lambda r: r.inner_score)  # first wins ties
    p_all = np.concatenate([r.probs for r in results])
    y_all = np.concatenate([r.labels for r in results])
    report = CVReport(kind, evr_target, results, mean_metrics([r.metrics for r in results]), evaluate(p_all, y_all), best_fold.hp)
    if fit_final:
        rows = np.arange(len(y))
        pipe = fit_pipeline(X, rows, evr_target, tag="final") if reduce else None
        Xf = pipe.transform(X) if pipe is not None else X
        report.final_pipeline = pipe
        report.final_model = fit_classifier(kind, Xf, y, best_fold.hp, seed=seed, rows=rows)
    return report
