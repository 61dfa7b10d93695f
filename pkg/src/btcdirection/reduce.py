"""Standardization and PCA, fitted on an explicit set of training rows."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audit import FitFingerprint

# Cumulative-variance comparisons tolerate this much rounding.
_EVR_EPS = 1e-10


def _scope(X: np.ndarray, row_scope) -> np.ndarray:
    rows = np.arange(X.shape[0]) if row_scope is None else np.asarray(row_scope, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("row scope is empty")
    return rows


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    fingerprint: FitFingerprint

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.means.size:
            raise ValueError(f"expected {self.means.size} features, got {X.shape[1]}")
        return (X - self.means) / self.stds

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(), "fingerprint": self.fingerprint.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["means"]), np.array(d["stds"]), FitFingerprint.from_dict(d["fingerprint"]))


def fit_standardizer(X: np.ndarray, row_scope=None, artifact_id: str = "standardizer") -> Standardizer:
    """Column means and sample standard deviations over ``row_scope`` only.

    Constant columns get std 1 so they map to zero instead of dividing by zero.
    """
    X = np.asarray(X, dtype=float)
    rows = _scope(X, row_scope)
    sub = X[rows]
    if not np.isfinite(sub).all():
        raise ValueError("standardizer input has non-finite values in scope")
    means = sub.mean(axis=0)
    stds = sub.std(axis=0, ddof=1) if len(rows) > 1 else np.zeros(X.shape[1])
    stds = np.where(stds > 0, stds, 1.0)
    return Standardizer(means, stds, FitFingerprint.from_indices(artifact_id, rows))


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of standardized data.

    ``components`` has shape ``(k, n_features)``; ``evr_all`` holds the
    explained-variance ratio of every axis, the first ``k`` of which are kept.
    """

    mean: np.ndarray
    components: np.ndarray
    evr_all: np.ndarray
    target: float
    fingerprint: FitFingerprint

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def evr(self) -> np.ndarray:
        return self.evr_all[: self.k]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "evr_all": self.evr_all.tolist(),
            "target": self.target,
            "k": self.k,
            "fingerprint": self.fingerprint.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        comps = np.array(d["components"], dtype=float).reshape(-1, len(d["mean"]))
        return cls(np.array(d["mean"]), comps, np.array(d["evr_all"]), float(d["target"]), FitFingerprint.from_dict(d["fingerprint"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def n_components_for(evr: np.ndarray, target: float) -> int:
    cum = np.cumsum(evr)
    k = int(np.searchsorted(cum, target - _EVR_EPS) + 1)
    return min(k, int(np.count_nonzero(evr > _EVR_EPS)) or 1)


def fit_pca(X_std: np.ndarray, target: float, row_scope=None, artifact_id: str = "pca") -> PcaModel:
    """Keep the fewest principal axes whose cumulative explained variance
    reaches ``target``.

    Each axis is sign-fixed so that its largest-magnitude loading is positive.
    """
    if not 0 < target <= 1:
        raise ValueError(f"explained-variance target must lie in (0, 1], got {target}")
    X_std = np.asarray(X_std, dtype=float)
    rows = _scope(X_std, row_scope)
    sub = X_std[rows]
    mean = sub.mean(axis=0)
    centered = sub - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s**2
    total = var.sum()
    if total <= 0:
        raise ValueError("data has zero variance in scope")
    evr_all = var / total
    k = n_components_for(evr_all, target)
    comps = vt[:k].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    comps *= signs[:, None]
    return PcaModel(mean, comps, evr_all, float(target), FitFingerprint.from_indices(artifact_id, rows))


def transform(model: PcaModel, standardizer: Standardizer | None, X: np.ndarray) -> np.ndarray:
    """Project rows onto the kept axes: ``(standardize(X) - mean) @ components.T``."""
    Z = np.asarray(X, dtype=float) if standardizer is None else standardizer.transform(X)
    if Z.shape[1] != model.mean.size:
        raise ValueError(f"expected {model.mean.size} features, got {Z.shape[1]}")
    return (Z - model.mean) @ model.components.T


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    """Map projected scores back to standardized feature space."""
    return scores @ model.components + model.mean


@dataclass(frozen=True)
class ReducePipeline:
    standardizer: Standardizer
    pca: PcaModel | None

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.pca is None:
            return self.standardizer.transform(X)
        return transform(self.pca, self.standardizer, X)

    @property
    def fingerprints(self) -> list[FitFingerprint]:
        fps = [self.standardizer.fingerprint]
        if self.pca is not None:
            fps.append(self.pca.fingerprint)
        return fps

    def to_dict(self) -> dict:
        return {"standardizer": self.standardizer.to_dict(), "pca": None if self.pca is None else self.pca.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ReducePipeline":
        return cls(Standardizer.from_dict(d["standardizer"]), None if d["pca"] is None else PcaModel.from_dict(d["pca"]))


def fit_pipeline(X: np.ndarray, rows, evr_target: float | None, tag: str = "") -> ReducePipeline:
    """Standardize, then PCA to ``evr_target`` (skipped when ``None``), both on ``rows``."""
    suffix = f"[{tag}]" if tag else ""
    std = fit_standardizer(X, rows, artifact_id=f"standardizer{suffix}")
    pca = None
    if evr_target is not None:
        pca = fit_pca(std.transform(X), evr_target, rows, artifact_id=f"pca{suffix}")
    return ReducePipeline(std, pca)
