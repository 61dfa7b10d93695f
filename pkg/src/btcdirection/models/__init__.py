"""Direction classifiers sharing one fit / predict_proba contract."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import Classifier, DegenerateLabelError, HyperparameterError, Param, UnsupportedOperation
from .boosting import XGBLike
from .forest import RandomForest
from .naive_bayes import BernoulliNB
from .svm import SVM


class Constant(Classifier):
    """Ignores features; predicts the training share of class 1."""

    kind = "Constant"
    PARAMS: dict = {}

    def _fit(self, X, y):
        self.rate = float(y.mean())

    def _proba(self, X):
        return np.full(X.shape[0], self.rate)

    def _state(self):
        return {"rate": self.rate}

    def _restore(self, state):
        self.rate = float(state["rate"])


REGISTRY: dict[str, type[Classifier]] = {
    cls.kind: cls for cls in (SVM, XGBLike, RandomForest, BernoulliNB, Constant)
}
PAPER_KINDS = ("SVM", "XGBLike", "RandomForest", "BernoulliNB")


def model_class(kind: str) -> type[Classifier]:
    try:
        return REGISTRY[kind]
    except KeyError:
        raise HyperparameterError(f"unknown model kind {kind!r}; expected one of {sorted(REGISTRY)}") from None


def fit_classifier(kind: str, X, y, hp: dict | None = None, seed: int = 42, rows=None) -> Classifier:
    """Fit a classifier of ``kind``; ``rows`` are the original indices of X's rows."""
    return model_class(kind)(hp, seed).fit(X, y, rows)


def feature_importance(model: Classifier) -> np.ndarray:
    return model.feature_importance()


def classifier_from_dict(d: dict) -> Classifier:
    return model_class(d["kind"]).from_dict(d)


def save_classifier(model: Classifier, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_classifier(path: str | Path) -> Classifier:
    return classifier_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "BernoulliNB",
    "Classifier",
    "Constant",
    "DegenerateLabelError",
    "HyperparameterError",
    "PAPER_KINDS",
    "Param",
    "REGISTRY",
    "RandomForest",
    "SVM",
    "UnsupportedOperation",
    "XGBLike",
    "classifier_from_dict",
    "feature_importance",
    "fit_classifier",
    "load_classifier",
    "model_class",
    "save_classifier",
]
