from __future__ import annotations

import numbers
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from ..audit import FitFingerprint

FORMAT = "btcdirection.classifier"
FORMAT_VERSION = 1


class DegenerateLabelError(ValueError):
    """Training labels contain a single class."""


class HyperparameterError(ValueError):
    pass


class UnsupportedOperation(TypeError):
    pass


@dataclass(frozen=True)
class Param:
    """Validity bounds for one hyperparameter (not a search range)."""

    type: str  # "float" | "int" | "choice" | "bool"
    default: Any
    lower: float | None = None
    upper: float | None = None
    choices: tuple = ()
    allow_none: bool = False

    def check(self, name: str, value):
        if value is None:
            if self.allow_none:
                return None
            raise HyperparameterError(f"{name} must not be None")
        if self.type == "choice":
            if value not in self.choices:
                raise HyperparameterError(f"{name}={value!r} not in {self.choices}")
            return value
        if self.type == "bool":
            if not isinstance(value, (bool, np.bool_)):
                raise HyperparameterError(f"{name} must be a bool, got {value!r}")
            return bool(value)
        if not isinstance(value, numbers.Real) or isinstance(value, bool) or not np.isfinite(value):
            raise HyperparameterError(f"{name} must be a finite number, got {value!r}")
        if self.type == "int":
            if float(value) != int(value):
                raise HyperparameterError(f"{name} must be an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        if self.lower is not None and value < self.lower:
            raise HyperparameterError(f"{name}={value} below lower bound {self.lower}")
        if self.upper is not None and value > self.upper:
            raise HyperparameterError(f"{name}={value} above upper bound {self.upper}")
        return value


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


class Classifier:
    """Shared fit/predict contract.

    Subclasses declare ``PARAMS`` and implement ``_fit``, ``_proba``,
    ``_state`` and ``_restore``.
    """

    kind: ClassVar[str]
    PARAMS: ClassVar[dict[str, Param]] = {}

    def __init__(self, hp: dict | None = None, seed: int = 42):
        self.hp = self.validate(hp or {})
        self.seed = int(seed)
        self.n_features: int | None = None
        self.fingerprint: FitFingerprint | None = None

    @classmethod
    def validate(cls, hp: dict) -> dict:
        unknown = set(hp) - set(cls.PARAMS)
        if unknown:
            raise HyperparameterError(f"{cls.kind}: unknown hyperparameters {sorted(unknown)}")
        return {name: p.check(name, hp.get(name, p.default)) for name, p in cls.PARAMS.items()}

    def fit(self, X, y, rows=None) -> "Classifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X {X.shape} and y {y.shape} do not align")
        if not np.isfinite(X).all():
            raise ValueError("X contains non-finite values")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        if np.unique(y).size < 2:
            raise DegenerateLabelError(f"{self.kind}: training labels contain a single class")
        rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows)
        if rows.shape[0] != X.shape[0]:
            raise ValueError("rows must give one original index per training row")
        self.n_features = X.shape[1]
        self._fit(X, y.astype(np.int8))
        self.fingerprint = FitFingerprint.from_indices(f"model:{self.kind}", rows)
        return self

    def _check_X(self, X) -> np.ndarray:
        if self.n_features is None:
            raise RuntimeError("model is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Probability of class 1 for each row."""
        return np.clip(self._proba(self._check_X(X)), 0.0, 1.0)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int8)

    def feature_importance(self) -> np.ndarray:
        raise UnsupportedOperation(f"feature importance is only defined for RandomForest, not {self.kind}")

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "hp": self.hp,
            "seed": self.seed,
            "n_features": self.n_features,
            "fingerprint": None if self.fingerprint is None else self.fingerprint.to_dict(),
            "state": _jsonable(self._state()),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported classifier document {d.get('format')!r} v{d.get('version')}")
        model = cls(d["hp"], d["seed"])
        model.n_features = d["n_features"]
        model.fingerprint = None if d["fingerprint"] is None else FitFingerprint.from_dict(d["fingerprint"])
        model._restore(d["state"])
        return model

    # subclass hooks
    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        raise NotImplementedError

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    def _restore(self, state: dict) -> None:
        raise NotImplementedError


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
