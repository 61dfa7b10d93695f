"""Hyperparameter search spaces and Gaussian-process Bayesian optimisation."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import norm, qmc

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Numeric:
    lower: float
    upper: float
    scale: str = "linear"  # or "log"
    integer: bool = False
    when: Mapping[str, Any] | None = None  # only active for these categorical values

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.lower >= self.upper:
            raise ValueError(f"numeric bounds must be finite with lower < upper, got [{self.lower}, {self.upper}]")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError("log-scaled bounds must be positive")

    def from_unit(self, u: float):
        u = min(max(float(u), 0.0), 1.0)
        if self.scale == "log":
            v = math.exp(math.log(self.lower) + u * (math.log(self.upper) - math.log(self.lower)))
        else:
            v = self.lower + u * (self.upper - self.lower)
        v = min(max(v, self.lower), self.upper)
        return int(round(v)) if self.integer else v

    def to_unit(self, v: float) -> float:
        if self.scale == "log":
            return (math.log(v) - math.log(self.lower)) / (math.log(self.upper) - math.log(self.lower))
        return (v - self.lower) / (self.upper - self.lower)

    def active(self, assignment: Mapping[str, Any]) -> bool:
        return not self.when or all(assignment.get(k) == v for k, v in self.when.items())


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("categorical parameter needs at least one value")


@dataclass(frozen=True)
class SearchSpace:
    """Tunable parameters plus fixed ones passed through unchanged."""

    params: Mapping[str, Numeric | Categorical] = field(default_factory=dict)
    fixed: Mapping[str, Any] = field(default_factory=dict)

    @property
    def categorical(self) -> dict[str, Categorical]:
        return {k: v for k, v in self.params.items() if isinstance(v, Categorical)}

    def numeric(self, assignment: Mapping[str, Any] | None = None) -> dict[str, Numeric]:
        assignment = assignment or {}
        return {k: v for k, v in self.params.items() if isinstance(v, Numeric) and v.active(assignment)}

    def grid(self) -> list[dict]:
        """Every categorical combination, in declaration order."""
        cats = self.categorical
        return [dict(zip(cats, combo)) for combo in itertools.product(*(c.values for c in cats.values()))]

    def contains(self, assignment: Mapping[str, Any]) -> bool:
        for k, v in assignment.items():
            p = self.params.get(k)
            if isinstance(p, Numeric) and not p.lower <= v <= p.upper:
                return False
            if isinstance(p, Categorical) and v not in p.values:
                return False
        return True

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SearchSpace":
        """Config form::

            {"params": {"C": {"lower": 0.01, "upper": 1000, "scale": "log"},
                        "kernel": {"values": ["linear", "rbf"]}},
             "fixed": {"max_iter": 20000}}
        """
        params: dict[str, Numeric | Categorical] = {}
        for name, spec in (d.get("params") or {}).items():
            if "values" in spec:
                params[name] = Categorical(tuple(spec["values"]))
            else:
                params[name] = Numeric(
                    float(spec["lower"]),
                    float(spec["upper"]),
                    spec.get("scale", "linear"),
                    bool(spec.get("integer", False)),
                    spec.get("when"),
                )
        return cls(params, dict(d.get("fixed") or {}))


@dataclass
class BayesOptResult:
    best: dict
    best_value: float
    log: list[tuple[dict, float]]
    discarded: list[dict] = field(default_factory=list)


class GaussianProcess:
    """Zero-mean GP with a squared-exponential kernel on standardised targets.

    The isotropic length-scale is picked by maximum marginal likelihood over a
    log-spaced grid; observation noise is fixed.
    """

    LENGTH_GRID = np.logspace(-2, 1, 31)

    def __init__(self, noise: float = 1e-6):
        self.noise = noise

    @staticmethod
    def _k(A, B, ell):
        sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        return np.exp(-0.5 * sq / ell**2)

    def fit(self, U: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        self.U = np.asarray(U, dtype=float)
        y = np.asarray(y, dtype=float)
        self.mu = float(y.mean())
        sd = float(y.std())
        self.sd = sd if sd > 0 else 1.0
        z = (y - self.mu) / self.sd
        best = None
        n = len(z)
        for ell in self.LENGTH_GRID:
            K = self._k(self.U, self.U, ell) + self.noise * np.eye(n)
            try:
                c = cho_factor(K, lower=True)
            except np.linalg.LinAlgError:
                continue
            alpha = cho_solve(c, z)
            ll = -0.5 * z @ alpha - np.log(np.diag(c[0])).sum() - 0.5 * n * np.log(2 * np.pi)
            if best is None or ll > best[0]:
                best = (ll, ell, c, alpha)
        if best is None:
            raise np.linalg.LinAlgError("GP kernel matrix is not positive definite for any length-scale")
        _, self.ell, self._chol, self._alpha = best
        return self

    def predict(self, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ks = self._k(np.atleast_2d(V), self.U, self.ell)
        mean = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = np.maximum(1.0 - np.einsum("ij,ji->i", Ks, v), 1e-12)
        return self.mu + self.sd * mean, self.sd * np.sqrt(var)


def expected_improvement(mean, std, best, xi: float = 0.0):
    imp = mean - best - xi
    z = imp / std
    return imp * norm.cdf(z) + std * norm.pdf(z)


def _maximise_ei(gp: GaussianProcess, best: float, dim: int, rng: np.random.Generator, n_random: int = 2000, n_starts: int = 5) -> np.ndarray:
    cand = rng.random((n_random, dim))
    mean, std = gp.predict(cand)
    ei = expected_improvement(mean, std, best)
    starts = cand[np.argsort(-ei)[:n_starts]]
    best_u, best_ei = starts[0], float(ei.max())

    def neg(u):
        m, s = gp.predict(u[None, :])
        return -float(expected_improvement(m, s, best)[0])

    for u0 in starts:
        res = minimize(neg, u0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim)
        if res.success and -res.fun > best_ei:
            best_u, best_ei = np.clip(res.x, 0.0, 1.0), -float(res.fun)
    return best_u


def bayes_opt(
    space: Mapping[str, Numeric] | SearchSpace,
    objective: Callable[[dict], float],
    budget: int,
    seed: int = 42,
    init_points: int = 5,
) -> BayesOptResult:
    """Maximise ``objective`` over numeric parameters with ``budget`` evaluations.

    The first ``init_points`` evaluations come from a scrambled Halton sequence;
    the rest maximise expected improvement under a GP surrogate on the unit
    cube (log-scaled axes where declared).  Non-finite objective values are
    dropped with a warning but still use up budget.
    """
    params = space.numeric() if isinstance(space, SearchSpace) else dict(space)
    if budget < init_points:
        raise ValueError(f"budget {budget} is smaller than init_points {init_points}")
    if not params:
        value = objective({})
        if not np.isfinite(value):
            raise ValueError("objective is non-finite with no parameters to vary")
        return BayesOptResult({}, float(value), [({}, float(value))])
    names = list(params)
    dim = len(names)
    rng = np.random.default_rng(seed)
    initial = qmc.Halton(d=dim, scramble=True, seed=rng).random(init_points)

    def decode(u):
        return {n: params[n].from_unit(x) for n, x in zip(names, u)}

    def encode(a):
        return np.array([params[n].to_unit(a[n]) for n in names])

    U, vals, history, dropped = [], [], [], []
    for step in range(budget):
        if step < init_points:
            u = initial[step]
        elif len(vals) >= 1:
            gp = GaussianProcess().fit(np.array(U), np.array(vals))
            u = _maximise_ei(gp, max(vals), dim, rng)
        else:
            u = rng.random(dim)
        assignment = decode(u)
        value = objective(assignment)
        if value is None or not np.isfinite(value):
            warnings.warn(f"objective returned {value!r} at {assignment}; discarded", RuntimeWarning, stacklevel=2)
            dropped.append(assignment)
            continue
        U.append(encode(assignment))
        vals.append(float(value))
        history.append((assignment, float(value)))
    if not history:
        raise ValueError("every objective evaluation was non-finite")
    i = int(np.argmax(vals))
    return BayesOptResult(history[i][0], vals[i], history, dropped)
