"""Soft-margin kernel SVM trained by sequential minimal optimization.

The dual ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a <= C``, ``y'a = 0`` is solved with
second-order working-set selection (Fan, Chen & Lin, 2005).  Probabilities
come from a Platt sigmoid fitted on a held-out tail of the training rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .base import Classifier, DegenerateLabelError, Param

log = logging.getLogger(__name__)

def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    iterations: int
    kkt_gap: float
    converged: bool
    dual_trace: list[float] = field(default_factory=list)


@njit(cache=True)
def _smo_loop(K, y, C, tol, max_iter, trace):
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient Qa - e
    dual = np.zeros(max_iter + 1 if trace else 1)
    gap = np.inf
    it = 0
    while it < max_iter:
        # i: most violating index in I_up
        i = -1
        m = -np.inf
        M = np.inf
        for t in range(n):
            yg = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if yg > m:
                    m = yg
                    i = t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                if yg < M:
                    M = yg
        if i < 0 or M == np.inf:
            gap = 0.0
            break
        gap = m - M
        if gap < tol:
            break
        # j: second-order choice in I_low
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                b = m + y[t] * G[t]
                if b > 0:
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = 1e-12
                    v = -(b * b) / a
                    if v < best:
                        best = v
                        j = t
        b = m + y[j] * G[j]
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = 1e-12
        step = b / a
        # a_i moves by y_i*step, a_j by -y_j*step; clip to the box
        lo = -np.inf
        hi = np.inf
        for idx, direction in ((i, y[i]), (j, -y[j])):
            if direction > 0:
                hi = min(hi, C - alpha[idx])
                lo = max(lo, -alpha[idx])
            else:
                hi = min(hi, alpha[idx])
                lo = max(lo, alpha[idx] - C)
        step = min(max(step, lo), hi)
        di = y[i] * step
        dj = -y[j] * step
        ai = min(max(alpha[i] + di, 0.0), C)
        aj = min(max(alpha[j] + dj, 0.0), C)
        di = ai - alpha[i]
        dj = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            G[t] += y[t] * (K[t, i] * y[i] * di + K[t, j] * y[j] * dj)
        it += 1
        if trace:
            d = 0.0
            for t in range(n):
                d += alpha[t] * (G[t] - 1.0)
            dual[it] = -0.5 * d
    return alpha, G, it, gap, dual[: it + 1] if trace else dual[:0]


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100_000, trace: bool = False) -> SMOResult:
    """Solve the SVM dual for a precomputed kernel and labels in {-1, +1}.

    ``kkt_gap`` is the maximal KKT violation ``m(a) - M(a)`` at exit.
    ``dual_trace`` (when requested) holds ``e'a - 1/2 a'Qa`` after every step.
    """
    y = np.ascontiguousarray(y, dtype=float)
    alpha, G, it, gap, dual = _smo_loop(np.ascontiguousarray(K, dtype=float), y, float(C), float(tol), int(max_iter), bool(trace))
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        at_upper, at_lower = alpha >= C, alpha <= 0
        ub_set = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_set = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_set].min() if ub_set.any() else np.inf
        lb = yG[lb_set].max() if lb_set.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub + lb) else float(ub if np.isfinite(ub) else lb)
    return SMOResult(alpha, rho, int(it), float(gap), bool(gap < tol), list(map(float, dual)))


def platt_fit(f: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularised-target Newton
    iterations with backtracking (Lin, Lin & Weng, 2007)."""
    prior1 = float((y == 1).sum())
    prior0 = float(len(y) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y == 1, hi, lo)
    A, B = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))

    def objective(A, B):
        z = f * A + B
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    fval = objective(A, B)
    sigma = 1e-12
    for _ in range(max_iter):
        z = f * A + B
        ez = np.exp(-np.abs(z))
        p = np.where(z >= 0, ez / (1 + ez), 1 / (1 + ez))
        q = 1 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2
        else:
            log.debug("platt line search failed")
            break
    return A, B


class SVM(Classifier):
    """Kernel SVM with Platt-scaled probabilities.

    The last ``calibration_fraction`` of the training rows (time order) is
    held out from the SMO fit and used only to fit the Platt sigmoid.
    """

    kind = "SVM"
    record_trace = False
    PARAMS = {
        "C": Param("float", 1.0, 1e-6, 1e6),
        "kernel": Param("choice", "rbf", choices=("linear", "rbf")),
        "gamma": Param("float", 0.1, 1e-8, 1e4),
        "tol": Param("float", 1e-3, 1e-12, 1.0),
        "max_iter": Param("int", 100_000, 1, 10_000_000),
        "calibration_fraction": Param("float", 0.2, 0.0, 0.9),
    }

    def _fit(self, X, y):
        hp = self.hp
        n = X.shape[0]
        n_cal = int(round(hp["calibration_fraction"] * n))
        n_fit = n - n_cal
        Xf, yf = X[:n_fit], y[:n_fit]
        if np.unique(yf).size < 2:
            raise DegenerateLabelError("SVM: training slice before calibration rows contains a single class")
        ys = np.where(yf == 1, 1.0, -1.0)
        K = kernel_matrix(Xf, Xf, hp["kernel"], hp["gamma"])
        res = smo(K, ys, hp["C"], hp["tol"], hp["max_iter"], trace=self.record_trace)
        if not res.converged:
            log.debug("SMO stopped at max_iter=%d with KKT gap %.3g", hp["max_iter"], res.kkt_gap)
        self.solver = res
        sv = res.alpha > 0
        self.support_vectors = Xf[sv]
        self.dual_coef = res.alpha[sv] * ys[sv]
        self.rho = res.rho
        self.w = self.dual_coef @ self.support_vectors if hp["kernel"] == "linear" else None
        if n_cal:
            f_cal, y_cal = self.decision_function(X[n_fit:]), y[n_fit:]
        else:
            f_cal, y_cal = self.decision_function(Xf), yf
        self.platt_A, self.platt_B = platt_fit(f_cal, y_cal)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.w is not None:
            return X @ self.w - self.rho
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], -self.rho)
        return kernel_matrix(X, self.support_vectors, self.hp["kernel"], self.hp["gamma"]) @ self.dual_coef - self.rho

    def _proba(self, X):
        z = self.platt_A * self.decision_function(X) + self.platt_B
        return np.exp(-np.logaddexp(0.0, z))

    def _state(self):
        return {
            "support_vectors": self.support_vectors,
            "dual_coef": self.dual_coef,
            "rho": self.rho,
            "platt": [self.platt_A, self.platt_B],
        }

    def _restore(self, state):
        self.support_vectors = np.array(state["support_vectors"], dtype=float).reshape(-1, self.n_features)
        self.dual_coef = np.array(state["dual_coef"], dtype=float)
        self.rho = float(state["rho"])
        self.platt_A, self.platt_B = map(float, state["platt"])
        self.w = self.dual_coef @ self.support_vectors if self.hp["kernel"] == "linear" else None
