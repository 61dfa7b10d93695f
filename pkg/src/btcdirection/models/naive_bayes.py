from __future__ import annotations

import numpy as np

from .base import Classifier, Param, sigmoid


class BernoulliNB(Classifier):
    """Naive Bayes over features binarized at ``x > binarize``.

    Feature likelihoods use additive (Laplace) smoothing ``alpha``; class
    priors are the empirical class frequencies.
    """

    kind = "BernoulliNB"
    PARAMS = {
        "alpha": Param("float", 1.0, 1e-10, 1e6),
        "binarize": Param("float", 0.0, -1e12, 1e12),
    }

    def _fit(self, X, y):
        B = X > self.hp["binarize"]
        a = self.hp["alpha"]
        counts = np.array([(y == c).sum() for c in (0, 1)], dtype=float)
        ones = np.array([B[y == c].sum(axis=0) for c in (0, 1)], dtype=float)
        self.class_log_prior = np.log(counts / counts.sum())
        self.feature_prob = (ones + a) / (counts[:, None] + 2 * a)

    def joint_log_likelihood(self, X) -> np.ndarray:
        B = (np.asarray(X) > self.hp["binarize"]).astype(float)
        logp = np.log(self.feature_prob)
        log1mp = np.log1p(-self.feature_prob)
        return B @ (logp - log1mp).T + log1mp.sum(axis=1) + self.class_log_prior

    def _proba(self, X):
        jll = self.joint_log_likelihood(X)
        return sigmoid(jll[:, 1] - jll[:, 0])

    def _state(self):
        return {"class_log_prior": self.class_log_prior, "feature_prob": self.feature_prob}

    def _restore(self, state):
        self.class_log_prior = np.array(state["class_log_prior"], dtype=float)
        self.feature_prob = np.array(state["feature_prob"], dtype=float).reshape(2, -1)
