from __future__ import annotations

import numpy as np

from .base import Classifier, Param, sigmoid
from .tree import Tree, build_tree, presort


def log_loss(y: np.ndarray, score: np.ndarray) -> float:
    """Mean logistic loss of raw scores (log-odds)."""
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


def _leaf_loss(y, score):
    return float(np.sum(np.logaddexp(0.0, score) - y * score))


class XGBLike(Classifier):
    """Gradient boosting of depth-limited regression trees on logistic loss.

    Trees are grown on the negative gradient ``y - p``.  Each leaf then takes a
    Newton step ``sum(y - p) / sum(p (1 - p))`` scaled by the learning rate and
    halved until the leaf's loss does not increase, so training loss never
    rises from one round to the next on the rows a round is fitted to.
    """

    kind = "XGBLike"
    PARAMS = {
        "n_rounds": Param("int", 100, 0, 5000),
        "learning_rate": Param("float", 0.1, 1e-6, 1.0),
        "max_depth": Param("int", 3, 1, 32),
        "subsample": Param("float", 1.0, 1e-3, 1.0),
    }

    def _fit(self, X, y):
        hp = self.hp
        n = X.shape[0]
        rate = y.mean()
        self.base_score = float(np.log(rate / (1 - rate)))
        self.trees: list[Tree] = []
        self.loss_trace = []
        rng = np.random.default_rng(self.seed)
        yf = y.astype(float)
        score = np.full(n, self.base_score)
        self.loss_trace.append(log_loss(yf, score))
        full_order = presort(X, np.arange(n)) if hp["subsample"] >= 1.0 else None
        for _ in range(hp["n_rounds"]):
            if hp["subsample"] < 1.0:
                k = max(2, int(round(hp["subsample"] * n)))
                sample = np.sort(rng.choice(n, k, replace=False))
            else:
                sample = np.arange(n)
            p = sigmoid(score)
            resid = yf - p
            tree = build_tree(X, resid, sample, criterion="mse", max_depth=hp["max_depth"], order=full_order if full_order is not None and len(sample) == n else None)
            leaves = tree.apply(X[sample])
            values = np.zeros(tree.n_nodes)
            for leaf in np.unique(leaves):
                members = sample[leaves == leaf]
                g = resid[members].sum()
                h = max(float((p[members] * (1 - p[members])).sum()), 1e-12)
                step = hp["learning_rate"] * g / h
                base = _leaf_loss(yf[members], score[members])
                for _ in range(40):
                    if _leaf_loss(yf[members], score[members] + step) <= base:
                        break
                    step *= 0.5
                else:
                    step = 0.0
                values[leaf] = step
            tree.value = values
            self.trees.append(tree)
            score += tree.predict(X)
            self.loss_trace.append(log_loss(yf, score))

    def decision_function(self, X) -> np.ndarray:
        X = self._check_X(X)
        score = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            score += t.predict(X)
        return score

    def _proba(self, X):
        return sigmoid(self.decision_function(X))

    def _state(self):
        return {"base_score": self.base_score, "trees": [t.to_dict() for t in self.trees]}

    def _restore(self, state):
        self.base_score = float(state["base_score"])
        self.trees = [Tree.from_dict(t) for t in state["trees"]]
