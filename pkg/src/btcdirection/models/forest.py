from __future__ import annotations

import numpy as np

from .base import Classifier, Param
from .tree import Tree, build_tree


class RandomForest(Classifier):
    """Bagged Gini CART trees; probability is the share of trees voting 1."""

    kind = "RandomForest"
    PARAMS = {
        "n_trees": Param("int", 50, 1, 2000),
        "max_depth": Param("int", None, 1, 64, allow_none=True),
        "max_features_fraction": Param("float", 0.5, 1e-6, 1.0),
        "min_samples_leaf": Param("int", 1, 1, 10_000),
        "bootstrap": Param("bool", True),
    }

    def _fit(self, X, y):
        n, d = X.shape
        hp = self.hp
        m = max(1, int(round(hp["max_features_fraction"] * d)))
        rng = np.random.default_rng(self.seed)
        self.trees: list[Tree] = []
        per_tree = []
        for _ in range(hp["n_trees"]):
            sample = rng.integers(0, n, n) if hp["bootstrap"] else np.arange(n)
            imp = np.zeros(d)
            self.trees.append(
                build_tree(
                    X, y, sample,
                    criterion="gini",
                    max_depth=hp["max_depth"],
                    min_samples_leaf=hp["min_samples_leaf"],
                    max_features=m,
                    rng=rng,
                    importances=imp,
                )
            )
            per_tree.append(imp / imp.sum() if imp.sum() > 0 else imp)
        self._importances = np.mean(per_tree, axis=0)

    def votes(self, X) -> np.ndarray:
        X = self._check_X(X)
        return np.array([t.predict(X) > 0.5 for t in self.trees])

    def _proba(self, X):
        return self.votes(X).mean(axis=0)

    def feature_importance(self) -> np.ndarray:
        """Mean normalised impurity decrease per feature; sums to 1.

        A forest whose trees never split reports uniform importance.
        """
        total = self._importances.sum()
        if total <= 0:
            return np.full(self.n_features, 1.0 / self.n_features)
        return self._importances / total

    def _state(self):
        return {"trees": [t.to_dict() for t in self.trees], "importances": self._importances}

    def _restore(self, state):
        self.trees = [Tree.from_dict(t) for t in state["trees"]]
        self._importances = np.array(state["importances"], dtype=float)
