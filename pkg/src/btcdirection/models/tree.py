"""Array-backed CART trees shared by the forest and the boosting model.

Splits send ``x <= threshold`` left.  Growth runs in numba: features are
sorted once per tree and each split partitions the sorted lists, so a level
costs O(features x rows).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for _ in range(self.depth):
            feat = self.feature[node]
            inner = feat != LEAF
            if not inner.any():
                break
            go_left = X[rows, np.where(inner, feat, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
            np.array(d["n_samples"], dtype=np.int64),
            int(d["depth"]),
        )


def presort(X: np.ndarray, sample: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per feature, the positions of ``sample`` sorted by that feature and the
    matching values, both shaped ``(n_features, len(sample))``."""
    Xs = np.asarray(X, dtype=float)[np.asarray(sample)]
    idx = np.argsort(Xs, axis=0, kind="stable")
    vals = np.take_along_axis(Xs, idx, axis=0)
    return np.ascontiguousarray(idx.T, dtype=np.int64), np.ascontiguousarray(vals.T)


@njit(cache=True)
def _grow(y, sample, order, vals, gini, max_depth, min_leaf, m, seed, importances):
    """Depth-first CART growth over sample positions.

    ``order[f]`` lists the positions of the current node's rows sorted by
    feature ``f`` and ``vals[f]`` the matching values; every split stably
    partitions all features' lists so each child again owns a contiguous,
    sorted segment.
    """
    d = order.shape[0]
    ns = sample.shape[0]
    order = order.copy()
    vals = vals.copy()
    fbuf = np.empty(ns)
    cap = 2 * ns + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    counts = np.zeros(cap, dtype=np.int64)
    ys = np.empty(ns)
    for p in range(ns):
        ys[p] = y[sample[p]]
    goes_left = np.zeros(ns, dtype=np.bool_)
    buf = np.empty(ns, dtype=np.int64)
    feats = np.arange(d)
    if seed >= 0:
        np.random.seed(seed)

    # stack of (node, start, end, depth)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    n_nodes = 1
    s0 = 0.0
    for p in range(ns):
        s0 += ys[p]
    value[0] = s0 / ns
    counts[0] = ns
    top = 0
    st_node[0], st_lo[0], st_hi[0], st_depth[0] = 0, 0, ns, 0
    top = 1
    deepest = 0
    while top > 0:
        top -= 1
        node, lo, hi, depth = st_node[top], st_lo[top], st_hi[top], st_depth[top]
        deepest = max(deepest, depth)
        n = hi - lo
        s = 0.0
        sq = 0.0
        for q in range(lo, hi):
            v = ys[order[0, q]]
            s += v
            sq += v * v
        if gini:
            parent = 2.0 * s * (n - s) / n
        else:
            parent = sq - s * s / n
        if (max_depth >= 0 and depth >= max_depth) or n < 2 * min_leaf or parent <= 1e-12:
            continue
        if m < d:
            for j in range(m):
                k = j + np.random.randint(d - j)
                t = feats[j]
                feats[j] = feats[k]
                feats[k] = t
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(m):
            f = feats[j]
            cs = 0.0
            for i in range(n - 1):
                pos = order[f, lo + i]
                cs += ys[pos]
                nl = i + 1
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                xa = vals[f, lo + i]
                xb = vals[f, lo + i + 1]
                if not xb > xa:
                    continue
                sr = s - cs
                if gini:
                    cost = 2.0 * (cs * (nl - cs) / nl + sr * (nr - sr) / nr)
                else:
                    cost = -(cs * cs / nl + sr * sr / nr)
                if cost < best_cost:
                    best_cost = cost
                    best_f = f
                    thr = 0.5 * (xa + xb)
                    if thr >= xb:  # midpoint rounds up for adjacent floats
                        thr = xa
                    best_thr = thr
        if best_f < 0:
            continue
        child = best_cost if gini else best_cost + sq
        # zero-gain splits are kept so impure nodes can still be separated deeper down
        gain = max(parent - child, 0.0)
        importances[best_f] += gain
        nl = 0
        sl = 0.0
        for q in range(lo, hi):
            pos = order[best_f, q]
            gl = vals[best_f, q] <= best_thr
            goes_left[pos] = gl
            if gl:
                nl += 1
                sl += ys[pos]
        for f in range(d):
            a = lo
            b = 0
            for q in range(lo, hi):
                pos = order[f, q]
                if goes_left[pos]:
                    order[f, a] = pos
                    vals[f, a] = vals[f, q]
                    a += 1
                else:
                    buf[b] = pos
                    fbuf[b] = vals[f, q]
                    b += 1
            for q in range(b):
                order[f, a + q] = buf[q]
                vals[f, a + q] = fbuf[q]
        li, ri = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        value[li] = sl / nl
        counts[li] = nl
        value[ri] = (s - sl) / (n - nl)
        counts[ri] = n - nl
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = ri, lo + nl, hi, depth + 1
        top += 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = li, lo, lo + nl, depth + 1
        top += 1
    k = n_nodes
    return feature[:k], threshold[:k], left[:k], right[:k], value[:k], counts[:k], max(deepest, 1)


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample: np.ndarray,
    *,
    criterion: str = "gini",
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    importances: np.ndarray | None = None,
    order: np.ndarray | None = None,
) -> Tree:
    """Grow a tree on ``X[sample]`` (``sample`` may repeat rows).

    Each node takes the split with the lowest child impurity (Gini for
    0/1 targets, squared error for ``criterion="mse"``) among ``max_features``
    randomly drawn features; ties keep the first candidate in draw order,
    then the lowest position.  When ``importances`` is given, each split adds
    its impurity decrease to the entry of the split feature.  ``order`` is
    ``presort(X, sample)`` and may be passed in when growing many trees on the
    same sample.
    """
    if criterion not in ("gini", "mse"):
        raise ValueError(f"unknown criterion {criterion!r}")
    y = np.asarray(y, dtype=float)
    sample = np.ascontiguousarray(sample, dtype=np.int64)
    d = X.shape[1]
    m = d if max_features is None else max(1, min(d, int(max_features)))
    seed = -1
    if m < d:
        if rng is None:
            raise ValueError("feature subsampling needs an rng")
        seed = int(rng.integers(0, 2**31 - 1))
    if order is None:
        order = presort(X, sample)
    imp = np.zeros(d)
    out = _grow(y, sample, order[0], order[1], criterion == "gini", -1 if max_depth is None else int(max_depth),
                int(min_samples_leaf), m, seed, imp)
    if importances is not None:
        importances += imp
    return Tree(*out[:6], int(out[6]))
