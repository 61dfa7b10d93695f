from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FoldPlan:
    """Expanding-window walk-forward folds as half-open ``(start, stop)`` ranges."""

    folds: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    def __post_init__(self):
        prev_test_stop = None
        prev_train_stop = -1
        for (a, b), (c, d) in self.folds:
            if not (a < b <= c < d):
                raise ValueError(f"fold train [{a},{b}) must precede test [{c},{d})")
            if prev_test_stop is not None and c < prev_test_stop:
                raise ValueError("test blocks must be ordered and disjoint")
            if b < prev_train_stop:
                raise ValueError("training windows must expand")
            prev_test_stop, prev_train_stop = d, b

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        for (a, b), (c, d) in self.folds:
            yield range(a, b), range(c, d)

    def shifted(self, offset: int) -> "FoldPlan":
        return FoldPlan(tuple(((a + offset, b + offset), (c + offset, d + offset)) for (a, b), (c, d) in self.folds))

    def to_dict(self) -> dict:
        return {"folds": [{"train": list(tr), "test": list(te)} for tr, te in self.folds]}


def time_series_folds(n_rows: int, k: int, min_train_fraction: float = 0.5) -> FoldPlan:
    """``k`` equal test blocks tiling the tail after a minimum training prefix.

    Fold ``i`` trains on ``[0, s_i)`` and tests on ``[s_i, s_i + block)``.
    Rows that do not divide evenly into ``k`` blocks extend the first training
    prefix.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if not 0 < min_train_fraction < 1:
        raise ValueError("min_train_fraction must lie in (0, 1)")
    min_train = math.ceil(min_train_fraction * n_rows)
    if min_train < 1:
        raise ValueError("minimum training prefix is empty")
    block = (n_rows - min_train) // k
    if block < 1:
        raise ValueError(f"{n_rows} rows cannot hold a {min_train}-row prefix and {k} test blocks")
    s0 = n_rows - k * block
    return FoldPlan(tuple(((0, s0 + i * block), (s0 + i * block, s0 + (i + 1) * block)) for i in range(k)))
