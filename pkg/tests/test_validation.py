import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from btcdirection.audit import LeakageError
from btcdirection.features import LabeledDataset
from btcdirection.validation import (
    AUCUndefinedWarning,
    Categorical,
    CVReport,
    FoldPlan,
    Metrics,
    Numeric,
    SearchSpace,
    auc_trapezoid,
    bayes_opt,
    evaluate,
    grid_search,
    mean_metrics,
    nested_cv,
    prepare_folds,
    roc_auc,
    time_series_folds,
)
from btcdirection.validation.cv import audit_entries
from oracles import auc_pairs, planted

SMALL_SPACES = {
    "SVM": {"params": {"kernel": {"values": ["linear"]}, "C": {"lower": 0.1, "upper": 10, "scale": "log"}}},
    "XGBLike": {"params": {"n_rounds": {"lower": 5, "upper": 30, "integer": True}}, "fixed": {"max_depth": 2}},
    "RandomForest": {"params": {"max_depth": {"lower": 2, "upper": 5, "integer": True}}, "fixed": {"n_trees": 15}},
    "BernoulliNB": {"params": {"alpha": {"lower": 0.1, "upper": 2.0}}},
}


def _dataset(X, y):
    dates = np.arange(np.datetime64("2016-01-01"), np.datetime64("2016-01-01") + len(y))
    return LabeledDataset(dates, X, np.asarray(y), [f"f{i}" for i in range(X.shape[1])])


# -- folds ------------------------------------------------------------------

def test_fold_arithmetic():
    plan = time_series_folds(100, 5, 0.5)
    assert [te.start for _, te in plan] == [50, 60, 70, 80, 90]
    assert all(len(te) == 10 for _, te in plan)
    assert all(tr.start == 0 and tr.stop == te.start for tr, te in plan)


@given(st.integers(4, 2000), st.integers(2, 10), st.floats(0.05, 0.95))
def test_fold_invariants(n, k, frac):
    try:
        plan = time_series_folds(n, k, frac)
    except ValueError:
        assert (n - int(np.ceil(frac * n))) // k < 1
        return
    assert len(plan) == k
    covered = []
    prev = None
    for tr, te in plan:
        assert max(tr) < min(te)
        assert tr.start == 0
        if prev is not None:
            assert tr.stop > prev.stop  # expanding
        prev = tr
        covered += list(te)
    assert covered == sorted(set(covered))
    assert covered[-1] == n - 1
    assert len({len(te) for _, te in plan}) == 1
    assert list(plan)[0][0].stop >= int(np.ceil(frac * n))


def test_fold_errors():
    with pytest.raises(ValueError):
        time_series_folds(100, 1)
    with pytest.raises(ValueError):
        time_series_folds(10, 6, 0.5)
    with pytest.raises(ValueError):
        FoldPlan((((0, 10), (5, 15)),))
    with pytest.raises(ValueError):
        FoldPlan((((0, 10), (20, 30)), ((0, 20), (10, 20))))


# -- metrics ----------------------------------------------------------------

def test_perfect_ranking():
    m = evaluate([0.9, 0.1], [1, 0])
    assert m.accuracy == 1.0 and m.auc == 1.0


def test_all_long_pattern():
    y = np.r_[np.ones(56), np.zeros(44)].astype(int)
    m = evaluate(np.full(100, 0.7), y)
    assert m.accuracy == pytest.approx(0.56)
    assert m.recall == 1.0
    assert m.precision == pytest.approx(0.56)
    assert m.all_long
    assert m.f1 == pytest.approx(2 * 0.56 / 1.56)


def test_single_class_auc_undefined():
    with pytest.warns(AUCUndefinedWarning):
        m = evaluate([0.2, 0.8], [1, 1])
    assert m.auc is None
    assert m.accuracy == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1], [1])


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60), st.floats(0, 1))
def test_confusion_metric_identities(rows, thr):
    p = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AUCUndefinedWarning)
        m = evaluate(p, y, thr)
    pred = p >= thr
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    assert m.accuracy == pytest.approx(np.mean(pred == (y == 1)))
    assert m.precision == (tp / (tp + fp) if tp + fp else 0.0)
    assert m.recall == (tp / (tp + fn) if tp + fn else 0.0)
    pr = m.precision + m.recall
    assert m.f1 == pytest.approx(2 * m.precision * m.recall / pr if pr else 0.0)


scores = st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]) | st.floats(0, 1), min_size=2, max_size=200)


@given(scores, st.data())
def test_auc_equals_concordant_pairs(s, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(s), max_size=len(s)))
    if len(set(labels)) < 2:
        return
    want = auc_pairs(s, labels)
    assert abs(auc_trapezoid(s, labels) - want) <= 1e-9
    assert abs(roc_auc(s, labels) - want) <= 1e-9


def test_auc_random_fifty_point_instances():
    r = np.random.default_rng(0)
    for _ in range(20):
        s = r.random(50)
        y = r.integers(0, 2, 50)
        y[:2] = [0, 1]
        assert abs(roc_auc(s, y) - auc_pairs(s, y)) <= 1e-9


def test_mean_metrics_skips_undefined_auc():
    a = Metrics(1.0, 1.0, 1.0, 1.0, None, n=2, positive_rate=1.0, predicted_positive_rate=1.0)
    b = Metrics(0.5, 0.5, 0.5, 0.5, 0.25, n=2, positive_rate=0.5, predicted_positive_rate=0.5)
    m = mean_metrics([a, b])
    assert m.accuracy == 0.75 and m.auc == 0.25 and m.n == 4
    with pytest.raises(ValueError):
        mean_metrics([])


# -- search spaces and bayes_opt ---------------------------------------------

def test_space_validation():
    with pytest.raises(ValueError):
        Numeric(1.0, 1.0)
    with pytest.raises(ValueError):
        Numeric(0.0, 1.0, "log")
    with pytest.raises(ValueError):
        Numeric(0.0, float("inf"))
    with pytest.raises(ValueError):
        Categorical(())
    sp = SearchSpace.from_dict({"params": {"k": {"values": ["a", "b"]}, "g": {"lower": 1, "upper": 2, "when": {"k": "b"}}}})
    assert sp.grid() == [{"k": "a"}, {"k": "b"}]
    assert list(sp.numeric({"k": "a"})) == []
    assert list(sp.numeric({"k": "b"})) == ["g"]


def _quadratic(a):
    return -((a["x"] - 0.3) ** 2)


def test_bayes_opt_quadratic():
    grid = np.linspace(0, 1, 10001)
    x_star = grid[np.argmax(-((grid - 0.3) ** 2))]
    for seed in range(5):
        res = bayes_opt({"x": Numeric(0.0, 1.0)}, _quadratic, 20, seed)
        assert abs(res.best["x"] - x_star) < 0.05


def test_budget_equal_to_init_is_pure_exploration():
    res = bayes_opt({"x": Numeric(0.0, 1.0)}, _quadratic, 5, seed=1, init_points=5)
    assert len(res.log) == 5
    assert res.best_value == max(v for _, v in res.log)


def test_constant_objective():
    res = bayes_opt({"x": Numeric(0.0, 1.0)}, lambda a: 1.0, 8, seed=2)
    assert res.best_value == 1.0
    assert res.best in [a for a, _ in res.log]


def test_non_finite_values_are_discarded():
    calls = []

    def f(a):
        calls.append(a)
        return float("nan") if len(calls) == 2 else -abs(a["x"] - 0.5)

    with pytest.warns(RuntimeWarning):
        res = bayes_opt({"x": Numeric(0.0, 1.0)}, f, 7, seed=3)
    assert len(res.discarded) == 1
    assert len(res.log) == 6
    assert len(calls) == 7


def test_budget_below_init_rejected():
    with pytest.raises(ValueError):
        bayes_opt({"x": Numeric(0.0, 1.0)}, _quadratic, 3, init_points=5)


@given(st.integers(0, 1000))
def test_bayes_opt_respects_bounds_and_log(seed):
    space = {"c": Numeric(1e-3, 1e3, "log"), "n": Numeric(2, 9, integer=True)}
    res = bayes_opt(space, lambda a: -abs(np.log10(a["c"]) - 1) - abs(a["n"] - 4), 8, seed)
    for a, v in res.log:
        assert 1e-3 <= a["c"] <= 1e3
        assert 2 <= a["n"] <= 9 and isinstance(a["n"], int)
    assert res.best_value == max(v for _, v in res.log)


def test_bayes_opt_deterministic():
    a = bayes_opt({"x": Numeric(0.0, 1.0)}, _quadratic, 10, seed=9)
    b = bayes_opt({"x": Numeric(0.0, 1.0)}, _quadratic, 10, seed=9)
    assert a.log == b.log


# -- grid search ------------------------------------------------------------

def _prepared(X, y, k=3):
    return prepare_folds(X, y, time_series_folds(len(y), k, 0.5), None)


def test_single_point_grid():
    X, y = planted(n=120, noise=0.0)
    res = grid_search("BernoulliNB", SearchSpace({"alpha": Categorical((0.5,))}), _prepared(X, y))
    assert res.best == {"alpha": 0.5}
    with pytest.raises(ValueError):
        grid_search("BernoulliNB", SearchSpace({"alpha": Categorical((1.0,))}), [])


def test_grid_picks_dominant_option():
    X, y = planted(n=220, d=2, noise=0.0, seed=1)
    keep = np.abs(X[:, 0]) > 0.3  # leave a margin so the classes are separable
    X, y = X[keep], y[keep]
    space = SearchSpace({"kernel": Categorical(("rbf", "linear"))}, {"gamma": 1e4, "C": 10.0})
    res = grid_search("SVM", space, _prepared(X, y))
    scores = dict((hp["kernel"], s) for hp, s in res.table)
    assert scores["linear"] == 1.0
    assert scores["rbf"] < 0.8
    assert res.best["kernel"] == "linear"


def test_grid_ties_keep_first_entry():
    X, y = planted(n=150, d=2, noise=0.0, seed=2)
    res = grid_search("BernoulliNB", SearchSpace({"alpha": Categorical((2.0, 1.0))}), _prepared(X, y))
    assert res.table[0][1] == res.table[1][1]
    assert res.best["alpha"] == 2.0


def test_grid_with_numeric_search():
    X, y = planted(n=150, d=2, seed=3)
    sp = SearchSpace.from_dict(SMALL_SPACES["BernoulliNB"])
    res = grid_search("BernoulliNB", sp, _prepared(X, y), budget=5, seed=1)
    assert sp.contains(res.best)
    assert res.searches[0] is not None and len(res.searches[0].log) == 5


# -- nested CV --------------------------------------------------------------

@pytest.mark.parametrize("kind", sorted(SMALL_SPACES))
def test_planted_signal_noise_free(kind):
    X, y = planted(n=300, d=4, noise=0.0, seed=4)
    rep = nested_cv(kind, _dataset(X, y), time_series_folds(300, 3, 0.5), SearchSpace.from_dict(SMALL_SPACES[kind]),
                    budget=3, init_points=3, seed=1, fit_final=False)
    assert rep.mean.accuracy >= 0.95


def test_constant_model_scores_majority_rate():
    X, y = planted(n=200, d=3, noise=0.3, seed=5)
    plan = time_series_folds(200, 4, 0.5)
    rep = nested_cv("Constant", _dataset(X, y), plan, SearchSpace(), budget=0)
    for f, (tr, te) in zip(rep.folds, plan):
        majority = int(y[np.asarray(tr)].mean() >= 0.5)
        assert f.metrics.accuracy == pytest.approx(np.mean(y[np.asarray(te)] == majority))


def test_nesting_and_audit_scopes():
    X, y = planted(n=240, d=4, seed=6)
    outer = time_series_folds(240, 3, 0.5)
    rep = nested_cv("BernoulliNB", _dataset(X, y), outer, SearchSpace.from_dict(SMALL_SPACES["BernoulliNB"]),
                    budget=3, init_points=3, evr_target=0.9)
    for f in rep.folds:
        assert all(e["allowed"][1] <= f.train[1] for e in f.fingerprints)
        assert all(r.passed for r in audit_entries(f.fingerprints))
        kinds = {e["fingerprint"]["artifact_id"].split("[")[0] for e in f.fingerprints}
        assert {"standardizer", "pca", "model:BernoulliNB"} <= kinds
    assert rep.final_model is not None and rep.final_pipeline is not None
    assert rep.final_model.fingerprint.n_rows == 240
    back = CVReport.from_dict(rep.to_dict())
    np.testing.assert_array_equal(back.final_model.predict_proba(back.final_pipeline.transform(X)),
                                  rep.final_model.predict_proba(rep.final_pipeline.transform(X)))
    p, lab = rep.oof()
    assert len(p) == len(lab) == 120
    assert {r["fold"] for r in rep.csv_rows()} == {0, 1, 2, "mean"}


def test_reducer_fit_on_all_rows_is_caught():
    X, y = planted(n=200, d=4, seed=7)
    ds = _dataset(X, y)
    plan = time_series_folds(200, 2, 0.5)
    with pytest.raises(LeakageError):
        nested_cv("BernoulliNB", ds, plan, SearchSpace(), budget=0, evr_target=0.9, reduce_scope="all")
    rep = nested_cv("BernoulliNB", ds, plan, SearchSpace(), budget=0, evr_target=0.9, reduce_scope="all",
                    allow_leakage_for_demo=True, fit_final=False)
    assert any(not r.passed for f in rep.folds for r in audit_entries(f.fingerprints))


def test_nested_cv_is_deterministic():
    X, y = planted(n=200, d=3, seed=8)
    args = ("RandomForest", _dataset(X, y), time_series_folds(200, 2, 0.5), SearchSpace.from_dict(SMALL_SPACES["RandomForest"]))
    a = nested_cv(*args, budget=3, init_points=3, seed=5, fit_final=False)
    b = nested_cv(*args, budget=3, init_points=3, seed=5, fit_final=False)
    assert a.to_dict() == b.to_dict()
