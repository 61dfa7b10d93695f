import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from btcdirection.features import (
    CYCLICAL_NAMES,
    IndicatorSpec,
    Kind,
    WarmupError,
    build_dataset,
    compute_indicator,
    cyclical_time_features,
    day_of_month,
    day_of_week,
    default_specs,
    expand_features,
    make_target,
)
from btcdirection.ingestion import CalendarFrame, Category, IntegrityError


# Naive per-index recomputations, written without the rolling helpers.

def _ema_oracle(x, w):
    a = 2.0 / (w + 1)
    out = [np.nan] * len(x)
    for t in range(w - 1, len(x)):
        # closed form: SMA seed decayed, plus weighted later inputs
        v = (1 - a) ** (t - w + 1) * sum(x[:w]) / w
        for j in range(w, t + 1):
            v += a * (1 - a) ** (t - j) * x[j]
        out[t] = v
    return out


def _rsi_oracle(x, w):
    out = [np.nan] * len(x)
    d = [x[i + 1] - x[i] for i in range(len(x) - 1)]
    for t in range(w, len(x)):
        g = sum(max(v, 0) for v in d[:w]) / w
        loss = sum(max(-v, 0) for v in d[:w]) / w
        for k in range(w, t):
            g = (g * (w - 1) + max(d[k], 0)) / w
            loss = (loss * (w - 1) + max(-d[k], 0)) / w
        out[t] = (50.0 if g == 0 else 100.0) if loss == 0 else 100 - 100 / (1 + g / loss)
    return out


def _oracle(x, kind, w):
    n = len(x)
    out = [np.nan] * n
    if kind is Kind.SMA:
        for t in range(w - 1, n):
            out[t] = sum(x[t - w + 1 : t + 1]) / w
    elif kind is Kind.WMA:
        for t in range(w - 1, n):
            out[t] = sum((i + 1) * x[t - w + 1 + i] for i in range(w)) / (w * (w + 1) / 2)
    elif kind is Kind.MOM:
        for t in range(w, n):
            out[t] = x[t] - x[t - w]
    elif kind is Kind.ROC:
        for t in range(w, n):
            out[t] = 0.0 if x[t - w] == 0 else 100 * (x[t] - x[t - w]) / x[t - w]
    elif kind in (Kind.STDDEV, Kind.VAR):
        for t in range(w - 1, n):
            win = x[t - w + 1 : t + 1]
            m = sum(win) / w
            var = sum((v - m) ** 2 for v in win) / (w - 1)
            out[t] = var if kind is Kind.VAR else var**0.5
    elif kind is Kind.EMA:
        out = _ema_oracle(x, w)
    elif kind is Kind.RSI:
        out = _rsi_oracle(x, w)
    elif kind is Kind.TRIX:
        e1 = _ema_oracle(x, w)
        e2 = [np.nan] * (w - 1) + _ema_oracle(e1[w - 1 :], w)
        s = 2 * (w - 1)
        e3 = [np.nan] * s + _ema_oracle(e2[s:], w)
        for t in range(3 * (w - 1) + 1, n):
            out[t] = 0.0 if e3[t - 1] == 0 else 100 * (e3[t] - e3[t - 1]) / e3[t - 1]
    return np.array(out, dtype=float)


series = st.lists(st.floats(1.0, 1000.0, allow_nan=False), min_size=12, max_size=40)


@given(series, st.sampled_from(list(Kind)), st.integers(2, 4))
def test_indicator_matches_windowed_oracle(x, kind, w):
    spec = IndicatorSpec(kind, w)
    got = compute_indicator(x, spec)
    want = _oracle(x, kind, w)
    np.testing.assert_array_equal(np.isnan(got), np.isnan(want))
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)
    assert np.isnan(got[: spec.warmup]).all()
    assert not np.isnan(got[spec.warmup :]).any()


@given(series, st.sampled_from(list(Kind)), st.integers(2, 4), st.data())
def test_indicator_is_causal(x, kind, w, data):
    spec = IndicatorSpec(kind, w)
    t = data.draw(st.integers(spec.warmup + 1, len(x)))
    full = compute_indicator(x, spec)
    cut = compute_indicator(x[:t], spec)
    np.testing.assert_array_equal(full[:t], cut)


@pytest.mark.parametrize("kind", list(Kind))
def test_warmup_exhausted(kind):
    spec = IndicatorSpec(kind, 5)
    with pytest.raises(WarmupError):
        compute_indicator(np.arange(1.0, spec.warmup + 1), spec)


def test_simple_examples():
    np.testing.assert_array_equal(compute_indicator([1, 2, 3], IndicatorSpec("SMA", 3)), [np.nan, np.nan, 2])
    c = compute_indicator(np.full(20, 7.0), IndicatorSpec("SMA", 5))
    np.testing.assert_array_equal(c[4:], 7.0)
    r = compute_indicator(np.arange(1.0, 30), IndicatorSpec("RSI", 14))
    np.testing.assert_array_equal(r[14:], 100.0)
    flat = compute_indicator(np.full(10, 3.0), IndicatorSpec("RSI", 3))
    np.testing.assert_array_equal(flat[3:], 50.0)
    roc = compute_indicator([0.0, 1.0, 2.0], IndicatorSpec("ROC", 2))
    assert roc[2] == 0.0


def test_spec_validation():
    with pytest.raises(ValueError):
        IndicatorSpec("SMA", 1)
    with pytest.raises(ValueError):
        IndicatorSpec("MACD", 5)
    assert IndicatorSpec("EMA", 7).name("btc.price") == "btc.price.EMA.7"


def test_missing_input_rejected():
    with pytest.raises(ValueError):
        compute_indicator([1.0, np.nan, 2.0, 3.0], IndicatorSpec("SMA", 2))


def _cal(cols, start="2020-01-01"):
    n = len(next(iter(cols.values())))
    dates = np.arange(np.datetime64(start), np.datetime64(start) + n)
    return CalendarFrame(dates, {k: np.asarray(v, float) for k, v in cols.items()}, {k: Category.INTERNAL for k in cols})


def test_one_column_all_specs_gives_45():
    rng = np.random.default_rng(0)
    f = _cal({"p": rng.uniform(1, 2, 400)})
    g = expand_features(f, ["p"], default_specs())
    assert len(g.names) == 1 + 45
    assert g.names[0] == "p"


def test_empty_specs_identity():
    f = _cal({"p": np.arange(1.0, 10)})
    assert expand_features(f, ["p"], []) is f


def test_expansion_matches_per_column_oracle():
    rng = np.random.default_rng(1)
    f = _cal({"a": rng.uniform(1, 2, 60), "b": rng.uniform(5, 9, 60)})
    specs = [IndicatorSpec("WMA", 3), IndicatorSpec("TRIX", 4)]
    g = expand_features(f, ["a", "b"], specs)
    new = [n for n in g.names if n not in f.names]
    assert len(new) == 4
    for base in ("a", "b"):
        for s in specs:
            np.testing.assert_array_equal(g.columns[s.name(base)], compute_indicator(f.columns[base], s))


def test_expansion_handles_late_start_and_collisions():
    x = np.r_[np.full(5, np.nan), np.arange(1.0, 21)]
    f = _cal({"a": x})
    g = expand_features(f, ["a"], [IndicatorSpec("SMA", 3)])
    col = g.columns["a.SMA.3"]
    assert np.isnan(col[:7]).all()
    np.testing.assert_allclose(col[7:], compute_indicator(x[5:], IndicatorSpec("SMA", 3))[2:])
    with pytest.raises(IntegrityError):
        expand_features(g, ["a"], [IndicatorSpec("SMA", 3)])
    with pytest.raises(KeyError):
        expand_features(f, ["zzz"], [IndicatorSpec("SMA", 3)])
    with pytest.raises(ValueError, match="interior"):
        expand_features(_cal({"a": [1.0, np.nan, 2.0, 3.0]}), ["a"], [IndicatorSpec("SMA", 2)])


def test_cyclical_known_days():
    monday = np.array(["2021-03-01"], dtype="datetime64[D]")  # also day-of-month 1
    assert day_of_week(monday)[0] == 0
    assert day_of_month(monday)[0] == 1
    np.testing.assert_allclose(cyclical_time_features(monday)[0], [0, 1, 0, 1], atol=1e-15)
    sunday = np.array(["2021-03-07"], dtype="datetime64[D]")
    assert day_of_week(sunday)[0] == 6


@given(st.integers(-20000, 30000))
def test_cyclical_on_unit_circle(offset):
    d = np.array([np.datetime64("1970-01-01") + offset])
    c = cyclical_time_features(d)[0]
    assert abs(c[0] ** 2 + c[1] ** 2 - 1) < 1e-12
    assert abs(c[2] ** 2 + c[3] ** 2 - 1) < 1e-12
    py = d[0].astype(object)
    assert day_of_week(d)[0] == py.weekday()
    assert day_of_month(d)[0] == py.day


def test_make_target_examples():
    np.testing.assert_array_equal(make_target([10, 11, 9]), [1, 0])
    np.testing.assert_array_equal(make_target(np.arange(5.0)), [1, 1, 1, 1])
    np.testing.assert_array_equal(make_target([10, 10]), [0])
    np.testing.assert_array_equal(make_target([1, 5, 2, 3], lag=2), [1, 0])
    with pytest.raises(ValueError):
        make_target([1, 2], lag=2)
    with pytest.raises(ValueError):
        make_target([1, 2], lag=0)


@given(st.lists(st.floats(1, 1e5, allow_nan=False), min_size=2, max_size=50))
def test_target_shares_orientation_with_buying(close):
    y = make_target(close)
    for t, label in enumerate(y):
        pnl = close[t + 1] - close[t]
        assert (label == 1) == (pnl > 0)


def test_build_dataset_drops_unlabelled_tail():
    f = _cal({"p": [1.0, 2.0, 1.5, 3.0, 2.0]})
    ds = build_dataset(f, "p")
    assert len(ds) == 4
    np.testing.assert_array_equal(ds.y, [1, 0, 1, 0])
    assert ds.feature_names == ["p", *CYCLICAL_NAMES]
    part = build_dataset(f, "p", start="2020-01-02", end="2020-01-03")
    np.testing.assert_array_equal(part.y, [0, 1])  # label of the last day reads the next close
    np.testing.assert_array_equal(part.X[:, 0], [2.0, 1.5])
    assert len(ds.subset([0, 2])) == 2
