import math

import numpy as np
import pytest

from wbgbrt.core_data import SeriesFrame, SplitSpec, split
from wbgbrt.errors import ConfigError, DataError
from wbgbrt.forecasting import (
    MultiOutputForecaster,
    fit_naive,
    fit_wb,
    forecast_naive,
    forecast_wb,
    load_forecaster,
    naive_inputs,
    persistence,
    save_forecaster,
)
from wbgbrt.gbrt import BoostParams, fit
from wbgbrt.windowing import WindowSpec, make_test_set

from oracles import rmse

SMALL = BoostParams(n_trees=30, learning_rate=0.2, max_depth=3)


def ar1(T, phi=0.9, seed=0, n=1):
    rng = np.random.default_rng(seed)
    y = np.zeros((n, T))
    eps = rng.normal(size=(n, T))
    for t in range(1, T):
        y[:, t] = phi * y[:, t - 1] + eps[:, t]
    return SeriesFrame(y, np.zeros((n, T, 0)))


# ----------------------------------------------------------------- W-b model


def test_one_engine_per_horizon_step():
    f = fit_wb(ar1(80), WindowSpec(4, 1), SMALL)
    assert f.h == 1 and len(f.models) == 1
    f = fit_wb(ar1(80), WindowSpec(4, 5), SMALL)
    assert f.h == 5
    assert forecast_wb(f, np.zeros(4)).shape == (5,)


def test_window_longer_than_series_is_rejected():
    with pytest.raises(DataError):
        fit_wb(ar1(6), WindowSpec(4, 3), SMALL)


def test_lookup_shape_is_checked():
    f = fit_wb(ar1(60), WindowSpec(4, 2), SMALL)
    with pytest.raises(DataError):
        forecast_wb(f, np.zeros(3))
    with pytest.raises(DataError):
        forecast_wb(f, np.zeros(4), np.zeros((4, 1)))


def test_horizon_independence():
    train = ar1(198, seed=3)
    f = fit_wb(train, WindowSpec(5, 3), SMALL)
    X = make_test_set(train.slice(0, 150), train.slice(150, 198), WindowSpec(5, 3)).X
    before = f.predict_windows(X)
    other = fit_wb(train, WindowSpec(5, 3), SMALL.replace(max_depth=1, n_trees=7))
    models = list(f.models)
    models[1] = other.models[1]
    after = MultiOutputForecaster(models, f.wspec, f.params, f.M).predict_windows(X)
    assert np.array_equal(after[:, [0, 2]], before[:, [0, 2]])
    assert not np.array_equal(after[:, 1], before[:, 1])


def test_no_test_target_leakage():
    frame = ar1(300, seed=5)
    train, _, test = split(frame, SplitSpec(250, 50))
    spec = WindowSpec(6, 5)
    f = fit_wb(train, spec, SMALL)
    clean = make_test_set(train, test, spec)
    rng = np.random.default_rng(9)
    for j in range(len(clean)):
        start = clean.anchor_t[j] + 1
        targets = test.targets.copy()
        targets[:, start:start + 5] = rng.normal(scale=100.0, size=(1, 5, 1))
        dirty = make_test_set(train, SeriesFrame(targets, test.covariates, t0=test.t0), spec)
        assert np.array_equal(dirty.X[j], clean.X[j])
        assert np.array_equal(f.predict_windows(dirty.X[j]), f.predict_windows(clean.X[j]))
        assert not np.array_equal(dirty.Y[j], clean.Y[j])


def test_wb_beats_naive_on_ar1():
    frame = ar1(2000, phi=0.9, seed=11)
    train, _, test = split(frame, SplitSpec(1600, 400))
    spec = WindowSpec(8, 4)
    params = BoostParams(n_trees=100, learning_rate=0.1, max_depth=4)
    wb = fit_wb(train, spec, params)
    ts = make_test_set(train, test, spec)
    wb_pred = wb.predict_windows(ts.X).ravel()
    truth = ts.Y.ravel()
    nv = fit_naive(train, params, "time_index")
    naive_pred = forecast_naive(nv, time_index=np.arange(1600, 2000))
    assert rmse(truth, wb_pred) < rmse(test.values[0], naive_pred)


def test_covariate_copy_of_target_is_learned():
    rng = np.random.default_rng(2)
    y = rng.normal(size=(1, 300))
    frame = SeriesFrame(y, y[:, :, None].copy())
    f = fit_naive(frame, BoostParams(n_trees=200, learning_rate=0.3, max_depth=6, min_child_weight=0))
    pred = forecast_naive(f, y[0, :, None])
    assert rmse(y[0], pred) < 1e-3 * np.std(y)


def test_constant_series_forecasts_constant():
    frame = SeriesFrame(np.full((2, 50), 7.0), np.zeros((2, 50, 0)))
    f = fit_wb(frame, WindowSpec(3, 2), SMALL)
    assert np.allclose(forecast_wb(f, [7.0, 7.0, 7.0]), 7.0, atol=1e-12)


# --------------------------------------------------------------- naive model


def test_zero_tree_naive_predicts_base_score():
    frame = SeriesFrame(np.arange(20.0)[None], np.arange(20.0)[None, :, None])
    f = fit_naive(frame, BoostParams(n_trees=0, base_score=2.5))
    assert forecast_naive(f, np.arange(7.0)[:, None]).tolist() == [2.5] * 7


def test_zero_tree_wb_predicts_base_score_everywhere():
    f = fit_wb(ar1(40), WindowSpec(3, 4), BoostParams(n_trees=0, base_score=-1.0))
    assert forecast_wb(f, [5.0, 6.0, 7.0]).tolist() == [-1.0] * 4


def test_naive_empty_rows_give_empty_vector():
    frame = SeriesFrame(np.arange(20.0)[None], np.arange(20.0)[None, :, None])
    f = fit_naive(frame, SMALL)
    assert forecast_naive(f, np.zeros((0, 1))).shape == (0,)
    g = fit_naive(ar1(20), SMALL)
    assert forecast_naive(g, time_index=[]).shape == (0,)


def test_naive_width_mismatch():
    frame = SeriesFrame(np.arange(20.0)[None], np.zeros((1, 20, 2)))
    f = fit_naive(frame, SMALL)
    with pytest.raises(DataError):
        forecast_naive(f, np.zeros((3, 3)))


def test_time_index_fallback_inputs():
    frame = ar1(10).slice(4, 10)
    X, names = naive_inputs(frame)
    assert names == ("time_index",)
    assert X.ravel().tolist() == [4, 5, 6, 7, 8, 9]
    with pytest.raises(ConfigError):
        naive_inputs(frame, "none")
    with pytest.raises(DataError):
        forecast_naive(fit_naive(frame, SMALL), None)


def test_naive_uses_only_same_time_inputs():
    # Shuffling rows of the test covariates shuffles the predictions identically.
    rng = np.random.default_rng(4)
    cov = rng.normal(size=(1, 100, 2))
    frame = SeriesFrame(cov[..., 0] * 2 + cov[..., 1], cov)
    f = fit_naive(frame, SMALL)
    rows = rng.normal(size=(30, 2))
    perm = rng.permutation(30)
    assert np.array_equal(forecast_naive(f, rows)[perm], forecast_naive(f, rows[perm]))


# --------------------------------------------------------------- persistence


def test_persistence_examples():
    assert persistence(3, 4).tolist() == [3, 3, 3, 3]
    assert persistence(-1.5, 1).tolist() == [-1.5]
    with pytest.raises(ConfigError):
        persistence(1.0, 0)


def expected_abs_error(last, forecast, k):
    """E|y_{t+k} - forecast| for a unit Gaussian random walk observed up to y_t = last."""
    mu, sd = last - forecast, math.sqrt(k)
    return sd * math.sqrt(2 / math.pi) * math.exp(-mu * mu / (2 * sd * sd)) + mu * math.erf(mu / (sd * math.sqrt(2)))


def test_persistence_beats_naive_on_random_walks():
    # Each forecast is scored by its exact expected MAE given the observed walk,
    # so the comparison is between expectations, not one noisy draw of the future.
    h, train_len = 12, 150
    params = BoostParams(n_trees=40, learning_rate=0.2, max_depth=3)
    p_err, n_err = [], []
    for seed in range(100):
        walk = np.cumsum(np.random.default_rng(seed).normal(size=train_len))
        train = SeriesFrame(walk[None], np.zeros((1, train_len, 0)))
        last = walk[-1]
        nv = forecast_naive(fit_naive(train, params), time_index=np.arange(train_len, train_len + h))
        p = persistence(last, h)
        p_err.append(np.mean([expected_abs_error(last, p[k], k + 1) for k in range(h)]))
        n_err.append(np.mean([expected_abs_error(last, nv[k], k + 1) for k in range(h)]))
    assert all(a <= b for a, b in zip(p_err, n_err))
    assert np.mean(p_err) < np.mean(n_err)


def test_expected_abs_error_matches_simulation():
    draws = np.random.default_rng(0).normal(size=400_000) * 2.0
    assert abs(np.mean(np.abs(1.0 + draws - 0.3)) - expected_abs_error(1.0, 0.3, 4)) < 0.01


# ------------------------------------------------------------- serialization


def test_save_load_round_trip(tmp_path):
    frame = SeriesFrame(ar1(121, seed=6).values, np.random.default_rng(1).normal(size=(1, 121, 2)),
                        covariate_names=("a", "b"))
    spec = WindowSpec(4, 3, "all_instances")
    f = fit_wb(frame, spec, SMALL)
    save_forecaster(f, tmp_path / "wb")
    g = load_forecaster(tmp_path / "wb")
    assert g.wspec == spec and g.M == 2 and g.covariate_names == ("a", "b")
    X = make_test_set(frame.slice(0, 100), frame.slice(100, 121), spec).X
    assert np.array_equal(f.predict_windows(X), g.predict_windows(X))

    nv = fit_naive(frame, SMALL)
    save_forecaster(nv, tmp_path / "naive")
    m = load_forecaster(tmp_path / "naive")
    rows = frame.covariates[0]
    assert np.array_equal(forecast_naive(nv, rows), forecast_naive(m, rows))


def test_load_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_forecaster(tmp_path)


def test_engines_share_one_parameter_set():
    f = fit_wb(ar1(60), WindowSpec(3, 3), SMALL)
    assert all(m.params == SMALL for m in f.models)


def test_single_fit_matches_direct_engine_call():
    frame = ar1(60, seed=8)
    f = fit_wb(frame, WindowSpec(3, 2), SMALL)
    from wbgbrt.windowing import make_training_set
    ws = make_training_set(frame, WindowSpec(3, 2))
    direct = fit(ws.X, ws.Y[:, 1], SMALL)
    assert np.array_equal(direct.predict(ws.X), f.models[1].predict(ws.X))
