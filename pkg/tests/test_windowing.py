import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbgbrt.core_data import SeriesFrame, SplitSpec, split
from wbgbrt.errors import ConfigError, DataError
from wbgbrt.windowing import (
    WindowSpec,
    flatten_window,
    make_test_set,
    make_training_set,
    n_test_windows,
)


def time_coded(n, T, M):
    """Frame whose values encode their own time index: target t + 1000 i, covariate m is t + m / 10."""
    t = np.arange(T, dtype=float)
    targets = t[None, :] + 1000.0 * np.arange(n)[:, None]
    cov = np.broadcast_to(t[None, :, None] + np.arange(M)[None, None, :] / 10.0, (n, T, M)).copy()
    return SeriesFrame(targets, cov)


def brute_force_anchors(T, w, h, stride):
    out, t = [], w - 1
    while t + h <= T - 1:
        out.append(t)
        t += stride
    return out


# ------------------------------------------------------------- flatten_window


def test_flatten_targets_only():
    assert flatten_window([1, 2, 3]).tolist() == [1, 2, 3]


def test_flatten_last_instance():
    x = flatten_window([5, 7], [[0.9, 0.8], [0.1, 0.2]], "last_instance")
    assert x.tolist() == [5, 7, 0.1, 0.2]


def test_flatten_all_instances():
    x = flatten_window([5, 7], [[0.9, 0.8], [0.1, 0.2]], "all_instances")
    assert x.tolist() == [5, 7, 0.9, 0.8, 0.1, 0.2]


def test_flatten_wrong_row_count():
    with pytest.raises(DataError):
        flatten_window([5, 7], [[0.9, 0.8]], "last_instance")


def test_targets_only_equals_last_instance_without_covariates():
    assert flatten_window([1, 2], None, "targets_only").tolist() == flatten_window([1, 2], None).tolist()


def test_window_spec_validation():
    with pytest.raises(ConfigError):
        WindowSpec(0, 1)
    with pytest.raises(ConfigError):
        WindowSpec(1, 1, mode="sideways")


@settings(max_examples=100, deadline=None)
@given(w=st.integers(1, 4), M=st.integers(0, 3), data=st.data())
def test_flatten_is_injective_per_mode(w, M, data):
    vals = st.integers(-3, 3).map(float)
    a_t = data.draw(st.lists(vals, min_size=w, max_size=w))
    b_t = data.draw(st.lists(vals, min_size=w, max_size=w))
    a_c = np.array(data.draw(st.lists(vals, min_size=w * M, max_size=w * M))).reshape(w, M)
    b_c = np.array(data.draw(st.lists(vals, min_size=w * M, max_size=w * M))).reshape(w, M)
    same_all = a_t == b_t and np.array_equal(a_c, b_c)
    same_last = a_t == b_t and np.array_equal(a_c[-1:], b_c[-1:])
    fa, fb = flatten_window(a_t, a_c, "all_instances"), flatten_window(b_t, b_c, "all_instances")
    assert np.array_equal(fa, fb) == same_all
    la, lb = flatten_window(a_t, a_c, "last_instance"), flatten_window(b_t, b_c, "last_instance")
    assert np.array_equal(la, lb) == same_last


# ---------------------------------------------------------- training windows


def test_small_training_set():
    ws = make_training_set(time_coded(1, 10, 0), WindowSpec(3, 2))
    assert len(ws) == 6
    assert ws.anchor_t.tolist() == [2, 3, 4, 5, 6, 7]
    assert ws[0].x.tolist() == [0, 1, 2] and ws[0].y.tolist() == [3, 4]


def test_too_short_series_rejected():
    with pytest.raises(DataError):
        make_training_set(time_coded(1, 5, 0), WindowSpec(3, 3))


def test_exchange_rate_training_count_matches_enumeration():
    frame = SeriesFrame(np.zeros((8, 6048)), np.zeros((8, 6048, 0)))
    ws = make_training_set(frame, WindowSpec(24, 24))
    per_series = len(brute_force_anchors(6048, 24, 24, 1))
    assert per_series == 6001
    assert len(ws) == 8 * per_series == 48008


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 3), T=st.integers(2, 40), w=st.integers(1, 6), h=st.integers(1, 6), stride=st.integers(1, 5))
def test_anchor_enumeration_and_count(n, T, w, h, stride):
    if T < w + h:
        with pytest.raises(DataError):
            make_training_set(time_coded(n, T, 0), WindowSpec(w, h, stride=stride))
        return
    ws = make_training_set(time_coded(n, T, 0), WindowSpec(w, h, stride=stride))
    expect = brute_force_anchors(T, w, h, stride)
    assert len(expect) == (T - w - h) // stride + 1
    assert ws.anchor_t.tolist() == expect * n
    assert ws.series_id.tolist() == [i for i in range(n) for _ in expect]


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 3), T=st.integers(4, 30), w=st.integers(1, 4), h=st.integers(1, 4), M=st.integers(0, 3),
       mode=st.sampled_from(["last_instance", "all_instances", "targets_only"]))
def test_shape_law_and_no_leakage(n, T, w, h, M, mode):
    if T < w + h:
        return
    frame = time_coded(n, T, M)
    spec = WindowSpec(w, h, mode)
    ws = make_training_set(frame, spec)
    width = {"last_instance": w + M, "all_instances": w * (1 + M), "targets_only": w}[mode]
    assert ws.X.shape[1] == width == spec.width(M)
    for inst in ws:
        times = np.floor(inst.x % 1000.0)  # time index encoded in every value
        assert times.max() <= inst.anchor_t
        assert np.all(inst.y - 1000.0 * inst.series_id > inst.anchor_t)
        assert inst.y.tolist() == [inst.anchor_t + k + 1 + 1000.0 * inst.series_id for k in range(h)]
        assert inst.x[:w].tolist() == [inst.anchor_t - w + 1 + k + 1000.0 * inst.series_id for k in range(w)]


def test_all_instances_layout_is_step_major():
    frame = time_coded(1, 8, 2)
    x = make_training_set(frame, WindowSpec(2, 1, "all_instances"))[0].x
    assert x.tolist() == [0, 1, 0.0, 0.1, 1.0, 1.1]


def test_series_feature_appends_series_index():
    ws = make_training_set(time_coded(3, 6, 1), WindowSpec(2, 1, series_feature=True))
    assert ws.X[:, -1].tolist() == [i for i in range(3) for _ in range(4)]
    assert ws.X.shape[1] == WindowSpec(2, 1, series_feature=True).width(1) == 4


# --------------------------------------------------------------- test tiling


def test_electricity_tiling_seven_windows():
    frame = time_coded(2, 400, 1)
    train, _, test = split(frame, SplitSpec(232, 168))
    ts = make_test_set(train, test, WindowSpec(24, 24))
    assert len(ts) == 2 * 7 == 2 * n_test_windows(168, 24)
    covered = ts.anchor_t[:, None] + 1 + np.arange(24)
    for i in range(2):
        got = np.sort(covered[ts.series_id == i].ravel())
        assert got.tolist() == list(range(168))


def test_pems_tiling_count():
    assert n_test_windows(1440, 9) == 160


def test_partial_trailing_block_is_dropped_with_warning():
    frame = time_coded(1, 30, 0)
    train, _, test = split(frame, SplitSpec(20, 10))
    with pytest.warns(UserWarning, match="dropping the final 2"):
        ts = make_test_set(train, test, WindowSpec(4, 4))
    assert len(ts) == 2
    assert ts.Y.ravel().tolist() == list(range(20, 28))


def test_test_windows_use_true_history_across_boundary():
    frame = time_coded(1, 40, 1)
    train, _, test = split(frame, SplitSpec(30, 10))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ts = make_test_set(train, test, WindowSpec(3, 5))
    assert ts.anchor_t.tolist() == [-1, 4]
    assert ts.X[0].tolist() == [27, 28, 29, 29.0]
    assert ts.X[1].tolist() == [32, 33, 34, 34.0]
    assert ts.Y.tolist() == [[30, 31, 32, 33, 34], [35, 36, 37, 38, 39]]


def test_test_set_needs_w_points_of_history():
    frame = time_coded(1, 12, 0)
    with pytest.raises(DataError):
        make_test_set(frame.slice(0, 2), frame.slice(2, 12), WindowSpec(3, 2))


@settings(max_examples=60, deadline=None)
@given(tau=st.integers(1, 60), h=st.integers(1, 12), w=st.integers(1, 5))
def test_tiling_covers_each_point_once(tau, h, w):
    frame = time_coded(1, w + tau, 0)
    train, test = frame.slice(0, w), frame.slice(w, w + tau)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ts = make_test_set(train, test, WindowSpec(w, h))
    covered = sorted((ts.anchor_t[:, None] + 1 + np.arange(h)).ravel().tolist())
    assert covered == list(range(h * (tau // h)))
    assert ts.Y.ravel().tolist() == [w + k for k in covered]
