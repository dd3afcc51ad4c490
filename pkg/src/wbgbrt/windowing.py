"""Window-based supervised instances from a :class:`SeriesFrame`.

Each instance flattens a lookup window of ``w`` target values (oldest
first) followed by covariates, and carries the next ``h`` targets as its
label vector.  Covariates are appended either for the last lookup step
only (``last_instance``), for every lookup step (``all_instances``), or
not at all (``targets_only``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core_data import SeriesFrame
from .errors import ConfigError, DataError

MODES = ("last_instance", "all_instances", "targets_only")


@dataclass(frozen=True)
class WindowSpec:
    w: int
    h: int
    mode: str = "last_instance"
    stride: int = 1
    series_feature: bool = False

    def __post_init__(self):
        if self.w < 1 or self.h < 1 or self.stride < 1:
            raise ConfigError(f"w, h and stride must be >= 1, got {self.w}, {self.h}, {self.stride}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown window mode {self.mode!r}; choose from {MODES}")

    def width(self, M: int) -> int:
        """Length of a flattened input vector for ``M`` covariate channels."""
        base = {"last_instance": self.w + M, "all_instances": self.w * (1 + M), "targets_only": self.w}
        return base[self.mode] + int(self.series_feature)


@dataclass(frozen=True)
class FlatInstance:
    series_id: int
    anchor_t: int
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class WindowedSet:
    """A batch of flattened instances stored column-wise.

    ``anchor_t`` is relative to the frame the windows were cut from.  ``Y``
    holds the future targets; for test windows whose horizon reaches past
    the observed data it is absent.
    """

    X: np.ndarray
    Y: np.ndarray
    series_id: np.ndarray
    anchor_t: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[FlatInstance]:
        for k in range(len(self)):
            yield FlatInstance(int(self.series_id[k]), int(self.anchor_t[k]), self.X[k], self.Y[k])

    def __getitem__(self, k: int) -> FlatInstance:
        return FlatInstance(int(self.series_id[k]), int(self.anchor_t[k]), self.X[k], self.Y[k])


def flatten_window(targets: np.ndarray, covariates: np.ndarray | None = None, mode: str = "last_instance") -> np.ndarray:
    """Rearrange one ``w x (1 + M)`` window into a flat vector.

    ``targets`` has length ``w`` and ``covariates`` shape ``(w, M)``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown window mode {mode!r}")
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    w = targets.size
    if w < 1:
        raise DataError("window has no rows")
    cov = np.zeros((w, 0)) if covariates is None else np.asarray(covariates, dtype=np.float64)
    if cov.ndim == 1:
        cov = cov.reshape(w, -1) if cov.size else np.zeros((w, 0))
    if cov.shape[0] != w:
        raise DataError(f"window has {w} target rows but {cov.shape[0]} covariate rows")
    if mode == "targets_only" or cov.shape[1] == 0:
        return targets.copy()
    if mode == "last_instance":
        return np.concatenate([targets, cov[-1]])
    return np.concatenate([targets, cov.reshape(-1)])


def _flatten_anchors(frame: SeriesFrame, spec: WindowSpec, anchors: np.ndarray, horizon: bool) -> WindowedSet:
    w, h = spec.w, spec.h
    n, M = frame.n, frame.M
    y_all = frame.values
    # (n, T-w+1, w): lookup window ending at anchor a sits at row a-w+1
    lookups = sliding_window_view(y_all, w, axis=1)[:, anchors - w + 1]
    parts = [lookups]
    if spec.mode == "last_instance" and M:
        parts.append(frame.covariates[:, anchors])
    elif spec.mode == "all_instances" and M:
        cw = sliding_window_view(frame.covariates, w, axis=1)[:, anchors - w + 1]  # (n, A, M, w)
        parts.append(np.swapaxes(cw, 2, 3).reshape(n, anchors.size, w * M))
    if spec.series_feature:
        parts.append(np.broadcast_to(np.arange(n, dtype=np.float64)[:, None, None], (n, anchors.size, 1)))
    X = np.concatenate(parts, axis=2).reshape(n * anchors.size, spec.width(M))
    if horizon:
        Y = sliding_window_view(y_all, h, axis=1)[:, anchors + 1].reshape(n * anchors.size, h)
    else:
        Y = np.full((n * anchors.size, h), np.nan)
    return WindowedSet(
        X=np.ascontiguousarray(X),
        Y=np.ascontiguousarray(Y),
        series_id=np.repeat(np.arange(n), anchors.size),
        anchor_t=np.tile(anchors, n),
    )


def make_training_set(frame: SeriesFrame, spec: WindowSpec) -> WindowedSet:
    """All windows with anchors ``w-1, w-1+stride, ... <= T-h-1``, pooled over series.

    Rows are ordered series-major, then by ascending anchor.
    """
    if frame.T < spec.w + spec.h:
        raise DataError(f"series length {frame.T} is shorter than w + h = {spec.w + spec.h}")
    anchors = np.arange(spec.w - 1, frame.T - spec.h, spec.stride)
    return _flatten_anchors(frame, spec, anchors, horizon=True)


def concat_frames(head: SeriesFrame, tail: SeriesFrame) -> SeriesFrame:
    """Join two time-adjacent frames with the same series and channels."""
    if head.n != tail.n or head.M != tail.M:
        raise DataError("frames differ in series count or covariate channels")
    if head.t0 + head.T != tail.t0:
        raise DataError(f"frames are not adjacent: [{head.t0}, {head.t0 + head.T}) then {tail.t0}")
    ts = None
    if head.timestamps is not None and tail.timestamps is not None:
        ts = np.concatenate([head.timestamps, tail.timestamps])
    return SeriesFrame(
        targets=np.concatenate([head.targets, tail.targets], axis=1),
        covariates=np.concatenate([head.covariates, tail.covariates], axis=1),
        timestamps=ts,
        sample_rate=head.sample_rate,
        series_names=head.series_names,
        covariate_names=head.covariate_names,
        target_name=head.target_name,
        t0=head.t0,
    )


def n_test_windows(tau: int, h: int) -> int:
    """Number of whole ``h``-blocks in a test region of ``tau`` points."""
    return tau // h


def make_test_set(train_tail: SeriesFrame, test: SeriesFrame, spec: WindowSpec) -> WindowedSet:
    """Non-overlapping forecast windows tiling ``test``.

    The first anchor is the last point of ``train_tail``; later anchors
    advance by ``h`` and their lookup windows use the true observed values
    of ``test``.  ``anchor_t`` is returned relative to ``test``, so anchor
    ``-1`` is the last training point and window ``k`` predicts test
    indices ``[k*h, (k+1)*h)``.  A trailing partial block is dropped with
    a warning.
    """
    if train_tail.T < spec.w:
        raise DataError(f"need {spec.w} points before the test region, have {train_tail.T}")
    tail = train_tail.slice(train_tail.T - spec.w, train_tail.T)
    if test.t0 != tail.t0 + tail.T:
        test = replace(test, t0=tail.t0 + tail.T)
    joined = concat_frames(tail, test)
    k = test.T // spec.h
    if test.T % spec.h:
        warnings.warn(
            f"test length {test.T} is not a multiple of h={spec.h}; "
            f"dropping the final {test.T % spec.h} points",
            stacklevel=2,
        )
    if k == 0:
        empty = np.zeros(0, dtype=np.int64)
        return WindowedSet(np.zeros((0, spec.width(test.M))), np.zeros((0, spec.h)), empty, empty)
    anchors = spec.w - 1 + spec.h * np.arange(k)
    ws = _flatten_anchors(joined, spec, anchors, horizon=True)
    return WindowedSet(ws.X, ws.Y, ws.series_id, ws.anchor_t - spec.w)

