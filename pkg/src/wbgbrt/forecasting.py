"""Window-based multi-output GBRT, point-wise naive GBRT, and persistence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core_data import SeriesFrame
from .errors import ConfigError, DataError
from .gbrt import BoostedModel, BoostParams, FeatureMatrix, fit
from .windowing import WindowSpec, flatten_window, make_test_set, make_training_set

MANIFEST = "manifest.json"
NAIVE_FALLBACKS = ("time_index", "none")


@dataclass(eq=False)
class MultiOutputForecaster:
    """One boosted model per horizon step, all trained on the same windows."""

    models: list[BoostedModel]
    wspec: WindowSpec
    params: BoostParams
    M: int
    covariate_names: tuple[str, ...] = ()

    @property
    def h(self) -> int:
        return len(self.models)

    def predict_windows(self, X: np.ndarray) -> np.ndarray:
        """Forecasts for flattened windows, shape ``(rows, h)``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return np.column_stack([m.predict(X) for m in self.models]) if len(X) else np.zeros((0, self.h))


@dataclass(eq=False)
class NaiveForecaster:
    """Point-wise model from same-time inputs to the same-time target.

    Inputs are the covariates; when there are none and ``fallback`` is
    ``time_index`` the absolute time index stands in.
    """

    model: BoostedModel
    M: int
    fallback: str = "time_index"
    covariate_names: tuple[str, ...] = ()
    inputs: tuple[str, ...] = field(default=())


def fit_wb(train: SeriesFrame, wspec: WindowSpec, params: BoostParams, valid: SeriesFrame | None = None,
           backend: str | None = None) -> MultiOutputForecaster:
    """Train ``h`` engines on the pooled windows of ``train``.

    With ``valid`` (the frame immediately after ``train``) each engine gets
    the tiled validation windows as its evaluation set, which drives early
    stopping when ``params.early_stopping_rounds`` is set.
    """
    ws = make_training_set(train, wspec)
    fm = FeatureMatrix(ws.X)
    eval_ws = None
    if valid is not None and valid.T >= wspec.h:
        eval_ws = make_test_set(train, valid, wspec)
    models = []
    for k in range(wspec.h):
        eval_set = None if eval_ws is None else (eval_ws.X, eval_ws.Y[:, k])
        models.append(fit(fm, ws.Y[:, k], params, eval_set=eval_set, backend=backend))
    return MultiOutputForecaster(models, wspec, params, train.M, train.covariate_names)


def forecast_wb(f: MultiOutputForecaster, lookup_targets, lookup_covariates=None) -> np.ndarray:
    """Forecast the next ``h`` values from the last ``w`` observed rows."""
    lookup_targets = np.asarray(lookup_targets, dtype=np.float64).reshape(-1)
    if lookup_targets.size != f.wspec.w:
        raise DataError(f"lookup has {lookup_targets.size} rows, the forecaster needs w={f.wspec.w}")
    cov = np.zeros((f.wspec.w, 0)) if lookup_covariates is None else np.asarray(lookup_covariates, dtype=np.float64)
    if cov.ndim == 1:
        cov = cov.reshape(f.wspec.w, -1) if cov.size else np.zeros((f.wspec.w, 0))
    if cov.shape != (f.wspec.w, f.M):
        raise DataError(f"lookup covariates must have shape ({f.wspec.w}, {f.M}), got {cov.shape}")
    if f.wspec.series_feature:
        raise ConfigError("forecaster uses a series-id feature; use predict_windows with full rows")
    x = flatten_window(lookup_targets, cov, f.wspec.mode)
    return f.predict_windows(x)[0]


def naive_inputs(frame: SeriesFrame, fallback: str = "time_index") -> tuple[np.ndarray, tuple[str, ...]]:
    """Point-wise input rows for every (series, time) pair, series-major."""
    if fallback not in NAIVE_FALLBACKS:
        raise ConfigError(f"unknown naive fallback {fallback!r}; choose from {NAIVE_FALLBACKS}")
    if frame.M:
        return frame.covariates.reshape(frame.n * frame.T, frame.M), frame.covariate_names
    if fallback == "none":
        raise ConfigError("naive forecaster has no inputs: M=0 and the time-index fallback is disabled")
    t = np.arange(frame.t0, frame.t0 + frame.T, dtype=np.float64)
    return np.tile(t, frame.n).reshape(-1, 1), ("time_index",)


def fit_naive(train: SeriesFrame, params: BoostParams, fallback: str = "time_index",
              backend: str | None = None) -> NaiveForecaster:
    """Fit one engine on every training point of every series."""
    if train.T < 1:
        raise DataError("empty training frame")
    X, names = naive_inputs(train, fallback)
    y = train.values.reshape(-1)
    model = fit(X, y, params, backend=backend)
    return NaiveForecaster(model, train.M, fallback, train.covariate_names, names)


def forecast_naive(f: NaiveForecaster, test_covariates=None, time_index=None) -> np.ndarray:
    """One prediction per test row from same-time inputs only.

    Pass ``test_covariates`` as ``(rows, M)``; forecasters fitted with the
    time-index fallback take ``time_index`` instead.
    """
    if f.M == 0:
        if time_index is None:
            raise DataError("this naive forecaster needs the absolute time index of each test row")
        X = np.asarray(time_index, dtype=np.float64).reshape(-1, 1)
    else:
        X = np.asarray(test_covariates, dtype=np.float64)
        if X.size == 0:
            return np.zeros(0)
        X = X.reshape(-1, f.M) if X.ndim == 1 else X
        if X.shape[1] != f.M:
            raise DataError(f"expected {f.M} covariates per row, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.zeros(0)
    return f.model.predict(X)


def persistence(last_value: float, h: int) -> np.ndarray:
    """Repeat the last observed value ``h`` times."""
    if h < 1:
        raise ConfigError("h must be >= 1")
    return np.full(h, float(last_value))


# ------------------------------------------------------------ serialization


def save_forecaster(f: MultiOutputForecaster | NaiveForecaster, directory: str | os.PathLike) -> None:
    """Write one JSON file per engine plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    if isinstance(f, MultiOutputForecaster):
        models = f.models
        manifest = {
            "kind": "window_based",
            "w": f.wspec.w,
            "h": f.wspec.h,
            "mode": f.wspec.mode,
            "stride": f.wspec.stride,
            "series_feature": f.wspec.series_feature,
            "params": f.params.to_dict(),
        }
    else:
        models = [f.model]
        manifest = {"kind": "naive", "fallback": f.fallback, "inputs": list(f.inputs)}
    manifest.update(M=f.M, covariate_names=list(f.covariate_names),
                    engines=[f"engine_{k:03d}.json" for k in range(len(models))])
    for name, m in zip(manifest["engines"], models):
        m.save(os.path.join(directory, name))
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_forecaster(directory: str | os.PathLike) -> MultiOutputForecaster | NaiveForecaster:
    path = os.path.join(directory, MANIFEST)
    if not os.path.isfile(path):
        raise DataError(f"no forecaster manifest at {path}")
    with open(path, encoding="utf-8") as fh:
        man = json.load(fh)
    models = [BoostedModel.load(os.path.join(directory, name)) for name in man["engines"]]
    if man["kind"] == "naive":
        return NaiveForecaster(models[0], man["M"], man["fallback"], tuple(man["covariate_names"]),
                               tuple(man["inputs"]))
    wspec = WindowSpec(man["w"], man["h"], man["mode"], man["stride"], man["series_feature"])
    return MultiOutputForecaster(models, wspec, BoostParams.from_dict(man["params"]), man["M"],
                                 tuple(man["covariate_names"]))
