"""Experiment protocol: grid search on the validation tail, final retrain, test scoring.

The test slice of the frame is cut only after every model has been
selected, and the final models are checked to have been trained on time
indices strictly before the first evaluated test point.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import re
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .. import __version__
from ..core_data import Scaler, SeriesFrame, derive_time_covariates, impute_missing, load_delimited, split
from ..errors import ConfigError, DataError, NumericalError, WbgbrtError
from ..forecasting import MultiOutputForecaster, NaiveForecaster, naive_inputs
from ..gbrt import BACKEND, BoostParams, FeatureMatrix, fit
from ..metrics import LOWER_IS_BETTER, EvalReport, evaluate, render_table, report_rows
from ..windowing import WindowSpec, concat_frames, make_test_set, make_training_set
from .config import ExperimentConfig

log = logging.getLogger(__name__)

REPORT_TXT = "report.txt"
REPORT_CSV = "report.csv"
REPORTS_JSON = "reports.json"
SELECTION_JSON = "selection.json"
MANIFEST_JSON = "manifest.json"


# ------------------------------------------------------------------ data


def prepare_frame(cfg: ExperimentConfig) -> SeriesFrame:
    """Load, subset, impute and apply the covariate plan."""
    if not os.path.isfile(cfg.data.path):
        raise DataError(f"dataset file not found: {cfg.data.path} (see scripts/fetch_datasets.sh)")
    frame = load_delimited(cfg.data.path, cfg.data.schema())
    if cfg.data.series is not None:
        frame = frame.select_series(cfg.data.series)
    frame = impute_missing(frame, cfg.data.impute)
    plan = cfg.data.covariate_plan
    if plan in ("none", "time"):
        frame = replace(frame, covariates=np.zeros((frame.n, frame.T, 0)), covariate_names=())
    if plan in ("time", "native+time"):
        frame = derive_time_covariates(frame, cfg.data.time_features)
    return frame


# ------------------------------------------------------------ model fitting


def _describe(bp: BoostParams, ws: WindowSpec | None) -> dict:
    d = bp.to_dict()
    if ws is not None:
        d.update({f"window.{k}": v for k, v in (("w", ws.w), ("h", ws.h), ("mode", ws.mode),
                                                 ("stride", ws.stride), ("series_feature", ws.series_feature))})
    return d


def _wrap(exc: WbgbrtError, where: str) -> WbgbrtError:
    out = type(exc)(f"{where}: {exc}")
    out.__cause__ = exc
    return out


def fit_wb_rounds(train: SeriesFrame, ws: WindowSpec, bp: BoostParams, eval_frame: SeriesFrame | None = None,
                  rounds: list[int] | None = None, backend: str | None = None) -> MultiOutputForecaster:
    """Window-based fit with an optional per-horizon round count."""
    tr = make_training_set(train, ws)
    fm = FeatureMatrix(tr.X)
    ev = make_test_set(train, eval_frame, ws) if eval_frame is not None else None
    models = []
    for k in range(ws.h):
        p = bp if rounds is None else bp.replace(n_trees=max(1, rounds[k]), early_stopping_rounds=None)
        eval_set = None if ev is None or len(ev) == 0 else (ev.X, ev.Y[:, k])
        models.append(fit(fm, tr.Y[:, k], p, eval_set=eval_set, backend=backend))
    return MultiOutputForecaster(models, ws, bp, train.M, train.covariate_names)


def fit_naive_rounds(train: SeriesFrame, bp: BoostParams, fallback: str, eval_frame: SeriesFrame | None = None,
                     rounds: int | None = None, backend: str | None = None) -> NaiveForecaster:
    X, names = naive_inputs(train, fallback)
    eval_set = None
    if eval_frame is not None and eval_frame.T:
        eval_set = (naive_inputs(eval_frame, fallback)[0], eval_frame.values.reshape(-1))
    p = bp if rounds is None else bp.replace(n_trees=max(1, rounds), early_stopping_rounds=None)
    model = fit(X, train.values.reshape(-1), p, eval_set=eval_set, backend=backend)
    return NaiveForecaster(model, train.M, fallback, train.covariate_names, names)


# ------------------------------------------------------------- forecasting


@dataclass
class Forecasts:
    """Aligned ``(n, points)`` actual and predicted arrays plus their time indices."""

    actual: np.ndarray
    predicted: np.ndarray
    time_index: np.ndarray
    dropped: int = 0


def _tiled(history: SeriesFrame, target: SeriesFrame, h: int) -> tuple[int, int]:
    k = target.T // h
    return k, target.T - k * h


def forecast_wb_tiled(f: MultiOutputForecaster, history: SeriesFrame, target: SeriesFrame) -> Forecasts:
    """Rolling-origin forecasts of ``target`` in non-overlapping ``h``-blocks."""
    ws = f.wspec
    k, dropped = _tiled(history, target, ws.h)
    tset = make_test_set(history, target, ws)
    pred = f.predict_windows(tset.X).reshape(target.n, k * ws.h)
    actual = tset.Y.reshape(target.n, k * ws.h)
    return Forecasts(actual, pred, target.t0 + np.arange(k * ws.h), dropped)


def forecast_naive_points(f: NaiveForecaster, target: SeriesFrame, points: int) -> Forecasts:
    sub = target.slice(0, points)
    X, _ = naive_inputs(sub, f.fallback)
    pred = f.model.predict(X).reshape(sub.n, points) if points else np.zeros((sub.n, 0))
    return Forecasts(sub.values.copy(), pred, sub.t0 + np.arange(points), target.T - points)


def forecast_persistence(history: SeriesFrame, target: SeriesFrame, h: int) -> Forecasts:
    k, dropped = _tiled(history, target, h)
    joined = concat_frames(history.slice(history.T - 1, history.T), replace(target, t0=history.t0 + history.T))
    last = joined.values[:, h * np.arange(k)]
    pred = np.repeat(last, h, axis=1)
    return Forecasts(target.values[:, : k * h].copy(), pred, target.t0 + np.arange(k * h), dropped)


def _unscale(fc: Forecasts, scaler: Scaler | None) -> Forecasts:
    if scaler is None:
        return fc
    s = np.arange(fc.actual.shape[0])[:, None]
    return replace(fc, actual=scaler.inverse(fc.actual, s), predicted=scaler.inverse(fc.predicted, s))


def _score(fc: Forecasts, metrics: list[str]) -> dict[str, float]:
    if not np.isfinite(fc.predicted).all():
        raise NumericalError("non-finite forecasts")
    return evaluate(fc.actual, fc.predicted, metrics)[0]


# ---------------------------------------------------------------- selection


@dataclass
class Selection:
    model: str
    params: BoostParams
    window: WindowSpec | None
    rounds: list[int] | None = None
    candidates: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "selected": _describe(self.params, self.window),
            "rounds": self.rounds,
            "candidates": self.candidates,
        }


def _naive_points(cfg: ExperimentConfig) -> list[BoostParams]:
    seen, out = set(), []
    for bp, _ in cfg.grid_points():
        key = json.dumps(bp.to_dict(), sort_keys=True)
        if key not in seen:
            seen.add(key)
            out.append(bp)
    return out


def select_models(cfg: ExperimentConfig, train_region: SeriesFrame, scaler: Scaler | None = None,
                  backend: str | None = None) -> dict[str, Selection]:
    """Grid search each model on ``[0, t' - valid_len)`` scored on the validation tail.

    Only the training region (``[0, t')``) is passed in; the test slice
    does not exist yet.
    """
    vlen = cfg.split.valid_len
    inner = train_region.slice(0, train_region.T - vlen)
    valid = train_region.slice(train_region.T - vlen, train_region.T)
    primary = cfg.metrics[0]
    sign = 1.0 if LOWER_IS_BETTER[primary] else -1.0
    use_valid = vlen > 0
    out: dict[str, Selection] = {}

    if "wb" in cfg.models:
        points = cfg.grid_points()
        need_valid = len(points) > 1 or cfg.boost.early_stopping_rounds is not None
        if need_valid and (not use_valid or vlen < max(ws.h for _, ws in points)):
            raise ConfigError("grid search and early stopping need split.valid_len >= h")
        best, cands = None, []
        for i, (bp, ws) in enumerate(points):
            if not need_valid:
                out["wb"] = Selection("wb", bp, ws)
                break
            try:
                f = fit_wb_rounds(inner, ws, bp, valid, backend=backend)
                vals = _score(_unscale(forecast_wb_tiled(f, inner, valid), scaler), cfg.metrics)
            except WbgbrtError as exc:
                raise _wrap(exc, f"wb grid point {i} {_describe(bp, ws)}") from exc
            rounds = [m.best_round or len(m.trees) for m in f.models] if bp.early_stopping_rounds else None
            cands.append({"point": _describe(bp, ws), "valid": vals, "rounds": rounds})
            log.info("wb grid point %d/%d %s=%.6g", i + 1, len(points), primary, vals[primary])
            if best is None or sign * vals[primary] < sign * best[0]:
                best = (vals[primary], Selection("wb", bp, ws, rounds))
        if best is not None:
            best[1].candidates = cands
            out["wb"] = best[1]

    if "naive" in cfg.models:
        points = _naive_points(cfg)
        need_valid = len(points) > 1 or cfg.boost.early_stopping_rounds is not None
        if need_valid and not use_valid:
            raise ConfigError("grid search and early stopping need split.valid_len > 0")
        best, cands = None, []
        for i, bp in enumerate(points):
            if not need_valid:
                out["naive"] = Selection("naive", bp, None)
                break
            try:
                f = fit_naive_rounds(inner, bp, cfg.naive_fallback, valid, backend=backend)
                vals = _score(_unscale(forecast_naive_points(f, valid, valid.T), scaler), cfg.metrics)
            except WbgbrtError as exc:
                raise _wrap(exc, f"naive grid point {i} {_describe(bp, None)}") from exc
            rounds = [f.model.best_round or len(f.model.trees)] if bp.early_stopping_rounds else None
            cands.append({"point": _describe(bp, None), "valid": vals, "rounds": rounds})
            if best is None or sign * vals[primary] < sign * best[0]:
                best = (vals[primary], Selection("naive", bp, None, rounds))
        if best is not None:
            best[1].candidates = cands
            out["naive"] = best[1]

    if "persistence" in cfg.models:
        out["persistence"] = Selection("persistence", cfg.boost, cfg.window)
    return out


# ----------------------------------------------------------------- protocol


@dataclass
class RunResult:
    reports: list[EvalReport]
    selections: dict[str, Selection]
    ranges: dict[str, dict[str, list[int]]]
    frame_info: dict


def _notes(cfg: ExperimentConfig, model: str, fc: Forecasts, extra: dict | None = None) -> dict:
    notes = {
        "aggregation": "pooled",
        "impute": cfg.data.impute,
        "covariate_plan": cfg.data.covariate_plan,
        "standardize": cfg.data.standardize,
        "evaluated_points": int(fc.actual.size),
    }
    if fc.dropped:
        notes["dropped_trailing_points"] = fc.dropped
    if model == "naive":
        notes["naive_fallback"] = cfg.naive_fallback
    notes.update(extra or {})
    return notes


def _predictions(frame: SeriesFrame, fc: Forecasts) -> dict[str, list]:
    n, p = fc.actual.shape
    return {
        "series": [frame.series_names[i] for i in range(n) for _ in range(p)],
        "time_index": [int(t) for _ in range(n) for t in fc.time_index],
        "actual": [float(v) for v in fc.actual.reshape(-1)],
        "predicted": [float(v) for v in fc.predicted.reshape(-1)],
    }


def _per_series(fc: Forecasts, frame: SeriesFrame, metrics: list[str]) -> dict[str, dict[str, float]]:
    out = {}
    for i in range(fc.actual.shape[0]):
        try:
            out[frame.series_names[i]] = evaluate(fc.actual[i : i + 1], fc.predicted[i : i + 1], metrics)[0]
        except NumericalError as exc:
            out[frame.series_names[i]] = {"error": str(exc)}
    return out


def run_experiment(cfg: ExperimentConfig, backend: str | None = None, frame: SeriesFrame | None = None) -> RunResult:
    """Grid search, final retrain on ``[0, t')`` and evaluation on the tiled test region."""
    frame = prepare_frame(cfg) if frame is None else frame
    cfg.split.check(frame.T)
    t_prime, tau = cfg.split.t_prime, cfg.split.tau
    train_region = frame.slice(0, t_prime)
    scaler = Scaler.fit(train_region) if cfg.data.standardize else None
    model_train = scaler.transform(train_region) if scaler else train_region

    selections = select_models(cfg, model_train, scaler, backend)

    # Test data is cut from the frame only from here on.
    _, _, test = split(frame, replace(cfg.split, valid_len=0))
    model_test = scaler.transform(test) if scaler else test

    reports, ranges = [], {}
    for name in cfg.models:
        sel = selections[name]
        try:
            if name == "wb":
                f = fit_wb_rounds(model_train, sel.window, sel.params, rounds=sel.rounds, backend=backend)
                fc = forecast_wb_tiled(f, model_train, model_test)
                seen = [0, t_prime]
                extra = {"w": sel.window.w, "h": sel.window.h, "mode": sel.window.mode,
                         "input_width": sel.window.width(frame.M)}
            elif name == "naive":
                rounds = sel.rounds[0] if sel.rounds else None
                f = fit_naive_rounds(model_train, sel.params, cfg.naive_fallback, rounds=rounds, backend=backend)
                h = (sel.window or cfg.window).h
                fc = forecast_naive_points(f, model_test, h * (tau // h))
                seen = [0, t_prime]
                extra = {"inputs": ",".join(f.inputs)}
            else:
                fc = forecast_persistence(model_train, model_test, cfg.window.h)
                seen = [t_prime - 1, t_prime]
                extra = {"h": cfg.window.h}
            fc = _unscale(fc, scaler)
            values = _score(fc, cfg.metrics)
        except WbgbrtError as exc:
            raise _wrap(exc, f"final run of {name}") from exc
        evaluated = [int(fc.time_index[0]), int(fc.time_index[-1]) + 1] if fc.time_index.size else [t_prime, t_prime]
        if seen[1] > evaluated[0]:
            raise NumericalError(f"{name}: training range {seen} overlaps evaluated range {evaluated}")
        ranges[name] = {"train": seen, "evaluated": evaluated}
        reports.append(EvalReport(
            dataset=cfg.dataset,
            model=name,
            config_digest=cfg.digest,
            metrics=values,
            per_series=_per_series(fc, test, cfg.metrics) if cfg.per_series else None,
            notes=_notes(cfg, name, fc, extra),
            predictions=_predictions(test, fc) if cfg.keep_predictions else None,
        ))
    info = {"n": frame.n, "T": frame.T, "M": frame.M, "covariates": list(frame.covariate_names)}
    return RunResult(reports, selections, ranges, info)


# ------------------------------------------------------------------ outputs


def _dump(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_reports(reports: list[EvalReport], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, REPORT_TXT), "w", encoding="utf-8") as fh:
        fh.write(render_table(reports))
    with open(os.path.join(directory, REPORT_CSV), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "model", "metric", "value", "config_digest"])
        w.writerows(report_rows(reports))
    _dump([r.to_dict() for r in reports], os.path.join(directory, REPORTS_JSON))


def write_selection(cfg: ExperimentConfig, selections: dict[str, Selection], directory: str,
                    ranges: dict | None = None) -> None:
    os.makedirs(directory, exist_ok=True)
    payload = {"config_digest": cfg.digest, "primary_metric": cfg.metrics[0],
               "models": {k: v.to_dict() for k, v in selections.items()}}
    if ranges is not None:
        payload["index_ranges"] = ranges
    _dump(payload, os.path.join(directory, SELECTION_JSON))


def write_manifest(cfg: ExperimentConfig, directory: str, wall_time: float, command: str, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config_digest": cfg.digest,
        "seed": cfg.boost.seed,
        "version": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": round(wall_time, 3),
        "config": cfg.source,
    }
    manifest.update(extra or {})
    _dump(manifest, os.path.join(directory, MANIFEST_JSON))


def run_and_write(cfg: ExperimentConfig, backend: str | None = None) -> RunResult:
    start = time.perf_counter()
    result = run_experiment(cfg, backend)
    write_reports(result.reports, cfg.output)
    write_selection(cfg, result.selections, cfg.output, result.ranges)
    write_manifest(cfg, cfg.output, time.perf_counter() - start, "run", {"frame": result.frame_info})
    return result


def tune_and_write(cfg: ExperimentConfig, backend: str | None = None) -> dict[str, Selection]:
    start = time.perf_counter()
    frame = prepare_frame(cfg)
    cfg.split.check(frame.T)
    train_region = frame.slice(0, cfg.split.t_prime)
    scaler = Scaler.fit(train_region) if cfg.data.standardize else None
    selections = select_models(cfg, scaler.transform(train_region) if scaler else train_region, scaler, backend)
    write_selection(cfg, selections, cfg.output)
    write_manifest(cfg, cfg.output, time.perf_counter() - start, "tune")
    return selections


# ---------------------------------------------------------------- reporting


def load_reports(path: str) -> list[EvalReport]:
    if os.path.isdir(path):
        path = os.path.join(path, REPORTS_JSON)
    if not os.path.isfile(path):
        raise DataError(f"no reports file at {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a reports file ({exc})") from None
    return [EvalReport.from_dict(d) for d in data]


def compare(a: EvalReport, b: EvalReport) -> dict[str, dict]:
    """Signed relative difference ``(b - a) / a`` per metric with a verdict."""
    if a.dataset != b.dataset:
        raise ConfigError(f"cannot compare reports from different datasets: {a.dataset!r} vs {b.dataset!r}")
    if set(a.metrics) != set(b.metrics):
        raise ConfigError(f"metric sets differ: {sorted(a.metrics)} vs {sorted(b.metrics)}")
    out = {}
    for m in a.metrics:
        va, vb = float(a.metrics[m]), float(b.metrics[m])
        if va == vb:
            rel = 0.0
        elif va == 0.0:
            raise NumericalError(f"relative difference of {m} undefined: baseline value is 0")
        else:
            rel = (vb - va) / abs(va)
        if rel == 0.0:
            verdict = "equal"
        else:
            better = (rel < 0) == LOWER_IS_BETTER.get(m, True)
            verdict = f"{b.model} {'better' if better else 'worse'} than {a.model}"
        out[m] = {"a": va, "b": vb, "relative": rel, "verdict": verdict}
    return out


def render_compare(a: EvalReport, b: EvalReport, diff: dict[str, dict]) -> str:
    lines = [f"dataset {a.dataset}: {a.model} (a) vs {b.model} (b)"]
    for m, d in diff.items():
        lines.append(f"{m:>5}  a={d['a']:.6g}  b={d['b']:.6g}  (b-a)/a={d['relative']:+.2%}  {d['verdict']}")
    return "\n".join(lines) + "\n"


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "_"


def emit_plot_data(reports: list[EvalReport], directory: str) -> list[str]:
    """One ``time_index,actual,predicted`` CSV per (dataset, model, series)."""
    missing = [r.model for r in reports if r.predictions is None]
    if missing:
        raise ConfigError(f"reports for {missing} carry no predictions; rerun with "
                          "experiment.keep_predictions=true")
    written = []
    if reports:
        os.makedirs(directory, exist_ok=True)
    for r in reports:
        p = r.predictions
        by_series: dict[str, list] = {}
        for s, t, y, yhat in zip(p["series"], p["time_index"], p["actual"], p["predicted"]):
            by_series.setdefault(s, []).append((t, repr(float(y)), repr(float(yhat))))
        for s, rows in by_series.items():
            path = os.path.join(directory, f"{_safe(r.dataset)}__{_safe(r.model)}__{_safe(s)}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["time_index", "actual", "predicted"])
                w.writerows(rows)
            written.append(path)
    return written
