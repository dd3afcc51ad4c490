"""Point-forecast accuracy metrics and evaluation reports.

Every metric pools all (series, time) residuals except :func:`corr`, which
averages per-series correlations.  Degenerate denominators raise
:class:`NumericalError` instead of returning a silent zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError

FORMULAS = {
    "rmse": "sqrt(mean((y - yhat)^2)), pooled over series and time",
    "mae": "mean(|y - yhat|), pooled",
    "wape": "sum(|y - yhat|) / sum(|y|), pooled",
    "mape": "mean over y != 0 of |y - yhat| / |y|, pooled; zero actuals skipped",
    "rse": "sqrt(sum((y - yhat)^2)) / sqrt(sum((y - mean(y))^2)), pooled",
    "corr": "mean over series of the Pearson correlation of y and yhat; zero-variance series skipped",
}
LOWER_IS_BETTER = {"rmse": True, "mae": True, "wape": True, "mape": True, "rse": True, "corr": False}


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ConfigError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise ConfigError("metrics need at least one point")
    return y.reshape(-1), yhat.reshape(-1)


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def wape(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    denom = np.sum(np.abs(y))
    if denom == 0:
        raise NumericalError("wape undefined: sum of |actuals| is zero")
    return float(np.sum(np.abs(y - yhat)) / denom)


def mape_with_skips(y, yhat) -> tuple[float, int]:
    """MAPE and the number of zero-actual points left out."""
    y, yhat = _pair(y, yhat)
    keep = y != 0
    if not keep.any():
        raise NumericalError("mape undefined: every actual is zero")
    return float(np.mean(np.abs(y[keep] - yhat[keep]) / np.abs(y[keep]))), int((~keep).sum())


def mape(y, yhat) -> float:
    return mape_with_skips(y, yhat)[0]


def rse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    spread = np.sqrt(np.sum((y - y.mean()) ** 2))
    if spread == 0:
        raise NumericalError("rse undefined: actuals are constant")
    return float(np.sqrt(np.sum((y - yhat) ** 2)) / spread)


def corr(Y, Yhat) -> float:
    """Mean per-series correlation; rows of ``Y`` are series."""
    Y = np.asarray(Y, dtype=np.float64)
    Yhat = np.asarray(Yhat, dtype=np.float64)
    if Y.ndim == 1:
        Y, Yhat = Y[None], Yhat.reshape(1, -1)
    if Y.shape != Yhat.shape:
        raise ConfigError(f"length mismatch: {Y.shape} vs {Yhat.shape}")
    if Y.shape[1] < 2:
        raise ConfigError("corr needs at least two points per series")
    values = []
    for a, b in zip(Y, Yhat):
        da, db = a - a.mean(), b - b.mean()
        sa, sb = np.sqrt(np.sum(da * da)), np.sqrt(np.sum(db * db))
        if sa == 0 or sb == 0:
            continue
        values.append(np.sum(da * db) / (sa * sb))
    if not values:
        raise NumericalError("corr undefined: every series has zero variance")
    return float(np.clip(np.mean(values), -1.0, 1.0))


METRICS = {"rmse": rmse, "mae": mae, "wape": wape, "mape": mape, "rse": rse, "corr": corr}


def check_metric_names(names) -> list[str]:
    names = [n.strip().lower() for n in names]
    unknown = [n for n in names if n not in METRICS]
    if unknown:
        raise ConfigError(f"unknown metrics {unknown}; choose from {sorted(METRICS)}")
    if not names:
        raise ConfigError("metric list is empty")
    return names


def evaluate(Y: np.ndarray, Yhat: np.ndarray, names=("rmse", "wape", "mae")) -> tuple[dict[str, float], dict]:
    """Score ``(n_series, points)`` arrays; returns metric values and notes."""
    values, notes = {}, {}
    for name in check_metric_names(names):
        if name == "corr":
            values[name] = corr(Y, Yhat)
        elif name == "mape":
            values[name], notes["mape_zero_actuals_skipped"] = mape_with_skips(Y, Yhat)
        else:
            values[name] = METRICS[name](Y, Yhat)
    return values, notes


@dataclass
class EvalReport:
    """Metric table for one model on one dataset.

    ``predictions`` optionally keeps ``(series, time_index, actual,
    predicted)`` columns for plot data.
    """

    dataset: str
    model: str
    config_digest: str
    metrics: dict[str, float]
    per_series: dict[str, dict[str, float]] | None = None
    notes: dict = field(default_factory=dict)
    predictions: dict[str, list] | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "config_digest": self.config_digest,
            "metrics": self.metrics,
            "per_series": self.per_series,
            "notes": self.notes,
            "predictions": self.predictions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        return cls(
            dataset=d["dataset"],
            model=d["model"],
            config_digest=d["config_digest"],
            metrics=dict(d["metrics"]),
            per_series=d.get("per_series"),
            notes=dict(d.get("notes") or {}),
            predictions=d.get("predictions"),
        )


def render_table(reports: list[EvalReport], precision: int = 6) -> str:
    """Aligned plain-text table: one row per model, one column per metric, formula footer."""
    if not reports:
        return ""
    names = list(dict.fromkeys(m for r in reports for m in r.metrics))
    header = ["dataset", "model"] + names
    rows = [[r.dataset, r.model] + [f"{r.metrics[m]:.{precision}f}" if m in r.metrics else "-" for m in names]
            for r in reports]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(str(c).rjust(w) if i >= 2 else str(c).ljust(w)  # noqa: E731
                                   for i, (c, w) in enumerate(zip(cells, widths))).rstrip()
    out = [line(header), "-" * len(line(header))] + [line(r) for r in rows]
    out.append("")
    out += [f"{m}: {FORMULAS[m]}" for m in names]
    items = [{f"{k}={v}" for k, v in r.notes.items()} for r in reports]
    shared = set.intersection(*items) if len(reports) > 1 else set()
    lines = [f"note: {n}" for n in sorted(shared)]
    for r, own in zip(reports, items):
        lines += [f"note [{r.model}]: {n}" for n in sorted(own - shared)]
    if lines:
        out.append("")
        out += lines
    return "\n".join(out) + "\n"


def report_rows(reports: list[EvalReport]) -> list[tuple[str, str, str, str, str]]:
    """``(dataset, model, metric, value, config_digest)`` rows with repr-precision values."""
    return [(r.dataset, r.model, m, repr(float(v)), r.config_digest)
            for r in reports for m, v in r.metrics.items()]
