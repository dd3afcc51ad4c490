"""Experiment configuration files.

A config is an INI-style ``.cfg`` file::

    [experiment]   name, dataset, seed, output, models, metrics, keep_predictions
    [data]         path and column roles, imputation, covariate plan
    [split]        t_prime, tau, valid_len
    [window]       w, h, mode, stride, series_feature
    [naive]        fallback
    [boost]        engine parameters (the base point of the grid)
    [grid]         comma-separated value lists, crossed with each other

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import os
from dataclasses import dataclass, field, fields

from ..core_data import IMPUTE_POLICIES, TIME_FEATURES, Schema, SplitSpec
from ..errors import ConfigError
from ..forecasting import NAIVE_FALLBACKS
from ..gbrt import BoostParams
from ..metrics import check_metric_names
from ..windowing import WindowSpec

MODELS = ("wb", "naive", "persistence")
COVARIATE_PLANS = ("none", "time", "native", "native+time")
WINDOW_KEYS = ("w", "h", "mode", "stride", "series_feature")
DIGEST_EXCLUDE = {("experiment", "output")}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.replace("\n", ",").split(",") if p.strip()]


def _scalar(text: str):
    t = text.strip()
    if t.lower() in ("none", "null"):
        return None
    if t.lower() in ("true", "false"):
        return _bool(t)
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def _index_list(text: str) -> list[int]:
    """``"0-3, 7"`` -> ``[0, 1, 2, 3, 7]``."""
    out = []
    for part in _list(text):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


@dataclass
class DataConfig:
    path: str
    layout: str = "wide"
    timestamp: str | None = None
    timestamp_format: str = "iso"
    targets: list[str] = field(default_factory=lambda: ["*"])
    covariates: list[str] = field(default_factory=list)
    ignore: list[str] = field(default_factory=list)
    series_id: str | None = None
    sample_rate: str | None = None
    delimiter: str | None = None
    impute: str = "forward_fill"
    covariate_plan: str = "none"
    time_features: list[str] = field(default_factory=lambda: ["hour_of_day", "day_of_week"])
    series: list[int] | None = None
    standardize: bool = False

    def schema(self) -> Schema:
        roles = {}
        if self.timestamp:
            roles[self.timestamp] = "timestamp"
        if self.series_id:
            roles[self.series_id] = "series_id"
        roles.update({c: "covariate" for c in self.covariates})
        roles.update({c: "ignore" for c in self.ignore})
        wildcard = self.targets == ["*"]
        if not wildcard:
            roles.update({c: "target" for c in self.targets})
        return Schema(
            roles=roles,
            layout=self.layout,
            timestamp_format=self.timestamp_format,
            default_role="target" if wildcard else None,
            delimiter=self.delimiter,
            sample_rate=self.sample_rate,
        )


@dataclass
class ExperimentConfig:
    name: str
    data: DataConfig
    split: SplitSpec
    window: WindowSpec
    boost: BoostParams
    grid: dict[str, list] = field(default_factory=dict)
    models: list[str] = field(default_factory=lambda: list(MODELS))
    metrics: list[str] = field(default_factory=lambda: ["rmse", "wape", "mae"])
    naive_fallback: str = "time_index"
    output: str = "runs/experiment"
    seed: int = 0
    keep_predictions: bool = True
    per_series: bool = False
    dataset: str = ""
    digest: str = ""
    source: dict[str, dict[str, str]] = field(default_factory=dict)

    def grid_points(self) -> list[tuple[BoostParams, WindowSpec]]:
        """Cartesian product of the grid over the base boost and window settings."""
        keys = sorted(self.grid)
        points = []
        for combo in itertools.product(*(self.grid[k] for k in keys)) if keys else [()]:
            boost_kw, window_kw = {}, {}
            for k, v in zip(keys, combo):
                if k.startswith("window."):
                    window_kw[k.split(".", 1)[1]] = v
                else:
                    boost_kw[k] = v
            try:
                bp = self.boost.replace(**boost_kw)
                ws = WindowSpec(**{**_window_dict(self.window), **window_kw})
            except TypeError as exc:
                raise ConfigError(f"bad grid key: {exc}") from None
            points.append((bp, ws))
        return points


def _window_dict(ws: WindowSpec) -> dict:
    return {f.name: getattr(ws, f.name) for f in fields(ws)}


def parse_override(text: str) -> tuple[str, str, str]:
    """``section.key=value`` -> ``(section, key, value)``."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    lhs, value = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    return section.strip(), key.strip(), value.strip()


def read_config(path: str | os.PathLike, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a config file, apply ``section.key=value`` overrides, validate."""
    if not os.path.isfile(path):
        raise ConfigError(f"no such config file: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for ov in overrides or []:
        section, key, value = parse_override(ov)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)
    base = os.path.dirname(os.path.abspath(path))
    return build_config({s: dict(cp.items(s)) for s in cp.sections()}, base)


def build_config(raw: dict[str, dict[str, str]], base_dir: str = ".") -> ExperimentConfig:
    known = {"experiment", "data", "split", "window", "naive", "boost", "grid"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for required in ("data", "split", "window"):
        if required not in raw:
            raise ConfigError(f"config lacks a [{required}] section")
    resolve = lambda p: p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))  # noqa: E731

    exp = dict(raw.get("experiment", {}))
    d = dict(raw["data"])
    if "path" not in d:
        raise ConfigError("[data] needs a path")
    data = DataConfig(path=resolve(d.pop("path")))
    list_keys = {"targets", "covariates", "ignore", "time_features"}
    for key, value in d.items():
        if key in list_keys:
            setattr(data, key, _list(value))
        elif key == "series":
            data.series = _index_list(value) if value.strip() else None
        elif key == "standardize":
            data.standardize = _bool(value)
        elif key in {f.name for f in fields(DataConfig)}:
            setattr(data, key, value.strip() or None)
        else:
            raise ConfigError(f"unknown [data] key {key!r}")
    if data.impute not in IMPUTE_POLICIES:
        raise ConfigError(f"unknown imputation policy {data.impute!r}")
    if data.covariate_plan not in COVARIATE_PLANS:
        raise ConfigError(f"unknown covariate plan {data.covariate_plan!r}; choose from {COVARIATE_PLANS}")
    bad = [f for f in data.time_features if f not in TIME_FEATURES]
    if bad:
        raise ConfigError(f"unknown time features {bad}")

    try:
        split = SplitSpec(**{k: int(v) for k, v in raw["split"].items()})
        wkw = {k: _scalar(v) for k, v in raw["window"].items()}
        window = WindowSpec(**wkw)
        boost = BoostParams.from_dict({k: _scalar(v) for k, v in raw.get("boost", {}).items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    grid = {}
    for key, value in raw.get("grid", {}).items():
        vals = [_scalar(v) for v in _list(value)]
        if not vals:
            raise ConfigError(f"grid entry {key!r} is empty")
        name = key.split(".", 1)[1] if key.startswith("window.") else key
        if key.startswith("window."):
            if name not in WINDOW_KEYS:
                raise ConfigError(f"unknown window grid key {key!r}")
        elif name not in {f.name for f in fields(BoostParams)}:
            raise ConfigError(f"unknown grid key {key!r}")
        grid[key] = vals

    models = _list(exp.get("models", ",".join(MODELS)))
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise ConfigError(f"unknown or empty model list {models}; choose from {MODELS}")
    naive = raw.get("naive", {})
    fallback = naive.get("fallback", "time_index").strip()
    if fallback not in NAIVE_FALLBACKS:
        raise ConfigError(f"unknown naive fallback {fallback!r}")

    cfg = ExperimentConfig(
        name=exp.get("name", "experiment").strip(),
        dataset=exp.get("dataset", "").strip() or os.path.splitext(os.path.basename(data.path))[0],
        data=data,
        split=split,
        window=window,
        boost=boost,
        grid=grid,
        models=models,
        metrics=check_metric_names(_list(exp.get("metrics", "rmse, wape, mae"))),
        naive_fallback=fallback,
        output=resolve(exp.get("output", os.path.join("runs", exp.get("name", "experiment")))),
        seed=int(exp.get("seed", 0)),
        keep_predictions=_bool(exp.get("keep_predictions", "true")),
        per_series=_bool(exp.get("per_series", "false")),
        source=raw,
    )
    extra = set(exp) - {"name", "dataset", "models", "metrics", "output", "seed", "keep_predictions",
                      "per_series"}
    if extra:
        raise ConfigError(f"unknown [experiment] keys {sorted(extra)}")
    if "seed" in exp and "seed" not in raw.get("boost", {}):
        cfg.boost = cfg.boost.replace(seed=cfg.seed)
    cfg.digest = config_digest(raw)
    return cfg


def config_digest(raw: dict[str, dict[str, str]]) -> str:
    """Stable short hash of the parsed config, ignoring the output location."""
    lines = []
    for section in sorted(raw):
        for key in sorted(raw[section]):
            if (section, key) in DIGEST_EXCLUDE:
                continue
            if (section, key) == ("data", "path"):
                value = os.path.basename(raw[section][key].strip())
            else:
                value = " ".join(raw[section][key].split())
            lines.append(f"{section}.{key}={value}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]
