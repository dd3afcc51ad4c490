"""Time-series data model, delimited-text ingestion and splitting.

A :class:`SeriesFrame` holds ``n`` aligned series of length ``T`` with a
single target channel and ``M`` covariate channels.  Frames are immutable:
every operation returns a new frame whose arrays are read-only views or
fresh copies.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

ROLES = ("timestamp", "target", "covariate", "ignore", "series_id")
IMPUTE_POLICIES = ("forward_fill", "zero", "drop_leading")
TIME_FEATURES = ("hour_of_day", "day_of_week", "day_of_month", "month", "is_weekend")
MISSING_TOKENS = ("", "NA", "N/A", "NaN", "nan", "null", "NULL", "?")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """Aligned target and covariate channels for ``n`` series.

    ``targets`` has shape ``(n, T, L)`` and ``covariates`` ``(n, T, M)``.
    Missing readings are NaN until :func:`impute_missing` runs.  ``t0`` is
    the absolute time index of the first point, so slices keep their
    position on the original axis.
    """

    targets: np.ndarray
    covariates: np.ndarray
    timestamps: np.ndarray | None = None
    sample_rate: np.timedelta64 | None = None
    series_names: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()
    target_name: str = "target"
    t0: int = 0

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=np.float64)
        if targets.ndim == 2:
            targets = targets[:, :, None]
        if targets.ndim != 3:
            raise DataError(f"targets must be (n, T, L), got shape {targets.shape}")
        n, T, L = targets.shape
        if n < 1 or L < 1:
            raise DataError(f"targets must have n >= 1 and L >= 1, got {targets.shape}")
        if L != 1:
            raise DataError("only a single target channel (L=1) is supported")
        cov = np.asarray(self.covariates, dtype=np.float64)
        if cov.size == 0 and cov.shape[:2] != (n, T):
            cov = np.zeros((n, T, 0))
        if cov.ndim != 3 or cov.shape[:2] != (n, T):
            raise DataError(f"covariates must be (n, T, M) = ({n}, {T}, M), got {cov.shape}")
        if np.isinf(targets).any() or np.isinf(cov).any():
            raise DataError("infinite values are not allowed")
        object.__setattr__(self, "targets", _readonly(targets))
        object.__setattr__(self, "covariates", _readonly(cov))

        names = tuple(self.series_names) or tuple(str(i) for i in range(n))
        if len(names) != n:
            raise DataError(f"{len(names)} series names for {n} series")
        object.__setattr__(self, "series_names", names)
        cnames = tuple(self.covariate_names) or tuple(f"x{m}" for m in range(cov.shape[2]))
        if len(cnames) != cov.shape[2]:
            raise DataError(f"{len(cnames)} covariate names for {cov.shape[2]} channels")
        if len(set(cnames)) != len(cnames):
            raise DataError(f"duplicate covariate names: {cnames}")
        object.__setattr__(self, "covariate_names", cnames)

        if self.timestamps is not None:
            ts = np.asarray(self.timestamps).astype("datetime64[s]")
            if ts.shape != (T,):
                raise DataError(f"expected {T} timestamps, got {ts.shape}")
            rate = _check_regular(ts, self.sample_rate)
            object.__setattr__(self, "timestamps", _readonly(ts))
            if rate is not None:
                object.__setattr__(self, "sample_rate", rate)

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    @property
    def T(self) -> int:
        return self.targets.shape[1]

    @property
    def L(self) -> int:
        return self.targets.shape[2]

    @property
    def M(self) -> int:
        return self.covariates.shape[2]

    @property
    def values(self) -> np.ndarray:
        """Target channel as an ``(n, T)`` array."""
        return self.targets[:, :, 0]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.targets).any() or np.isnan(self.covariates).any())

    def slice(self, start: int, stop: int) -> SeriesFrame:
        """Time slice ``[start, stop)`` relative to this frame."""
        if not 0 <= start <= stop <= self.T:
            raise ConfigError(f"slice [{start}, {stop}) outside [0, {self.T}]")
        ts = None if self.timestamps is None else self.timestamps[start:stop]
        return replace(
            self,
            targets=self.targets[:, start:stop],
            covariates=self.covariates[:, start:stop],
            timestamps=ts,
            t0=self.t0 + start,
        )

    def select_series(self, index: Sequence[int]) -> SeriesFrame:
        index = list(index)
        bad = [i for i in index if not 0 <= i < self.n]
        if bad:
            raise ConfigError(f"series indices out of range [0, {self.n}): {bad}")
        return replace(
            self,
            targets=self.targets[index],
            covariates=self.covariates[index],
            series_names=tuple(self.series_names[i] for i in index),
        )

    def with_covariates(self, extra: np.ndarray, names: Sequence[str]) -> SeriesFrame:
        """Append covariate channels; ``extra`` is ``(T, k)`` (shared) or ``(n, T, k)``."""
        extra = np.asarray(extra, dtype=np.float64)
        if extra.ndim == 2:
            extra = np.broadcast_to(extra, (self.n,) + extra.shape)
        return replace(
            self,
            covariates=np.concatenate([self.covariates, extra], axis=2),
            covariate_names=self.covariate_names + tuple(names),
        )


def _check_regular(ts: np.ndarray, declared) -> np.timedelta64 | None:
    if ts.size < 2:
        return None if declared is None else np.timedelta64(declared, "s")
    steps = np.diff(ts).astype(np.int64)
    step = steps[0]
    bad = np.flatnonzero((steps != step) | (steps <= 0))
    if step <= 0 or bad.size:
        i = int(bad[0]) + 1 if bad.size else 1
        raise DataError(
            f"timestamps not strictly increasing with a constant step at position {i} "
            f"({ts[i - 1]} -> {ts[i]})"
        )
    rate = np.timedelta64(int(step), "s")
    if declared is not None and np.timedelta64(declared, "s") != rate:
        raise DataError(f"declared sample rate {declared} does not match data step {rate}")
    return rate


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test boundaries.

    The test region is the ``tau`` points after the first ``t_prime``; the
    validation region is the last ``valid_len`` points of the training region.
    """

    t_prime: int
    tau: int
    valid_len: int = 0

    def __post_init__(self):
        if self.t_prime < 1 or self.tau < 1:
            raise ConfigError("t_prime and tau must be positive")
        if not 0 <= self.valid_len < self.t_prime:
            raise ConfigError(f"valid_len must lie in [0, t_prime), got {self.valid_len}")

    def check(self, T: int) -> None:
        if self.t_prime + self.tau > T:
            raise ConfigError(f"t_prime + tau = {self.t_prime + self.tau} exceeds T = {T}")


def split(frame: SeriesFrame, spec: SplitSpec) -> tuple[SeriesFrame, SeriesFrame, SeriesFrame]:
    """Partition the first ``t_prime + tau`` points into train, valid and test.

    ``valid`` has ``T == 0`` when ``valid_len`` is zero.
    """
    spec.check(frame.T)
    cut = spec.t_prime - spec.valid_len
    return (
        frame.slice(0, cut),
        frame.slice(cut, spec.t_prime),
        frame.slice(spec.t_prime, spec.t_prime + spec.tau),
    )


# ---------------------------------------------------------------- ingestion


@dataclass(frozen=True)
class Schema:
    """Column-role mapping for a delimited file.

    ``roles`` maps column names to one of ``timestamp``, ``target``,
    ``covariate``, ``ignore`` or ``series_id``.  Columns absent from the
    mapping take ``default_role``; with no default they are an error.
    In the wide layout every target column is one series and covariate
    columns are shared by all series.  The long layout needs a
    ``series_id`` column and exactly one target column.
    """

    roles: Mapping[str, str] = field(default_factory=dict)
    layout: str = "wide"
    timestamp_format: str = "iso"
    default_role: str | None = None
    delimiter: str | None = None
    sample_rate: str | None = None
    missing_tokens: tuple[str, ...] = MISSING_TOKENS

    def __post_init__(self):
        if self.layout not in ("wide", "long"):
            raise ConfigError(f"unknown layout {self.layout!r}")
        if self.timestamp_format not in ("iso", "epoch"):
            raise ConfigError(f"unknown timestamp format {self.timestamp_format!r}")
        for col, role in self.roles.items():
            if role not in ROLES:
                raise ConfigError(f"column {col!r}: unknown role {role!r}")
        if self.default_role is not None and self.default_role not in ROLES:
            raise ConfigError(f"unknown default role {self.default_role!r}")

    def role_of(self, column: str) -> str:
        role = self.roles.get(column, self.default_role)
        if role is None:
            raise DataError(f"column {column!r} has no role in the schema")
        return role


def parse_duration(text: str) -> np.timedelta64:
    """Parse ``"1h"``, ``"5min"``, ``"1d"``, ``"10s"`` into seconds."""
    units = {"s": 1, "sec": 1, "min": 60, "m": 60, "h": 3600, "hour": 3600, "d": 86400, "day": 86400}
    t = text.strip().lower()
    num = t.rstrip("abcdefghijklmnopqrstuvwxyz")
    unit = t[len(num):] or "s"
    if unit not in units or not num:
        raise ConfigError(f"cannot parse duration {text!r}")
    return np.timedelta64(int(float(num) * units[unit]), "s")


def _parse_timestamp(cell: str, fmt: str) -> np.datetime64:
    if fmt == "epoch":
        return np.datetime64(int(float(cell)), "s")
    dt = datetime.fromisoformat(cell.strip().replace("Z", "+00:00"))
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "s")


def load_delimited(path: str | os.PathLike, schema: Schema) -> SeriesFrame:
    """Read a header-led comma or tab separated file into a :class:`SeriesFrame`.

    Missing-value tokens become NaN; anything else that is not a number is
    an error naming the file line and column.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        head = fh.readline()
        fh.seek(0)
        delim = schema.delimiter or ("\t" if head.count("\t") > head.count(",") else ",")
        reader = csv.reader(fh, delimiter=delim)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: ragged row with {len(row)} fields, header has {len(header)}"
                )
            rows.append((lineno, row))
    if not rows:
        raise DataError(f"{path}: no data rows")

    roles = {c: schema.role_of(c) for c in header}
    ts_cols = [c for c in header if roles[c] == "timestamp"]
    tgt_cols = [c for c in header if roles[c] == "target"]
    cov_cols = [c for c in header if roles[c] == "covariate"]
    id_cols = [c for c in header if roles[c] == "series_id"]
    if len(ts_cols) > 1:
        raise DataError(f"more than one timestamp column: {ts_cols}")
    if not tgt_cols:
        raise DataError("schema assigns no target column")
    col = {c: j for j, c in enumerate(header)}
    missing = set(schema.missing_tokens)

    def number(lineno: int, row: list[str], name: str) -> float:
        cell = row[col[name]].strip()
        if cell in missing:
            return math.nan
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"{path}:{lineno}: column {name!r}: cannot parse {cell!r}") from None
        if math.isinf(v):
            raise DataError(f"{path}:{lineno}: column {name!r}: infinite value")
        return v

    def stamp(lineno: int, row: list[str]) -> np.datetime64:
        cell = row[col[ts_cols[0]]]
        try:
            return _parse_timestamp(cell, schema.timestamp_format)
        except (ValueError, OverflowError):
            raise DataError(
                f"{path}:{lineno}: column {ts_cols[0]!r}: bad timestamp {cell!r}"
            ) from None

    rate = parse_duration(schema.sample_rate) if schema.sample_rate else None

    if schema.layout == "wide":
        if id_cols:
            raise DataError("series_id column given for a wide layout")
        targets = np.array([[number(ln, r, c) for c in tgt_cols] for ln, r in rows]).T
        cov = np.array([[number(ln, r, c) for c in cov_cols] for ln, r in rows]).reshape(
            len(rows), len(cov_cols)
        )
        ts = None
        if ts_cols:
            ts = np.array([stamp(ln, r) for ln, r in rows], dtype="datetime64[s]")
            _check_rows(path, ts, [ln for ln, _ in rows], rate)
        return SeriesFrame(
            targets=targets[:, :, None],
            covariates=np.broadcast_to(cov, (len(tgt_cols),) + cov.shape).copy(),
            timestamps=ts,
            sample_rate=rate,
            series_names=tuple(tgt_cols),
            covariate_names=tuple(cov_cols),
            target_name=tgt_cols[0] if len(tgt_cols) == 1 else "target",
        )

    if len(id_cols) != 1:
        raise DataError("long layout needs exactly one series_id column")
    if len(tgt_cols) != 1:
        raise DataError("long layout supports exactly one target column")
    groups: dict[str, list[tuple[int, list[str]]]] = {}
    for ln, r in rows:
        groups.setdefault(r[col[id_cols[0]]].strip(), []).append((ln, r))
    lengths = {len(g) for g in groups.values()}
    if len(lengths) != 1:
        raise DataError(f"series have unequal lengths: {sorted(lengths)}")
    targets, covs, axis = [], [], None
    for sid, grp in groups.items():
        targets.append([number(ln, r, tgt_cols[0]) for ln, r in grp])
        covs.append([[number(ln, r, c) for c in cov_cols] for ln, r in grp])
        if ts_cols:
            ts = np.array([stamp(ln, r) for ln, r in grp], dtype="datetime64[s]")
            _check_rows(path, ts, [ln for ln, _ in grp], rate)
            if axis is None:
                axis = ts
            elif not np.array_equal(axis, ts):
                raise DataError(f"series {sid!r} does not share the common timestamp axis")
    T = lengths.pop()
    return SeriesFrame(
        targets=np.array(targets)[:, :, None],
        covariates=np.array(covs).reshape(len(groups), T, len(cov_cols)),
        timestamps=axis,
        sample_rate=rate,
        series_names=tuple(groups),
        covariate_names=tuple(cov_cols),
        target_name=tgt_cols[0],
    )


def _check_rows(path, ts: np.ndarray, linenos: list[int], rate) -> None:
    try:
        _check_regular(ts, rate)
    except DataError as exc:
        steps = np.diff(ts).astype(np.int64)
        ref = int(rate / np.timedelta64(1, "s")) if rate is not None else steps[0]
        bad = np.flatnonzero((steps != ref) | (steps <= 0))
        i = int(bad[0]) + 1 if bad.size else 1
        raise DataError(f"{path}:{linenos[i]}: non-monotone or gapped timestamp ({exc})") from None


def write_delimited(frame: SeriesFrame, path: str | os.PathLike, delimiter: str = ",") -> Schema:
    """Write ``frame`` so that :func:`load_delimited` with the returned schema reloads it.

    Floats are written with ``repr`` precision, so values reload bit-exactly.
    Frames with several series and covariates use the long layout, since
    the wide layout can only carry shared covariates.
    """
    ts_col = "timestamp"
    has_ts = frame.timestamps is not None
    fmt = lambda v: "" if math.isnan(v) else repr(float(v))  # noqa: E731
    stamps = [str(t) for t in frame.timestamps] if has_ts else None
    cov_shared = frame.n == 1 or bool(
        np.array_equal(frame.covariates, np.broadcast_to(frame.covariates[:1], frame.covariates.shape), equal_nan=True)
    )
    rate = None if frame.sample_rate is None else f"{int(frame.sample_rate / np.timedelta64(1, 's'))}s"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if cov_shared:
            tnames = list(frame.series_names)
            if frame.n == 1 and frame.target_name not in frame.covariate_names:
                tnames = [frame.target_name]
            if len(set(tnames)) != len(tnames) or set(tnames) & set(frame.covariate_names) or ts_col in tnames:
                tnames = [f"series_{i}" for i in range(frame.n)]
            w.writerow(([ts_col] if has_ts else []) + tnames + list(frame.covariate_names))
            for t in range(frame.T):
                w.writerow(
                    ([stamps[t]] if has_ts else [])
                    + [fmt(v) for v in frame.values[:, t]]
                    + [fmt(v) for v in frame.covariates[0, t]]
                )
            roles = {c: "target" for c in tnames}
            layout = "wide"
        else:
            tname = "target"
            w.writerow(["series_id"] + ([ts_col] if has_ts else []) + [tname] + list(frame.covariate_names))
            for i, sid in enumerate(frame.series_names):
                for t in range(frame.T):
                    w.writerow(
                        [sid]
                        + ([stamps[t]] if has_ts else [])
                        + [fmt(frame.values[i, t])]
                        + [fmt(v) for v in frame.covariates[i, t]]
                    )
            roles = {"series_id": "series_id", tname: "target"}
            layout = "long"
    if has_ts:
        roles[ts_col] = "timestamp"
    roles.update({c: "covariate" for c in frame.covariate_names})
    return Schema(roles=roles, layout=layout, delimiter=delimiter, sample_rate=rate)


# ------------------------------------------------------------ transformations


def _ffill(a: np.ndarray) -> np.ndarray:
    """Forward fill along axis 0 of a 1-D array; leading NaNs take the first value."""
    ok = ~np.isnan(a)
    idx = np.where(ok, np.arange(a.size), 0)
    np.maximum.accumulate(idx, out=idx)
    out = a[idx]
    first = np.argmax(ok)
    out[:first] = a[first]
    return out


def impute_missing(frame: SeriesFrame, policy: str = "forward_fill") -> SeriesFrame:
    """Fill NaN readings.

    ``forward_fill`` propagates the last seen value (leading gaps take the
    first seen one), ``zero`` writes 0, and ``drop_leading`` removes the
    leading time points until every channel is observed, then forward-fills.
    """
    if policy not in IMPUTE_POLICIES:
        raise ConfigError(f"unknown imputation policy {policy!r}")
    channels = np.concatenate([frame.targets, frame.covariates], axis=2)
    names = (frame.target_name,) + frame.covariate_names
    empty = np.isnan(channels).all(axis=1)
    if empty.any():
        i, c = map(int, np.argwhere(empty)[0])
        raise DataError(f"channel entirely missing: series {frame.series_names[i]!r}, channel {names[c]!r}")
    if not np.isnan(channels).any():
        return frame
    if policy == "zero":
        filled = np.nan_to_num(channels, nan=0.0)
    else:
        if policy == "drop_leading":
            observed = ~np.isnan(channels).any(axis=(0, 2))
            if not observed.any():
                raise DataError("no time point has every channel observed")
            start = int(np.argmax(observed))
            frame = frame.slice(start, frame.T)
            channels = channels[:, start:]
        filled = channels.copy()
        for i in range(filled.shape[0]):
            for c in range(filled.shape[2]):
                if np.isnan(filled[i, :, c]).any():
                    filled[i, :, c] = _ffill(filled[i, :, c])
    return replace(frame, targets=filled[:, :, :1], covariates=filled[:, :, 1:])


def time_features(timestamps: np.ndarray, features: Iterable[str]) -> dict[str, np.ndarray]:
    """Ordinal calendar features of a datetime64 axis.

    Days of the week count from Monday = 0; months and days of the month
    start at 1.
    """
    ts = np.asarray(timestamps).astype("datetime64[s]")
    days = ts.astype("datetime64[D]")
    months = ts.astype("datetime64[M]")
    out = {}
    for f in features:
        if f == "hour_of_day":
            v = (ts - days).astype("timedelta64[h]").astype(np.int64)
        elif f == "day_of_week":
            v = (days.astype(np.int64) + 3) % 7  # 1970-01-01 was a Thursday
        elif f == "day_of_month":
            v = (days - months.astype("datetime64[D]")).astype(np.int64) + 1
        elif f == "month":
            v = months.astype(np.int64) % 12 + 1
        elif f == "is_weekend":
            v = ((days.astype(np.int64) + 3) % 7 >= 5).astype(np.int64)
        else:
            raise ConfigError(f"unknown time feature {f!r}; choose from {TIME_FEATURES}")
        out[f] = v.astype(np.float64)
    return out


def derive_time_covariates(frame: SeriesFrame, features: Iterable[str]) -> SeriesFrame:
    """Append calendar covariates; features already present are not duplicated."""
    wanted = [f for f in dict.fromkeys(features) if f not in frame.covariate_names]
    for f in wanted:
        if f not in TIME_FEATURES:
            raise ConfigError(f"unknown time feature {f!r}; choose from {TIME_FEATURES}")
    if not wanted:
        return frame
    if frame.timestamps is None:
        raise DataError("time covariates need timestamps, and this frame has none")
    feats = time_features(frame.timestamps, wanted)
    return frame.with_covariates(np.column_stack([feats[f] for f in wanted]), wanted)


@dataclass(frozen=True)
class Scaler:
    """Per-series affine standardization fitted on a reference frame."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, frame: SeriesFrame) -> Scaler:
        mean = np.nanmean(frame.values, axis=1)
        std = np.nanstd(frame.values, axis=1)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, frame: SeriesFrame) -> SeriesFrame:
        v = (frame.values - self.mean[:, None]) / self.std[:, None]
        return replace(frame, targets=v[:, :, None])

    def inverse(self, values: np.ndarray, series: np.ndarray | int) -> np.ndarray:
        series = np.asarray(series)
        return values * self.std[series] + self.mean[series]
