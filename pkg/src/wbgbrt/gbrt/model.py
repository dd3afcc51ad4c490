"""Boosting parameters, tree and ensemble types, and the model text format."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from ..errors import ConfigError, DataError
from . import _backend

FORMAT_NAME = "wbgbrt.boosted_model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BoostParams:
    """Hyperparameters of the boosting engine.

    The defaults are starting points for a grid search.  ``base_score=None``
    uses the mean of the training targets.
    """

    n_trees: int = 500
    learning_rate: float = 0.05
    max_depth: int = 6
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0
    base_score: float | None = None
    tree_method: str = "exact"
    max_bins: int = 256
    early_stopping_rounds: int | None = None

    def __post_init__(self):
        checks = [
            (self.n_trees >= 0, "n_trees must be >= 0"),
            (0 < self.learning_rate <= 1, "learning_rate must lie in (0, 1]"),
            (self.max_depth >= 0, "max_depth must be >= 0"),
            (self.reg_lambda >= 0, "reg_lambda must be >= 0"),
            (self.gamma >= 0, "gamma must be >= 0"),
            (self.min_child_weight >= 0, "min_child_weight must be >= 0"),
            (0 < self.subsample <= 1, "subsample must lie in (0, 1]"),
            (0 < self.colsample <= 1, "colsample must lie in (0, 1]"),
            (self.tree_method in ("exact", "hist"), "tree_method must be 'exact' or 'hist'"),
            (2 <= self.max_bins <= 65536, "max_bins must lie in [2, 65536]"),
            (self.early_stopping_rounds is None or self.early_stopping_rounds >= 1,
             "early_stopping_rounds must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def replace(self, **changes) -> BoostParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> BoostParams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown boosting parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(eq=False)
class RegressionTree:
    """Binary tree in flat arrays; node 0 is the root.

    Internal nodes have ``feature >= 0`` and send a row left iff
    ``x[feature] < threshold``.  Leaves have ``feature == -1`` and output
    ``value``.  ``gain`` is the split gain of internal nodes and ``cover``
    the hessian sum that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    cover: np.ndarray

    @classmethod
    def leaf(cls, value: float, cover: float = 0.0) -> RegressionTree:
        return cls(
            feature=np.array([-1], dtype=np.int32),
            threshold=np.zeros(1),
            left=np.array([-1], dtype=np.int32),
            right=np.array([-1], dtype=np.int32),
            value=np.array([float(value)]),
            gain=np.zeros(1),
            cover=np.array([float(cover)]),
        )

    @classmethod
    def stump(cls, feature: int, threshold: float, left_value: float, right_value: float, gain: float = 0.0):
        return cls(
            feature=np.array([feature, -1, -1], dtype=np.int32),
            threshold=np.array([threshold, 0.0, 0.0]),
            left=np.array([1, -1, -1], dtype=np.int32),
            right=np.array([2, -1, -1], dtype=np.int32),
            value=np.array([0.0, left_value, right_value]),
            gain=np.array([gain, 0.0, 0.0]),
            cover=np.zeros(3),
        )

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        def walk(j: int) -> int:
            if self.feature[j] < 0:
                return 0
            return 1 + max(walk(self.left[j]), walk(self.right[j]))

        return walk(0)

    def predict(self, X: np.ndarray, backend: str | None = None) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        k = _backend.get(backend)
        return k.predict_trees(X, self.feature, self.threshold, self.left, self.right, self.value,
                               np.zeros(1, dtype=np.int64))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        j = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            internal = self.feature[j] >= 0
            if not internal.any():
                return j
            r = rows[internal]
            jr = j[r]
            j[r] = np.where(X[r, self.feature[jr]] < self.threshold[jr], self.left[jr], self.right[jr])

    def to_dict(self, j: int = 0) -> dict:
        if self.feature[j] < 0:
            return {"leaf": float(self.value[j]), "cover": float(self.cover[j])}
        return {
            "feature": int(self.feature[j]),
            "threshold": float(self.threshold[j]),
            "gain": float(self.gain[j]),
            "cover": float(self.cover[j]),
            "left": self.to_dict(int(self.left[j])),
            "right": self.to_dict(int(self.right[j])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RegressionTree:
        rows: list[list] = []

        def add(node: dict) -> int:
            j = len(rows)
            rows.append([-1, 0.0, -1, -1, 0.0, 0.0, float(node.get("cover", 0.0))])
            if "leaf" in node:
                rows[j][4] = float(node["leaf"])
            else:
                rows[j][0] = int(node["feature"])
                rows[j][1] = float(node["threshold"])
                rows[j][5] = float(node.get("gain", 0.0))
                rows[j][2] = add(node["left"])
                rows[j][3] = add(node["right"])
            return j

        try:
            add(d)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed tree record: {exc}") from None
        cols = list(zip(*rows))
        return cls(
            feature=np.array(cols[0], dtype=np.int32),
            threshold=np.array(cols[1], dtype=np.float64),
            left=np.array(cols[2], dtype=np.int32),
            right=np.array(cols[3], dtype=np.int32),
            value=np.array(cols[4], dtype=np.float64),
            gain=np.array(cols[5], dtype=np.float64),
            cover=np.array(cols[6], dtype=np.float64),
        )


@dataclass(eq=False)
class BoostedModel:
    """Additive tree ensemble: ``base_score + learning_rate * sum(tree(x))``."""

    base_score: float
    learning_rate: float
    trees: list[RegressionTree]
    n_features: int
    params: BoostParams = field(default_factory=BoostParams)
    train_loss: list[float] = field(default_factory=list)
    eval_loss: list[float] = field(default_factory=list)
    best_round: int | None = None

    @cached_property
    def _flat(self):
        if not self.trees:
            empty_i = np.zeros(0, dtype=np.int32)
            return empty_i, np.zeros(0), empty_i, empty_i, np.zeros(0), np.zeros(0, dtype=np.int64)
        sizes = np.array([t.n_nodes for t in self.trees])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        shift = lambda a, o: np.where(a >= 0, a + o, -1)  # noqa: E731
        return (
            np.concatenate([t.feature for t in self.trees]).astype(np.int32),
            np.concatenate([t.threshold for t in self.trees]),
            np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]).astype(np.int32),
            np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]).astype(np.int32),
            np.concatenate([t.value for t in self.trees]),
            offsets,
        )

    def raw_sum(self, X: np.ndarray, backend: str | None = None) -> np.ndarray:
        X = self._check(X)
        if not self.trees:
            return np.zeros(X.shape[0])
        return _backend.get(backend).predict_trees(X, *self._flat)

    def predict(self, X: np.ndarray, backend: str | None = None) -> np.ndarray:
        return self.base_score + self.learning_rate * self.raw_sum(X, backend)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ConfigError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        return X

    def truncate(self, n_trees: int) -> BoostedModel:
        return replace(self, trees=self.trees[:n_trees])

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "n_features": int(self.n_features),
            "params": self.params.to_dict(),
            "best_round": self.best_round,
            "train_loss": [float(v) for v in self.train_loss],
            "eval_loss": [float(v) for v in self.eval_loss],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> BoostedModel:
        if d.get("format") != FORMAT_NAME:
            raise DataError(f"not a boosted model record (format={d.get('format')!r})")
        if d.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported model format version {d.get('version')!r}")
        return cls(
            base_score=float(d["base_score"]),
            learning_rate=float(d["learning_rate"]),
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            params=BoostParams.from_dict(d["params"]),
            train_loss=list(d.get("train_loss", [])),
            eval_loss=list(d.get("eval_loss", [])),
            best_round=d.get("best_round"),
        )

    def dumps(self) -> str:
        # json writes floats with repr, which round-trips every double exactly
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> BoostedModel:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from None

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str | os.PathLike) -> BoostedModel:
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())
