"""Second-order gradient boosting with squared-error loss.

Trees are grown level by level.  At each level the split kernel scores
every open node at once; a node splits when its best regularized gain is
positive, otherwise it becomes a leaf with weight ``-G / (H + lambda)``.
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import DataError, NumericalError
from . import _backend
from .model import BoostedModel, BoostParams, RegressionTree

log = logging.getLogger(__name__)


class FeatureMatrix:
    """Training matrix with cached per-feature sort orders and histogram bins.

    Build it once and pass it to several :func:`fit` calls (one per
    forecast horizon) to share the preprocessing.
    """

    def __init__(self, X):
        try:
            X = np.asarray(X, dtype=np.float64)
        except ValueError:
            raise DataError("rows have unequal lengths") from None
        if X.ndim != 2:
            raise DataError(f"expected a 2-D matrix of rows, got shape {X.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"empty input matrix of shape {X.shape}")
        if not np.isfinite(X).all():
            raise DataError("input matrix contains non-finite values")
        self.X = np.ascontiguousarray(X)
        self._order = None
        self._bins: dict[int, tuple] = {}

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    @property
    def order(self) -> np.ndarray:
        """``(d, n)`` row indices sorted by each feature."""
        if self._order is None:
            self._order = np.ascontiguousarray(np.argsort(self.X, axis=0, kind="stable").T.astype(np.int32))
            self._sorted = np.ascontiguousarray(np.take_along_axis(self.X.T, self._order, axis=1))
        return self._order

    @property
    def sorted_values(self) -> np.ndarray:
        """``(d, n)`` feature values in the order of :attr:`order`."""
        self.order
        return self._sorted

    def bins(self, max_bins: int):
        """``(bins, nbins, cuts)``: bin codes with ``x < cuts[f, b]`` iff ``bin <= b``."""
        if max_bins not in self._bins:
            self._bins[max_bins] = quantize(self.X, max_bins)
        return self._bins[max_bins]


def _midpoints(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    m = (lo + hi) * 0.5
    return np.where(m <= lo, hi, m)


def quantize(X: np.ndarray, max_bins: int):
    n, d = X.shape
    cut_list = []
    for f in range(d):
        u = np.unique(X[:, f])
        if u.size <= max_bins:
            pos = np.arange(u.size - 1)
        else:
            q = np.quantile(X[:, f], np.linspace(0, 1, max_bins + 1)[1:-1])
            pos = np.unique(np.searchsorted(u, q, side="right") - 1)
            pos = pos[(pos >= 0) & (pos < u.size - 1)]
        cut_list.append(_midpoints(u[pos], u[pos + 1]))
    width = max(1, max(c.size for c in cut_list))
    cuts = np.full((d, width), np.inf)
    bins = np.empty((n, d), dtype=np.uint16)
    for f, c in enumerate(cut_list):
        cuts[f, : c.size] = c
        bins[:, f] = np.searchsorted(c, X[:, f], side="right")
    nbins = np.array([c.size + 1 for c in cut_list], dtype=np.int32)
    return bins, nbins, cuts


def _as_matrix(X) -> FeatureMatrix:
    return X if isinstance(X, FeatureMatrix) else FeatureMatrix(X)


def grow_tree(fm: FeatureMatrix, g: np.ndarray, h: np.ndarray, params: BoostParams,
              rows: np.ndarray | None = None, features: np.ndarray | None = None,
              backend: str | None = None) -> RegressionTree:
    """Grow one tree on gradients ``g`` and hessians ``h``.

    ``rows`` (boolean mask) and ``features`` (sorted indices) restrict the
    sample and candidate features.
    """
    k = _backend.get(backend)
    n, d = fm.shape
    lam, gamma, mcw = float(params.reg_lambda), float(params.gamma), float(params.min_child_weight)
    features = np.arange(d, dtype=np.int32) if features is None else np.asarray(features, dtype=np.int32)
    node = np.zeros(n, dtype=np.int32)
    if rows is not None:
        node[~rows] = -1
    if params.tree_method == "hist":
        bins, nbins, cuts = fm.bins(params.max_bins)

    feature, threshold, left, right, value, gain, cover = ([] for _ in range(7))

    def new_node() -> int:
        for col, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (value, 0.0), (gain, 0.0), (cover, 0.0)):
            col.append(v)
        return len(feature) - 1

    open_ids = [new_node()]
    for depth in range(params.max_depth + 1):
        G, H, C = k.node_sums(node, g, h, len(open_ids))
        for j, nid in enumerate(open_ids):
            value[nid] = -G[j] / (H[j] + lam)
            cover[nid] = H[j]
        if depth == params.max_depth:
            break
        if params.tree_method == "hist":
            best, feat, thr = k.best_splits_hist(bins, nbins, cuts, node, g, h, G, H, C,
                                                 features, lam, gamma, mcw)
        else:
            best, feat, thr = k.best_splits_exact(fm.sorted_values, fm.order, node, g, h, G, H,
                                                  features, lam, gamma, mcw)
        do_split = best > 0
        if not do_split.any():
            break
        lidx = np.full(len(open_ids), -1, dtype=np.int32)
        ridx = np.full(len(open_ids), -1, dtype=np.int32)
        children = []
        for j, nid in enumerate(open_ids):
            if not do_split[j]:
                continue
            feature[nid], threshold[nid], gain[nid] = int(feat[j]), float(thr[j]), float(best[j])
            value[nid] = 0.0
            left[nid], right[nid] = new_node(), new_node()
            lidx[j], ridx[j] = len(children), len(children) + 1
            children += [left[nid], right[nid]]
        node = k.partition(fm.X, node, feat, thr, lidx, ridx)
        open_ids = children

    return RegressionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
        gain=np.array(gain, dtype=np.float64),
        cover=np.array(cover, dtype=np.float64),
    )


def _check_target(y, n: int, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise DataError(f"{name} has {y.shape[0]} values for {n} rows")
    if not np.isfinite(y).all():
        raise DataError(f"{name} contains non-finite values")
    return y


def fit(X, y, params: BoostParams | None = None, eval_set=None, backend: str | None = None) -> BoostedModel:
    """Fit a boosted ensemble to rows ``X`` and targets ``y``.

    ``X`` may be a :class:`FeatureMatrix` to reuse cached sort orders.
    With ``eval_set=(X_eval, y_eval)`` the evaluation MSE is recorded per
    round; if ``params.early_stopping_rounds`` is set, training stops after
    that many rounds without improvement and the model is truncated to the
    best round.
    """
    params = params or BoostParams()
    fm = _as_matrix(X)
    n, d = fm.shape
    y = _check_target(y, n)
    kern = _backend.get(backend)

    base = float(np.mean(y)) if params.base_score is None else float(params.base_score)
    eta = float(params.learning_rate)
    pred = np.full(n, base)
    hess = np.ones(n)
    rng = np.random.default_rng(params.seed)

    if eval_set is not None:
        Xe = np.ascontiguousarray(eval_set[0], dtype=np.float64)
        if Xe.ndim != 2 or Xe.shape[1] != d:
            raise DataError(f"eval rows must have width {d}, got shape {Xe.shape}")
        ye = _check_target(eval_set[1], Xe.shape[0], "eval y")
        pred_e = np.full(Xe.shape[0], base)

    trees: list[RegressionTree] = []
    train_loss: list[float] = []
    eval_loss: list[float] = []
    best_round, best_loss, stale = None, np.inf, 0
    n_rows = max(1, int(round(params.subsample * n)))
    n_cols = max(1, int(round(params.colsample * d)))

    for it in range(params.n_trees):
        rows = None
        if n_rows < n:
            rows = np.zeros(n, dtype=bool)
            rows[rng.choice(n, n_rows, replace=False)] = True
        features = None
        if n_cols < d:
            features = np.sort(rng.choice(d, n_cols, replace=False)).astype(np.int32)
        grad = pred - y
        tree = grow_tree(fm, grad, hess, params, rows, features, backend)
        trees.append(tree)
        pred += eta * kern.predict_trees(fm.X, tree.feature, tree.threshold, tree.left, tree.right,
                                         tree.value, np.zeros(1, dtype=np.int64))
        if not np.isfinite(pred).all():
            raise NumericalError(f"non-finite training predictions at round {it + 1}")
        train_loss.append(float(np.mean((pred - y) ** 2)))
        if eval_set is not None:
            pred_e += eta * tree.predict(Xe, backend)
            loss = float(np.mean((pred_e - ye) ** 2))
            eval_loss.append(loss)
            if loss < best_loss:
                best_round, best_loss, stale = it + 1, loss, 0
            else:
                stale += 1
                if params.early_stopping_rounds is not None and stale >= params.early_stopping_rounds:
                    log.debug("early stop at round %d, best %d", it + 1, best_round)
                    break

    if params.early_stopping_rounds is not None and best_round is not None:
        trees = trees[:best_round]
    return BoostedModel(
        base_score=base,
        learning_rate=eta,
        trees=trees,
        n_features=d,
        params=params,
        train_loss=train_loss,
        eval_loss=eval_loss,
        best_round=best_round,
    )


def predict(model: BoostedModel, X, backend: str | None = None) -> np.ndarray:
    """``base_score + learning_rate * sum of tree outputs`` for every row."""
    return model.predict(X, backend)


def feature_importance(model: BoostedModel) -> np.ndarray:
    """Total split gain per feature over all trees."""
    imp = np.zeros(model.n_features)
    for t in model.trees:
        internal = t.feature >= 0
        np.add.at(imp, t.feature[internal], t.gain[internal])
    return imp
