"""Random forest of binary CART trees: Gini splits, bootstrap bagging,
random feature subsets, deterministic under a fixed seed."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    features_per_split: int | None = None  # None: ceil(sqrt(D))


@dataclass
class Tree:
    """Flat array representation. Leaves have feature == -1; leaf_frac is the
    class-1 fraction at the node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_frac: np.ndarray

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            f = feat[idx]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.leaf_frac[node]


@dataclass
class RFModel:
    config: RFConfig
    trees: list[Tree]
    n_features: int
    seed: int
    oob_indices: list[np.ndarray] = field(default_factory=list)
    single_class: bool = False  # degenerate training set flag

    def to_state(self) -> dict:
        return {
            "kind": "rf",
            "n_trees": self.config.n_trees,
            "max_depth": self.config.max_depth,
            "min_leaf": self.config.min_leaf,
            "features_per_split": self.config.features_per_split or 0,
            "n_features": self.n_features,
            "seed": self.seed,
            "single_class": int(self.single_class),
            "trees": [
                {
                    "feature": t.feature,
                    "threshold": t.threshold,
                    "left": t.left,
                    "right": t.right,
                    "leaf_frac": t.leaf_frac,
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_state(cls, state: dict) -> "RFModel":
        cfg = RFConfig(
            n_trees=int(state["n_trees"]),
            max_depth=int(state["max_depth"]),
            min_leaf=int(state["min_leaf"]),
            features_per_split=int(state["features_per_split"]) or None,
        )
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                leaf_frac=np.asarray(t["leaf_frac"], dtype=np.float64),
            )
            for t in state["trees"]
        ]
        return cls(
            config=cfg,
            trees=trees,
            n_features=int(state["n_features"]),
            seed=int(state["seed"]),
            single_class=bool(state["single_class"]),
        )


class _TreeBuilder:
    def __init__(self, X, y, config, n_feat_split, rng):
        self.X = X
        self.y = y.astype(np.float64)
        self.cfg = config
        self.k = n_feat_split
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.leaf_frac = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_frac.append(0.0)
        return len(self.feature) - 1

    def build(self, idx, depth) -> int:
        node = self._new_node()
        y = self.y[idx]
        frac = float(y.mean())
        self.leaf_frac[node] = frac
        if (
            depth >= self.cfg.max_depth
            or len(idx) < 2 * self.cfg.min_leaf
            or frac == 0.0
            or frac == 1.0
        ):
            return node
        split = self._best_split(idx)
        if split is None:
            return node
        f, thr, left_idx, right_idx = split
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(left_idx, depth + 1)
        self.right[node] = self.build(right_idx, depth + 1)
        return node

    def _best_split(self, idx):
        X, y = self.X[idx], self.y[idx]
        n = len(idx)
        feats = self.rng.choice(self.X.shape[1], size=self.k, replace=False)
        best = None
        best_gini = np.inf
        for f in feats:
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            ys = y[order]
            # valid split positions: between distinct values, honoring min_leaf
            c1 = np.cumsum(ys)[:-1]          # class-1 counts left of each cut
            nl = np.arange(1, n)
            nr = n - nl
            distinct = xs[1:] != xs[:-1]
            ok = distinct & (nl >= self.cfg.min_leaf) & (nr >= self.cfg.min_leaf)
            if not ok.any():
                continue
            p1l = c1 / nl
            p1r = (c1[-1] + ys[-1] - c1) / nr
            gini = nl * 2 * p1l * (1 - p1l) + nr * 2 * p1r * (1 - p1r)
            gini = gini / n
            gini = np.where(ok, gini, np.inf)
            pos = int(np.argmin(gini))
            if gini[pos] < best_gini - 1e-15:
                best_gini = gini[pos]
                thr = 0.5 * (xs[pos] + xs[pos + 1])
                best = (int(f), float(thr), idx[order[: pos + 1]], idx[order[pos + 1 :]])
        # reject splits that do not improve impurity
        if best is not None:
            p = y.mean()
            parent_gini = 2 * p * (1 - p)
            if best_gini >= parent_gini - 1e-12:
                return None
        return best

    def to_tree(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            leaf_frac=np.asarray(self.leaf_frac, dtype=np.float64),
        )


def train_rf(X, y, config: RFConfig = RFConfig(), seed: int = 0) -> RFModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be [N, D] with matching labels")
    if not np.isin(y, [0, 1]).all():
        raise ValueError("labels must be binary 0/1")
    d = X.shape[1]
    k = config.features_per_split or math.ceil(math.sqrt(d))
    k = min(k, d)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    trees = []
    oob = []
    for _ in range(config.n_trees):
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder(X, y, config, k, rng)
        builder.build(boot, 0)
        trees.append(builder.to_tree())
        oob.append(np.setdiff1d(np.arange(n), boot))
    return RFModel(
        config=config,
        trees=trees,
        n_features=d,
        seed=seed,
        oob_indices=oob,
        single_class=bool(y.min() == y.max()),
    )


def rf_predict_proba(model: RFModel, X) -> np.ndarray:
    """Mean class-1 leaf fraction over the forest; [N] in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: got {X.shape[1]}, expected {model.n_features}")
    if not model.trees:
        raise ValueError("empty forest")
    p = np.zeros(X.shape[0])
    for t in model.trees:
        p += t.predict_proba(X)
    p /= len(model.trees)
    return float(p[0]) if single else p


def oob_accuracy(model: RFModel, X, y) -> float:
    """Out-of-bag accuracy on the training set the forest was grown from."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    votes = np.zeros(X.shape[0])
    counts = np.zeros(X.shape[0])
    for t, oob in zip(model.trees, model.oob_indices):
        if len(oob) == 0:
            continue
        votes[oob] += t.predict_proba(X[oob])
        counts[oob] += 1
    has = counts > 0
    pred = (votes[has] / counts[has]) >= 0.5
    return float(np.mean(pred == y[has].astype(bool)))
