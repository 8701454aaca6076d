"""Decision-tree ensembles: bagged Gini forests and softmax gradient boosting.

Everything is deterministic given the seed: bootstrap rows and per-split
feature subsets come from a SeedSequence-spawned generator per tree, split
ties resolve to the lowest feature index then lowest threshold, and class
ties resolve to the smallest class index. Split thresholds are the left
child's maximum value with a ``<=`` test, so partitioning reproduces the
kernel's split exactly with no midpoint rounding edge cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import gini_best_split, sse_best_split
from .errors import ValidationError


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: np.ndarray | float | None = None  # leaf payload

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class ClassificationTree:
    """Single CART tree, Gini impurity, optional feature subsampling."""

    def __init__(self, max_depth: int, min_leaf: int):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root: _Node | None = None
        self.n_classes = 0

    def fit(self, X, y, n_classes, rng=None, max_features=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        self.n_classes = n_classes
        self.root = self._grow(X, y, np.arange(X.shape[0]), 0, rng, max_features)
        return self

    def _leaf(self, y, idx) -> _Node:
        dist = np.bincount(y[idx], minlength=self.n_classes) / idx.size
        return _Node(value=dist)

    def _grow(self, X, y, idx, depth, rng, max_features) -> _Node:
        labels = y[idx]
        if (
            depth >= self.max_depth
            or idx.size < 2 * self.min_leaf
            or np.all(labels == labels[0])
        ):
            return self._leaf(y, idx)

        n_feats = X.shape[1]
        if max_features is not None and max_features < n_feats:
            feats = np.sort(rng.permutation(n_feats)[:max_features])
        else:
            feats = np.arange(n_feats)

        best = (np.inf, -1, 0.0)  # score, feature, threshold
        for f in feats:
            col = X[idx, f]
            order = np.argsort(col, kind="mergesort")
            pos, score = gini_best_split(
                np.ascontiguousarray(col[order]),
                np.ascontiguousarray(labels[order]),
                self.n_classes,
                self.min_leaf,
            )
            if pos >= 0 and score < best[0]:
                best = (score, int(f), float(col[order[pos - 1]]))
        if best[1] < 0:
            return self._leaf(y, idx)

        _, feature, threshold = best
        mask = X[idx, feature] <= threshold
        left = self._grow(X, y, idx[mask], depth + 1, rng, max_features)
        right = self._grow(X, y, idx[~mask], depth + 1, rng, max_features)
        return _Node(feature=feature, threshold=threshold, left=left, right=right)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.n_classes))
        for i in range(X.shape[0]):
            node = self.root
            while not node.is_leaf:
                node = node.left if X[i, node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


class RegressionTree:
    """CART regression tree on squared error; leaves hold mean targets."""

    def __init__(self, max_depth: int, min_leaf: int):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root: _Node | None = None

    def fit(self, X, target):
        X = np.ascontiguousarray(X, dtype=np.float64)
        target = np.ascontiguousarray(target, dtype=np.float64)
        self.root = self._grow(X, target, np.arange(X.shape[0]), 0)
        return self

    def _grow(self, X, target, idx, depth) -> _Node:
        if depth >= self.max_depth or idx.size < 2 * self.min_leaf:
            return _Node(value=float(np.mean(target[idx])))
        best = (np.inf, -1, 0.0)
        for f in range(X.shape[1]):
            col = X[idx, f]
            order = np.argsort(col, kind="mergesort")
            pos, score = sse_best_split(
                np.ascontiguousarray(col[order]),
                np.ascontiguousarray(target[idx][order]),
                self.min_leaf,
            )
            if pos >= 0 and score < best[0]:
                best = (score, int(f), float(col[order[pos - 1]]))
        if best[1] < 0:
            return _Node(value=float(np.mean(target[idx])))
        _, feature, threshold = best
        mask = X[idx, feature] <= threshold
        left = self._grow(X, target, idx[mask], depth + 1)
        right = self._grow(X, target, idx[~mask], depth + 1)
        return _Node(feature=feature, threshold=threshold, left=left, right=right)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            node = self.root
            while not node.is_leaf:
                node = node.left if X[i, node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 1
    seed: int = 0

    def validate(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValidationError("forest config values must be positive")


class ForestModel:
    """Bagged classification trees with sqrt-F feature subsets per split."""

    def __init__(self, config: ForestConfig):
        config.validate()
        self.config = config
        self.trees: list[ClassificationTree] = []
        self.n_classes = 0

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if np.unique(y).size < 2:
            raise ValidationError("training set contains a single class")
        self.n_classes = n_classes
        max_features = max(1, int(np.sqrt(X.shape[1])))
        seeds = np.random.SeedSequence(self.config.seed).spawn(self.config.n_trees)
        self.trees = []
        for tree_seed in seeds:
            rng = np.random.default_rng(tree_seed)
            rows = rng.integers(0, X.shape[0], X.shape[0])
            tree = ClassificationTree(self.config.max_depth, self.config.min_leaf)
            tree.fit(X[rows], y[rows], n_classes, rng=rng, max_features=max_features)
            self.trees.append(tree)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for tree in self.trees:
            pred = tree.predict(X)
            votes[np.arange(X.shape[0]), pred] += 1
        return np.argmax(votes, axis=1)  # ties fall to the smallest class index


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 40
    depth: int = 3
    learning_rate: float = 0.3
    min_leaf: int = 1
    seed: int = 0

    def validate(self):
        if self.n_rounds < 1 or self.depth < 1 or self.min_leaf < 1:
            raise ValidationError("boosting config values must be positive")
        if self.learning_rate < 0:
            raise ValidationError("learning rate must be >= 0")


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class BoostedModel:
    """Stage-wise one-vs-all regression trees on softmax residuals.

    Scores start at the log class priors, so a zero learning rate leaves
    predictions at the prior argmax.
    """

    def __init__(self, config: BoostConfig):
        config.validate()
        self.config = config
        self.base_scores: np.ndarray | None = None
        self.stages: list[list[RegressionTree]] = []
        self.n_classes = 0

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if np.unique(y).size < 2:
            raise ValidationError("training set contains a single class")
        self.n_classes = n_classes
        priors = np.bincount(y, minlength=n_classes) / y.size
        self.base_scores = np.log(np.maximum(priors, 1e-12))
        onehot = np.zeros((y.size, n_classes))
        onehot[np.arange(y.size), y] = 1.0

        scores = np.tile(self.base_scores, (y.size, 1))
        self.stages = []
        for _ in range(self.config.n_rounds):
            probs = _softmax(scores)
            stage = []
            for c in range(n_classes):
                tree = RegressionTree(self.config.depth, self.config.min_leaf)
                tree.fit(X, onehot[:, c] - probs[:, c])
                stage.append(tree)
                scores[:, c] += self.config.learning_rate * tree.predict(X)
            self.stages.append(stage)
        return self

    def decision_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scores = np.tile(self.base_scores, (X.shape[0], 1))
        for stage in self.stages:
            for c, tree in enumerate(stage):
                scores[:, c] += self.config.learning_rate * tree.predict(X)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_scores(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)
