"""Random Forest over (entropy, length) feature vectors.

Trees are CART classifiers grown greedily on Gini gain. Split search is
done in exact integer arithmetic (see ``kernels.split_scores``), so tree
structure does not depend on floating-point summation order or on which
kernel backend is active.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import EmptyInput, SingleClassInput
from .features import FeatureVector
from .prng import MASK64, Prng

FEATURE_NAMES = ("entropy", "length")


def samples_to_arrays(samples: Sequence[Tuple[FeatureVector, int]]):
    X = np.array([[fv.entropy, float(fv.length)] for fv, _ in samples], dtype=np.float64)
    y = np.array([int(label) for _, label in samples], dtype=np.int64)
    return X.reshape(-1, 2), y


def _scan(values: np.ndarray, y: np.ndarray):
    """Best split of one feature: (threshold, s_num, s_den) or None."""
    order = np.argsort(values, kind="stable")
    xs = np.ascontiguousarray(values[order])
    ys = y[order]
    k, num, den = kernels.split_scores(xs, ys)
    if k < 0:
        return None
    lo, hi = xs[k], xs[k + 1]
    thr = (lo + hi) / 2.0
    if not thr < hi:
        thr = lo
    return float(thr), num, den


def _gain(num: int, den: int, y: np.ndarray) -> float:
    n = len(y)
    n1 = int(y.sum())
    n0 = n - n1
    parent = n0 * n0 + n1 * n1
    return float(Fraction(num * n - parent * den, n * n * den))


def best_split(samples: Sequence[Tuple[FeatureVector, int]], feature: int) -> Optional[Tuple[float, float]]:
    """Midpoint threshold on ``feature`` (0 entropy, 1 length) maximising Gini
    gain, with the gain; None when no split has positive gain."""
    X, y = samples_to_arrays(samples)
    return best_split_arrays(X, y, feature)


def best_split_arrays(X: np.ndarray, y: np.ndarray, feature: int) -> Optional[Tuple[float, float]]:
    found = _scan(X[:, feature], y)
    if found is None:
        return None
    thr, num, den = found
    return thr, _gain(num, den, y)


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature[i] < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n0: np.ndarray
    n1: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def leaf_for(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = int(self.left[node])
            else:
                node = int(self.right[node])
        return node

    def validate(self, max_depth: Optional[int] = None) -> None:
        n = self.n_nodes
        if n == 0:
            raise ValueError("tree has no nodes")
        for arr in (self.threshold, self.left, self.right, self.n0, self.n1):
            if len(arr) != n:
                raise ValueError("node arrays differ in length")
        inner = self.feature >= 0
        if np.any(self.feature[inner] > 1) or np.any(self.feature < -1):
            raise ValueError("feature index out of range")
        kids = np.concatenate([self.left[inner], self.right[inner]])
        if kids.size and (kids.min() <= 0 or kids.max() >= n):
            raise ValueError("child index out of range")
        if not np.all(np.isfinite(self.threshold[inner])):
            raise ValueError("non-finite threshold")
        leaf = ~inner
        if np.any(self.n0 < 0) or np.any(self.n1 < 0) or np.any(self.n0[leaf] + self.n1[leaf] == 0):
            raise ValueError("bad leaf counts")
        if max_depth is not None and self.depth() > max_depth:
            raise ValueError("tree deeper than max_depth")


def _grow(X: np.ndarray, y: np.ndarray, max_depth: int) -> DecisionTree:
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    n0: List[int] = []
    n1: List[int] = []

    def new_node(idx):
        ones = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n0.append(len(idx) - ones)
        n1.append(ones)
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or n0[node] == 0 or n1[node] == 0:
            continue
        yi = y[idx]
        best = None
        for f in (0, 1):
            found = _scan(X[idx, f], yi)
            if found is None:
                continue
            thr, num, den = found
            # tie between features goes to feature 0
            if best is None or num * best[3] > best[2] * den:
                best = (f, thr, num, den)
        if best is None:
            continue
        f, thr = best[0], best[1]
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(n0, dtype=np.int64),
        np.array(n1, dtype=np.int64),
    )


def train_tree(samples, max_depth: int = 8, prng: Optional[Prng] = None) -> DecisionTree:
    """Greedy CART tree on the given samples (no resampling here).

    ``prng`` is accepted for interface symmetry; with only two features
    there is no per-node feature subsampling to drive.
    """
    X, y = samples_to_arrays(samples)
    if len(y) == 0:
        raise EmptyInput("cannot train a tree on no samples")
    return _grow(X, y, max_depth)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 8
    seed: int = 0


@dataclass
class ForestModel:
    trees: List[DecisionTree]
    n_trees: int
    max_depth: int
    seed: int
    feature_names: Tuple[str, str] = FEATURE_NAMES
    _packed: Optional[tuple] = field(default=None, repr=False, compare=False)

    def packed(self):
        """Concatenated node arrays for the vote kernel."""
        if self._packed is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]])
            feat, thr, left, right, vote = [], [], [], [], []
            for off, t in zip(offsets, self.trees):
                inner = t.feature >= 0
                feat.append(t.feature)
                thr.append(t.threshold)
                left.append(np.where(inner, t.left + off, -1))
                right.append(np.where(inner, t.right + off, -1))
                vote.append((t.n1 > t.n0).astype(np.int64))
            self._packed = tuple(
                np.ascontiguousarray(np.concatenate(a)) for a in (feat, thr, left, right, vote)
            ) + (np.ascontiguousarray(offsets, dtype=np.int64),)
        return self._packed

    def validate(self) -> None:
        if not self.trees or len(self.trees) != self.n_trees:
            raise ValueError("forest tree count mismatch")
        for t in self.trees:
            t.validate(self.max_depth)


def _bootstrap(n: int, seed: int) -> np.ndarray:
    prng = Prng(seed)
    return np.array([prng.below(n) for _ in range(n)], dtype=np.int64)


def train_forest_arrays(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig()) -> ForestModel:
    if len(y) == 0:
        raise EmptyInput("cannot train a forest on no samples")
    if config.n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    if y.min() == y.max():
        raise SingleClassInput("forest training needs both classes")
    seed = config.seed & MASK64
    trees = []
    for t in range(config.n_trees):
        # each tree owns its stream, so trees can be built in any order
        idx = _bootstrap(len(y), seed ^ t)
        trees.append(_grow(X[idx], y[idx], config.max_depth))
    return ForestModel(trees, config.n_trees, config.max_depth, seed)


def train_forest(samples, config: ForestConfig = ForestConfig()) -> ForestModel:
    X, y = samples_to_arrays(samples)
    return train_forest_arrays(X, y, config)


def predict_scores(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Fraction of trees voting DGA, for each row of ``X``."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64).reshape(-1, 2))
    feat, thr, left, right, vote, roots = model.packed()
    votes = kernels.forest_votes(feat, thr, left, right, vote, roots, X)
    return np.asarray(votes, dtype=np.float64) / len(model.trees)


def predict_forest(model: ForestModel, fv: FeatureVector) -> float:
    """Share of trees whose leaf has more DGA than legit samples; leaf ties vote legit."""
    return float(predict_scores(model, np.array([fv.as_tuple()]))[0])


def classify(score: float) -> int:
    return int(score > 0.5)
