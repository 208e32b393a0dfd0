"""Rank-weighted multi-neighbor (MN) classification.

The k-th of K nearest neighbors adds (K - k) to its category's score and the
argmax category is predicted.  Score ties go to the category of the nearer
neighbor among the tied ones, then lexicographic, which makes K=1 degenerate
exactly to nearest-neighbor classification.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import IncompleteError, ParamError, ShapeError

WEIGHT_SCHEMES = ("paper", "plus-one")


@dataclass
class NeighborList:
    """K nearest labeled neighbors of one query, ascending distance."""

    query_id: str
    neighbors: list  # (image_id, label, distance) triples


@dataclass
class ScoreTable:
    """Integer confidence scores per category plus the argmax prediction."""

    scores: dict
    predicted: str

    @property
    def top_score(self) -> int:
        return self.scores[self.predicted]


def knn(query: np.ndarray, database: np.ndarray, ids: Sequence[str],
        labels: Sequence[str], k: int, query_id: str = "") -> NeighborList:
    """The k nearest database entries by squared L2 distance.

    Ties keep manifest order.  Every database entry must carry a label.
    """
    db = np.asarray(database, dtype=np.float64)
    if db.ndim != 2:
        raise ShapeError(f"database must be 2-D, got shape {db.shape}")
    if not 1 <= k <= db.shape[0]:
        raise ParamError(f"k={k} outside valid range [1, {db.shape[0]}]")
    if len(ids) != db.shape[0] or len(labels) != db.shape[0]:
        raise ShapeError("ids and labels must match the database size")
    if any(label is None for label in labels):
        raise ParamError("every database entry must be labeled")
    q = np.asarray(query, dtype=np.float64)
    diffs = db - q
    dists = np.einsum("ij,ij->i", diffs, diffs)
    order = np.argsort(dists, kind="stable")[:k]
    return NeighborList(
        query_id=query_id,
        neighbors=[(ids[i], labels[i], float(dists[i])) for i in order],
    )


def mn_classify(neighbors: NeighborList, weight_scheme: str = "paper") -> ScoreTable:
    """Score categories by rank-weighted votes and predict the argmax.

    "paper" gives neighbor k weight (K - k); "plus-one" gives (K - k + 1) so
    the last neighbor still votes.
    """
    if weight_scheme not in WEIGHT_SCHEMES:
        raise ParamError(f"unknown weight scheme {weight_scheme!r}")
    ranked = neighbors.neighbors
    if not ranked:
        raise ParamError("neighbor list is empty")
    big_k = len(ranked)
    offset = 0 if weight_scheme == "paper" else 1
    scores: dict[str, int] = {}
    first_rank: dict[str, int] = {}
    for k, (_, label, _) in enumerate(ranked, start=1):
        scores[label] = scores.get(label, 0) + (big_k - k) + offset
        first_rank.setdefault(label, k)
    best = max(scores.values())
    tied = [c for c, s in scores.items() if s == best]
    predicted = min(tied, key=lambda c: (first_rank[c], c))
    return ScoreTable(scores=scores, predicted=predicted)


def evaluate_accuracy(truth: dict, predictions: dict) -> float:
    """Fraction of test images predicted correctly.

    truth and predictions map image_id to label; every truth id must be
    predicted.
    """
    if not truth:
        raise IncompleteError("no test images to evaluate")
    missing = [image_id for image_id in truth if image_id not in predictions]
    if missing:
        raise IncompleteError(f"missing predictions for {len(missing)} images, "
                              f"e.g. {missing[0]!r}")
    correct = sum(1 for image_id, label in truth.items()
                  if predictions[image_id] == label)
    return correct / len(truth)


class MultiNeighborClassifier(BaseEstimator, ClassifierMixin):
    """sklearn-style MN classifier over precomputed representation vectors.

    k is clamped to the database size at predict time with a warning.
    """

    def __init__(self, k=40, weight_scheme="paper"):
        self.k = k
        self.weight_scheme = weight_scheme

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(y) != X.shape[0]:
            raise ShapeError("X must be (n, dim) with one label per row")
        self.X_ = X
        self.y_ = list(y)
        self.ids_ = [str(i) for i in range(X.shape[0])]
        return self

    def _effective_k(self) -> int:
        if self.k > self.X_.shape[0]:
            warnings.warn(
                f"k={self.k} exceeds database size {self.X_.shape[0]}; clamping",
                stacklevel=3,
            )
            return self.X_.shape[0]
        return self.k

    def predict(self, X):
        k = self._effective_k()
        out = []
        for q in np.atleast_2d(np.asarray(X, dtype=np.float64)):
            nn = knn(q, self.X_, self.ids_, self.y_, k)
            out.append(mn_classify(nn, self.weight_scheme).predicted)
        return np.asarray(out)
