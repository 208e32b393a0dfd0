"""Brute-force L2 ranking, average query expansion, and mAP / recall@N.

Ranking is an exhaustive scan over the database with squared Euclidean
distances, ties broken by manifest order.  Evaluation follows the Oxford
buildings protocol: junk images are removed from rankings before scoring and
average precision is the mean of precision at each positive hit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import EmptyDatasetError, ParamError, ShapeError, UndefinedError
from .postprocess import l2_normalize


@dataclass
class RankedList:
    """Database ids with distances, ascending, for one query."""

    query_id: str
    entries: list  # (image_id, distance) pairs

    @property
    def image_ids(self) -> list[str]:
        return [image_id for image_id, _ in self.entries]


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance between two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dim mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def rank(query: np.ndarray, database: np.ndarray, ids: Sequence[str],
         query_id: str = "", exclude_self: bool = True) -> RankedList:
    """Exhaustively rank the database by squared distance to the query.

    Ties keep manifest order (stable sort).  A database entry whose id
    equals query_id is dropped when exclude_self is set.
    """
    db = np.asarray(database, dtype=np.float64)
    if db.ndim != 2 or db.shape[0] == 0:
        raise EmptyDatasetError("cannot rank against an empty database")
    if len(ids) != db.shape[0]:
        raise ShapeError(f"{len(ids)} ids for {db.shape[0]} database vectors")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (db.shape[1],):
        raise ShapeError(
            f"query dim {q.shape} does not match database dim ({db.shape[1]},)"
        )
    diffs = db - q
    dists = np.einsum("ij,ij->i", diffs, diffs)
    order = np.argsort(dists, kind="stable")
    entries = [
        (ids[i], float(dists[i]))
        for i in order
        if not (exclude_self and ids[i] == query_id)
    ]
    return RankedList(query_id=query_id, entries=entries)


def query_expansion(query: np.ndarray, ranked: RankedList, database: np.ndarray,
                    ids: Sequence[str], top: int = 10) -> np.ndarray:
    """Average query expansion: normalized mean of the query and its top
    ranked result vectors.  The caller re-runs rank with the output.
    """
    if top < 1:
        raise ParamError(f"top must be >= 1, got {top}")
    db = np.asarray(database, dtype=np.float64)
    if top > len(ranked.entries):
        warnings.warn(
            f"qe top={top} exceeds ranked list size {len(ranked.entries)}; clamping",
            stacklevel=2,
        )
        top = len(ranked.entries)
    index_of = {image_id: i for i, image_id in enumerate(ids)}
    picked = [db[index_of[image_id]] for image_id, _ in ranked.entries[:top]]
    stacked = np.vstack([np.asarray(query, dtype=np.float64)] + picked)
    return l2_normalize(stacked.mean(axis=0))


def average_precision(ranked: RankedList, gt_entry: dict) -> float:
    """Oxford-protocol AP for one query.

    gt_entry maps "good"/"ok"/"junk" to id sets.  Junk ids are removed from
    the ranking first; positives are good union ok.
    """
    positives = set(gt_entry.get("good", ())) | set(gt_entry.get("ok", ()))
    junk = set(gt_entry.get("junk", ()))
    if not positives:
        raise UndefinedError(f"query {ranked.query_id!r} has no positive images")
    hits = 0
    seen = 0
    precision_sum = 0.0
    for image_id, _ in ranked.entries:
        if image_id in junk:
            continue
        seen += 1
        if image_id in positives:
            hits += 1
            precision_sum += hits / seen
    return precision_sum / len(positives)


def mean_average_precision(ranked_lists: Sequence[RankedList], gt: dict) -> float:
    """Unweighted mean AP over all scorable queries.

    Queries without ground truth or without positives are skipped with a
    warning; at least one query must be scorable.
    """
    aps = []
    for rl in ranked_lists:
        entry = gt.get(rl.query_id)
        if entry is None:
            warnings.warn(f"no ground truth for query {rl.query_id!r}; skipped",
                          stacklevel=2)
            continue
        try:
            aps.append(average_precision(rl, entry))
        except UndefinedError as exc:
            warnings.warn(f"{exc}; excluded from mAP", stacklevel=2)
    if not aps:
        raise UndefinedError("no scorable queries")
    return float(np.mean(aps))


def recall_at_n(ranked_lists: Sequence[RankedList], positives: dict,
                n_values: Sequence[int]) -> list[float]:
    """Fraction of queries with at least one positive in the top n, per n."""
    if not ranked_lists:
        raise EmptyDatasetError("no ranked lists to evaluate")
    results = []
    for n in n_values:
        if n < 1:
            raise ParamError(f"n must be >= 1, got {n}")
        hit = sum(
            1
            for rl in ranked_lists
            if positives.get(rl.query_id)
            and any(image_id in positives[rl.query_id]
                    for image_id, _ in rl.entries[:n])
        )
        results.append(hit / len(ranked_lists))
    return results
