"""Variance-based selection of discriminative channels ("semantic detectors").

Per-channel activation sums are collected over the database; channels whose
sums vary most across images respond differently to different objects and are
kept as detectors.  Variance uses population normalization (1/D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import EmptyDatasetError, ParamError, ShapeError
from .io import FeatureTensor


@dataclass
class ChannelStats:
    """Per-channel mean and population variance of sum-pooled activations."""

    mean: np.ndarray
    variance: np.ndarray
    dataset_size: int

    @property
    def channels(self) -> int:
        return self.mean.shape[0]


@dataclass
class DetectorSet:
    """Selected channel indices, ordered by decreasing variance."""

    indices: np.ndarray
    variances: np.ndarray
    source_channels: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        n = len(self.indices)
        if n < 1 or n > self.source_channels:
            raise ParamError(
                f"detector count {n} outside [1, {self.source_channels}]"
            )
        if len(np.unique(self.indices)) != n:
            raise ParamError("detector indices must be distinct")
        if np.any(self.indices < 0) or np.any(self.indices >= self.source_channels):
            raise ParamError("detector index out of channel range")

    def __len__(self) -> int:
        return len(self.indices)


def _tensor_data(tensor) -> np.ndarray:
    if isinstance(tensor, FeatureTensor):
        return tensor.data
    arr = np.asarray(tensor)
    if arr.ndim != 3:
        raise ShapeError(f"expected (C, H, W) tensor, got shape {arr.shape}")
    return arr


def sum_pool(tensor) -> np.ndarray:
    """Sum activations over all spatial positions, one value per channel."""
    data = _tensor_data(tensor)
    return data.sum(axis=(1, 2), dtype=np.float64)


def compute_channel_stats(tensors: Iterable) -> ChannelStats:
    """Mean and population variance of sum-pooled vectors over a dataset.

    Tensors may differ in H and W but must share C.  Accumulation order is
    the iteration order, so results are bit-reproducible.
    """
    pooled: list[np.ndarray] = []
    channels = None
    for tensor in tensors:
        g = sum_pool(tensor)
        if channels is None:
            channels = g.shape[0]
        elif g.shape[0] != channels:
            raise ShapeError(
                f"mixed channel counts in dataset: {channels} vs {g.shape[0]}"
            )
        pooled.append(g)
    if not pooled:
        raise EmptyDatasetError("cannot compute channel statistics of an empty dataset")
    g_mat = np.stack(pooled)
    mean = g_mat.mean(axis=0)
    variance = np.square(g_mat - mean).mean(axis=0)
    return ChannelStats(mean=mean, variance=variance, dataset_size=len(pooled))


def combine_pooled_stats(pooled: Sequence[np.ndarray]) -> ChannelStats:
    """Build ChannelStats from already sum-pooled vectors (parallel driver path)."""
    if not pooled:
        raise EmptyDatasetError("cannot compute channel statistics of an empty dataset")
    g_mat = np.stack([np.asarray(g, dtype=np.float64) for g in pooled])
    mean = g_mat.mean(axis=0)
    variance = np.square(g_mat - mean).mean(axis=0)
    return ChannelStats(mean=mean, variance=variance, dataset_size=len(pooled))


def select_detectors(stats: ChannelStats, n: int) -> DetectorSet:
    """Keep the n channels with largest variance, ties to the lower index."""
    c = stats.channels
    if not 1 <= n <= c:
        raise ParamError(f"n={n} outside valid range [1, {c}]")
    # stable sort on descending variance keeps the lower index first on ties
    order = np.argsort(-stats.variance, kind="stable")[:n]
    return DetectorSet(
        indices=order,
        variances=stats.variance[order],
        source_channels=c,
    )


def select_random_detectors(c: int, n: int, seed: int) -> DetectorSet:
    """Uniform random detector choice, the control arm for ablations."""
    if not 1 <= n <= c:
        raise ParamError(f"n={n} outside valid range [1, {c}]")
    rng = np.random.default_rng(seed)
    indices = rng.choice(c, size=n, replace=False)
    return DetectorSet(
        indices=indices,
        variances=np.zeros(n),
        source_channels=c,
    )


class DetectorSelector(BaseEstimator):
    """Estimator wrapper: fit on a sequence of feature tensors, expose the
    selected DetectorSet as ``detectors_``.

    Parameters
    ----------
    n_detectors : number of channels to keep (clamped to C at fit time only
        if larger counts are explicitly allowed via ``clamp=True``).
    selection : "variance" for the discriminative rule, "random" for the
        uniform control arm.
    random_state : seed for selection="random".
    """

    def __init__(self, n_detectors=25, selection="variance", random_state=0):
        self.n_detectors = n_detectors
        self.selection = selection
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.selection not in ("variance", "random"):
            raise ParamError(f"unknown selection mode {self.selection!r}")
        stats = compute_channel_stats(X)
        self.stats_ = stats
        if self.selection == "variance":
            self.detectors_ = select_detectors(stats, self.n_detectors)
        else:
            self.detectors_ = select_random_detectors(
                stats.channels, self.n_detectors, self.random_state
            )
        return self
