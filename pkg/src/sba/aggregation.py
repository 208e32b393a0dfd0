"""Weighted sum pooling driven by "probabilistic proposals".

Each selected detector channel becomes a spatial weight map: its activations
are power-normalized over the image and power-scaled, then used to weight a
sum pool over all channels.  The per-detector pooled vectors are concatenated
into the raw global representation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .detectors import (
    DetectorSet,
    _tensor_data,
    compute_channel_stats,
    select_detectors,
    select_random_detectors,
)
from .exceptions import ParamError, ShapeError

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 2.0


def compute_weights(tensor, detector: int, alpha: float = DEFAULT_ALPHA,
                    beta: float = DEFAULT_BETA) -> np.ndarray:
    """Spatial weight map w(x,y) = (v(x,y) / (sum v^alpha)^(1/alpha))^(1/beta).

    v is the detector channel clamped at 0 from below.  An identically zero
    channel yields an all-zero map rather than NaN.  Computed in float64
    regardless of tensor storage precision.
    """
    if alpha <= 0 or beta <= 0:
        raise ParamError(f"alpha and beta must be > 0, got alpha={alpha} beta={beta}")
    data = _tensor_data(tensor)
    c = data.shape[0]
    if not 0 <= detector < c:
        raise ParamError(f"detector {detector} outside channel range [0, {c})")
    v = np.maximum(data[detector].astype(np.float64), 0.0)
    denom = np.power(np.power(v, alpha).sum(), 1.0 / alpha)
    if denom == 0.0:
        return np.zeros_like(v)
    return np.power(v / denom, 1.0 / beta)


def pool_weighted(tensor, weights: np.ndarray) -> np.ndarray:
    """Weighted sum pool: out[c] = sum_{x,y} weights(x,y) * tensor[c,y,x]."""
    data = _tensor_data(tensor)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != data.shape[1:]:
        raise ShapeError(
            f"weights shape {weights.shape} does not match spatial dims "
            f"{data.shape[1:]}"
        )
    return np.tensordot(data.astype(np.float64), weights, axes=([1, 2], [0, 1]))


def aggregate(tensor, detectors: DetectorSet, alpha: float = DEFAULT_ALPHA,
              beta: float = DEFAULT_BETA) -> np.ndarray:
    """Concatenate the weighted pools of all detectors, in detector order.

    Output length is N*C with the n-th C-block produced by detector n's
    weight map.
    """
    data = _tensor_data(tensor)
    if detectors.source_channels != data.shape[0]:
        raise ShapeError(
            f"detector set expects C={detectors.source_channels}, "
            f"tensor has C={data.shape[0]}"
        )
    blocks = [
        pool_weighted(data, compute_weights(data, int(n), alpha, beta))
        for n in detectors.indices
    ]
    return np.concatenate(blocks)


class SbaAggregator(BaseEstimator, TransformerMixin):
    """fit: select detectors from the training tensors; transform: produce
    raw aggregated vectors, one row per tensor.

    Parameters mirror the pipeline defaults: 25 detectors, alpha=beta=2.
    """

    def __init__(self, n_detectors=25, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA,
                 selection="variance", random_state=0):
        self.n_detectors = n_detectors
        self.alpha = alpha
        self.beta = beta
        self.selection = selection
        self.random_state = random_state

    def fit(self, X, y=None):
        stats = compute_channel_stats(X)
        self.stats_ = stats
        if self.selection == "variance":
            self.detectors_ = select_detectors(stats, self.n_detectors)
        elif self.selection == "random":
            self.detectors_ = select_random_detectors(
                stats.channels, self.n_detectors, self.random_state
            )
        else:
            raise ParamError(f"unknown selection mode {self.selection!r}")
        return self

    def transform(self, X):
        return np.stack(
            [aggregate(t, self.detectors_, self.alpha, self.beta) for t in X]
        )
