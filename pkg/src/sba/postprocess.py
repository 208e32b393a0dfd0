"""L2 normalization and PCA compression with whitening.

The whitening model stores the training mean, the top-M principal directions
(rows), and singular values scaled so the transformed training batch has unit
variance per output dimension.  A final L2 re-normalization is applied by
default so compressed vectors live on the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ParamError, RankError, ShapeError

RANK_EPS = 1e-10


def l2_normalize(vectors: np.ndarray) -> np.ndarray:
    """Scale rows (or a single vector) to unit Euclidean norm.

    Zero vectors are passed through unchanged.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim == 1:
        norm = np.linalg.norm(v)
        return v if norm == 0.0 else v / norm
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return np.divide(v, norms, out=v.copy(), where=norms > 0)


@dataclass
class PcaWhitenModel:
    """Fitted compression model: mean, principal directions, scaled spectrum."""

    mean: np.ndarray
    projection: np.ndarray
    singular_values: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.projection.shape[0]


def fit_pca_whiten(vectors: np.ndarray, m: int) -> PcaWhitenModel:
    """Learn mean, top-m principal directions and whitening scales.

    The stored singular values are the centered-data singular values divided
    by sqrt(batch - 1), so dividing projections by them gives unit empirical
    variance on the training batch.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a (batch, dim) matrix, got shape {x.shape}")
    n, d = x.shape
    if m < 1 or m > d:
        raise ParamError(f"m={m} outside valid range [1, {d}]")
    if n < m + 1:
        raise ParamError(f"batch of {n} too small for m={m} (need >= m + 1)")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[m - 1] <= RANK_EPS:
        raise RankError(
            f"singular value {m} is {s[m - 1]:.3e} <= {RANK_EPS}; "
            "the data has lower rank, lower m"
        )
    projection = vt[:m].copy()
    # deterministic sign: largest-magnitude entry of each direction positive
    for row in projection:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaWhitenModel(
        mean=mean,
        projection=projection,
        singular_values=s[:m] / np.sqrt(n - 1),
    )


def apply_pca_whiten(vectors: np.ndarray, model: PcaWhitenModel,
                     final_norm: bool = True) -> np.ndarray:
    """Project, whiten, and (by default) re-normalize to unit length."""
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ShapeError(
            f"vector dim {x.shape[1]} does not match model input_dim "
            f"{model.input_dim}"
        )
    y = (x - model.mean) @ model.projection.T / model.singular_values
    if final_norm:
        y = l2_normalize(y)
    return y[0] if single else y


class PcaWhitening(BaseEstimator, TransformerMixin):
    """sklearn-style wrapper around fit_pca_whiten / apply_pca_whiten.

    transform L2-normalizes its input rows first, matching the pipeline
    contract that whitening consumes normalized vectors.
    """

    def __init__(self, n_components=4096, final_norm=True):
        self.n_components = n_components
        self.final_norm = final_norm

    def fit(self, X, y=None):
        self.model_ = fit_pca_whiten(l2_normalize(np.asarray(X)), self.n_components)
        return self

    def transform(self, X):
        return apply_pca_whiten(
            l2_normalize(np.asarray(X)), self.model_, self.final_norm
        )
