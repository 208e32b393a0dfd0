"""Semantic-based aggregation of convolutional feature maps.

Pipeline: select high-variance detector channels, weight-pool features with
their activation maps, concatenate, L2-normalize, compress with PCA
whitening, then retrieve by L2 distance (optionally with query expansion) or
classify with the rank-weighted multi-neighbor rule.
"""

from .aggregation import SbaAggregator, aggregate, compute_weights, pool_weighted
from .classification import (
    MultiNeighborClassifier,
    NeighborList,
    ScoreTable,
    evaluate_accuracy,
    knn,
    mn_classify,
)
from .detectors import (
    ChannelStats,
    DetectorSelector,
    DetectorSet,
    compute_channel_stats,
    select_detectors,
    select_random_detectors,
    sum_pool,
)
from .exceptions import (
    CorruptError,
    DuplicateError,
    EmptyDatasetError,
    FormatError,
    IncompleteError,
    ParamError,
    RankError,
    SbaError,
    ShapeError,
    UndefinedError,
)
from .io import (
    DatasetManifest,
    FeatureTensor,
    ManifestRecord,
    read_manifest,
    read_tensor,
    read_vector_batch,
    write_manifest,
    write_tensor,
    write_vector_batch,
)
from .postprocess import (
    PcaWhitening,
    PcaWhitenModel,
    apply_pca_whiten,
    fit_pca_whiten,
    l2_normalize,
)
from .retrieval import (
    RankedList,
    average_precision,
    distance,
    mean_average_precision,
    query_expansion,
    rank,
    recall_at_n,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelStats",
    "CorruptError",
    "DatasetManifest",
    "DetectorSelector",
    "DetectorSet",
    "DuplicateError",
    "EmptyDatasetError",
    "FeatureTensor",
    "FormatError",
    "IncompleteError",
    "ManifestRecord",
    "MultiNeighborClassifier",
    "NeighborList",
    "ParamError",
    "PcaWhitenModel",
    "PcaWhitening",
    "RankError",
    "RankedList",
    "SbaAggregator",
    "SbaError",
    "ScoreTable",
    "ShapeError",
    "UndefinedError",
    "aggregate",
    "average_precision",
    "compute_channel_stats",
    "compute_weights",
    "distance",
    "evaluate_accuracy",
    "fit_pca_whiten",
    "apply_pca_whiten",
    "knn",
    "l2_normalize",
    "mean_average_precision",
    "mn_classify",
    "pool_weighted",
    "query_expansion",
    "rank",
    "read_manifest",
    "read_tensor",
    "read_vector_batch",
    "recall_at_n",
    "select_detectors",
    "select_random_detectors",
    "sum_pool",
    "write_manifest",
    "write_tensor",
    "write_vector_batch",
]
