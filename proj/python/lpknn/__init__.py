"""Label propagation on kNN graphs for interactive image segmentation."""

from ._core import (
    FEATURE_NAMES,
    DecodeError,
    DimensionError,
    ParamError,
    build_knn_graph,
    error_rate,
    extract_features,
    propagate,
    rgb_to_hsv,
    segment,
)

__all__ = [
    "FEATURE_NAMES",
    "DecodeError",
    "DimensionError",
    "ParamError",
    "build_knn_graph",
    "error_rate",
    "extract_features",
    "propagate",
    "rgb_to_hsv",
    "segment",
]
