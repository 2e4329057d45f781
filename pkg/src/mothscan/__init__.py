"""Detection and evaluation toolkit for light-based insect camera traps.

The package covers the full still-image workflow of an automated moth
scanner: a background-free blob detector built from classic image
operations (high-pass filtering, binarization, morphology, connected
components, recursive splitting and non-maximum suppression), saliency
driven part estimation, geometric-mean fusion of classifier outputs,
mAP-style detection evaluation, annotation plumbing with night-based
splits, and a command-line interface with an unattended watch mode for
edge deployments.
"""

from .datasets import (
    AnnotationFile,
    BoxRecord,
    ImageRecord,
    SplitSpec,
    annotations_to_doc,
    load_annotations,
    load_predictions,
    parse_annotations,
    parse_predictions,
    predictions_to_doc,
    resolve_path,
    save_annotations,
    split,
    stats,
)
from .detector import (
    DetectorConfig,
    StructuringElement,
    close_mask,
    connected_components,
    detect,
    dilate,
    erode,
    high_pass,
    low_pass,
    nms,
    open_mask,
    recursive_split,
    threshold_global_mean,
    threshold_local_gaussian,
    threshold_otsu,
)
from .errors import DecodeError, InputError
from .evaluation import (
    EvalReport,
    GroundTruthImage,
    average_precision,
    map_at,
    match_greedy,
    pr_points,
)
from .fusion import ProbVector, cross_entropy, final_loss, fuse_geometric
from .imgio import read_image, write_image
from .parts import (
    FeatureWeights,
    GradientMapSet,
    PartConfig,
    PartEstimate,
    SaliencyMap,
    estimate_parts,
    estimate_parts_detailed,
    find_peaks,
    load_feature_weights,
    load_gradient_maps,
    lloyd_kmeans,
    saliency_from_gradmaps,
    save_gradient_maps,
    select_feature_dims,
    sparsify_saliency,
)
from .raster import (
    BinaryImage,
    Box,
    ColorImage,
    Detection,
    GrayImage,
    crop,
    iou,
    to_grayscale,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationFile",
    "BinaryImage",
    "Box",
    "BoxRecord",
    "ColorImage",
    "DecodeError",
    "Detection",
    "DetectorConfig",
    "EvalReport",
    "FeatureWeights",
    "GradientMapSet",
    "GrayImage",
    "GroundTruthImage",
    "ImageRecord",
    "InputError",
    "PartConfig",
    "PartEstimate",
    "ProbVector",
    "SaliencyMap",
    "SplitSpec",
    "StructuringElement",
    "annotations_to_doc",
    "average_precision",
    "close_mask",
    "connected_components",
    "crop",
    "cross_entropy",
    "detect",
    "dilate",
    "erode",
    "estimate_parts",
    "estimate_parts_detailed",
    "final_loss",
    "find_peaks",
    "fuse_geometric",
    "high_pass",
    "iou",
    "lloyd_kmeans",
    "load_annotations",
    "load_feature_weights",
    "load_gradient_maps",
    "load_predictions",
    "low_pass",
    "map_at",
    "match_greedy",
    "nms",
    "open_mask",
    "parse_annotations",
    "parse_predictions",
    "pr_points",
    "predictions_to_doc",
    "read_image",
    "recursive_split",
    "resolve_path",
    "saliency_from_gradmaps",
    "save_annotations",
    "save_gradient_maps",
    "select_feature_dims",
    "sparsify_saliency",
    "split",
    "stats",
    "threshold_global_mean",
    "threshold_local_gaussian",
    "threshold_otsu",
    "to_grayscale",
    "write_image",
]
