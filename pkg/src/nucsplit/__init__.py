"""Nuclei segmentation in 3D volumes: histogram-model binarization plus
recursive balanced graph bipartitioning of the foreground."""

from .binarize import BinarizationConfig, SlabResult, binarize
from .evaluate import EvalReport, evaluate
from .geometry import CutMetricWeights, cut_metric_weights, sphericity, surface_area, volume_of
from .graphbuild import ComponentGraph, EdgeWeightConfig, build_graph
from .histmodel import (
    DegenerateHistogram,
    FitFailure,
    Histogram,
    HistogramModel,
    background_posterior,
    em_fit,
    model_threshold,
    otsu_threshold,
)
from .nucmodel import Decision, NucleusModelParams, ScoreContext, component_score, score_function
from .partition import Bipartition, PartitionerConfig, bipartition, split_blocks
from .splitter import SegmentationResult, SplitContext, recursive_split, segment
from .synthgen import PlacementError, SceneConfig, generate
from .volume import (
    Component,
    Volume,
    connected_components,
    gaussian_smooth,
    read_rvol,
    write_rvol,
)

__version__ = "0.1.0"

__all__ = [
    "BinarizationConfig",
    "SlabResult",
    "binarize",
    "EvalReport",
    "evaluate",
    "CutMetricWeights",
    "cut_metric_weights",
    "sphericity",
    "surface_area",
    "volume_of",
    "ComponentGraph",
    "EdgeWeightConfig",
    "build_graph",
    "DegenerateHistogram",
    "FitFailure",
    "Histogram",
    "HistogramModel",
    "background_posterior",
    "em_fit",
    "model_threshold",
    "otsu_threshold",
    "Decision",
    "NucleusModelParams",
    "ScoreContext",
    "component_score",
    "score_function",
    "Bipartition",
    "PartitionerConfig",
    "bipartition",
    "split_blocks",
    "SegmentationResult",
    "SplitContext",
    "recursive_split",
    "segment",
    "PlacementError",
    "SceneConfig",
    "generate",
    "Component",
    "Volume",
    "connected_components",
    "gaussian_smooth",
    "read_rvol",
    "write_rvol",
]
