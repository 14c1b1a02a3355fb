"""Recursive component splitting and the end-to-end segmentation driver.

A foreground component is scored against the nucleus model. Components
that look like single nuclei are kept as they are; oversized ones are
bipartitioned and their connected subcomponents are scored against the
parent's score, recursing depth-first. When none of the children of a
split survive, the parent itself is kept as long as its own score is
positive, so a mediocre parent still beats an empty segmentation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .binarize import BinarizationConfig, SlabResult, binarize
from .geometry import CutMetricWeights, cut_metric_weights, sphericity, volume_of
from .graphbuild import EdgeWeightConfig, build_graph
from .histmodel import HistogramModel
from .nucmodel import Decision, NucleusModelParams, ScoreContext, score_function
from .partition import PartitionerConfig, bipartition, split_blocks
from .volume import Component, Volume, connected_components, gaussian_smooth

__all__ = ["SplitContext", "SegmentationResult", "recursive_split", "segment"]


@dataclass(frozen=True)
class SplitContext:
    """Everything the recursion needs besides the component itself."""

    volume: Volume  # intensity the edge weights read (smoothed if binarization smoothed)
    score_ctx: ScoreContext
    edge_cfg: EdgeWeightConfig = EdgeWeightConfig()
    part_cfg: PartitionerConfig = PartitionerConfig()
    model: Optional[HistogramModel] = None


@dataclass(frozen=True)
class SegmentationResult:
    labels: Volume  # u32, 0 = background
    objects: List[Dict] = field(default_factory=list)

    def object_report(self) -> str:
        """One JSON object per line, one line per labelled nucleus."""
        return "\n".join(json.dumps(o) for o in self.objects)


def _depth_bound(n_voxels: int, imbalance: float) -> int:
    # balance guarantees every block is at most (1+eps)/2 of its parent,
    # so the recursion cannot go deeper than log_{2/(1+eps)}(n) plus a
    # small-n allowance
    shrink = 2.0 / (1.0 + imbalance)
    return int(math.ceil(math.log(max(n_voxels, 2)) / math.log(shrink))) + 3


def _process(c: Component, s_parent: float, ctx: SplitContext, depth: int, max_depth: int):
    if depth > max_depth:
        raise RuntimeError(
            f"split recursion reached depth {depth}; balanced partitions should "
            f"bottom out by {max_depth}"
        )
    scored = score_function(c, s_parent, ctx.score_ctx)
    if scored.decision is Decision.DISCARD:
        return []
    if scored.decision is Decision.KEEP:
        return [(c, scored.score)]

    # repartition; single voxels cannot be cut and fall back to leaf scoring
    kept = []
    if len(c) >= 2:
        graph = build_graph(c, ctx.volume, model=ctx.model, cfg=ctx.edge_cfg)
        blocks = split_blocks(c, bipartition(graph, ctx.part_cfg))
        if not (len(blocks) == 1 and len(blocks[0]) == len(c)):
            for child in blocks:
                kept.extend(_process(child, scored.score, ctx, depth + 1, max_depth))
    if kept:
        return kept
    return [(c, scored.score)] if scored.score > 0 else []


def recursive_split(c: Component, ctx: SplitContext) -> List[Tuple[Component, float]]:
    """Depth-first split of one foreground component.

    Returns the kept leaf components with their scores. The top of the
    recursion has no parent, so the parent score starts at zero and the
    first decision is driven purely by the component's own volume and
    shape.
    """
    max_depth = _depth_bound(len(c), ctx.part_cfg.imbalance)
    return _process(c, 0.0, ctx, 0, max_depth)


def _model_for(c: Component, slabs: List[SlabResult]) -> Optional[HistogramModel]:
    """Histogram model for a component: its first voxel's slab, or the
    nearest slab that managed a fit."""
    z0 = int(c.coords[0, 2])
    best = None
    best_d = None
    for s in slabs:
        if s.model is None:
            continue
        if s.z_lo <= z0 < s.z_hi:
            return s.model
        d = min(abs(z0 - s.z_lo), abs(z0 - (s.z_hi - 1)))
        if best_d is None or d < best_d:
            best, best_d = s.model, d
    return best


def segment(
    v: Volume,
    params: NucleusModelParams,
    bin_cfg: BinarizationConfig = BinarizationConfig(),
    edge_cfg: EdgeWeightConfig = EdgeWeightConfig(),
    part_cfg: PartitionerConfig = PartitionerConfig(),
    threads: int = 1,
) -> SegmentationResult:
    """Binarize, split every foreground component, and assemble labels."""
    mask, slabs = binarize(v, bin_cfg, threads=threads)
    comps = connected_components(mask, connectivity=6)

    weights = cut_metric_weights(v.spacing)
    score_ctx = ScoreContext(spacing=v.spacing, weights=weights, params=params)
    guide = gaussian_smooth(v, bin_cfg.sigma_smooth)

    kept: List[Tuple[Component, float]] = []
    for comp in comps:
        model = _model_for(comp, slabs)
        if edge_cfg.scheme == "prob" and model is None:
            raise ValueError("probability edge weights need a fitted histogram model")
        ctx = SplitContext(
            volume=guide,
            score_ctx=score_ctx,
            edge_cfg=edge_cfg,
            part_cfg=part_cfg,
            model=model,
        )
        kept.extend(recursive_split(comp, ctx))

    # label ids follow the scan order of each kept component's first voxel
    size = (v.data.shape[2], v.data.shape[1], v.data.shape[0])
    kept.sort(key=lambda item: item[0].first_flat_index(size))

    labels = np.zeros(v.data.shape, dtype=np.uint32)
    objects = []
    for new_id, (comp, score) in enumerate(kept, start=1):
        x, y, z = comp.coords[:, 0], comp.coords[:, 1], comp.coords[:, 2]
        labels[z, y, x] = new_id
        objects.append(
            {
                "id": new_id,
                "voxel_count": len(comp),
                "volume": volume_of(comp, v.spacing),
                "sphericity": sphericity(comp, weights, v.spacing),
                "score": score,
            }
        )
    return SegmentationResult(labels=Volume(labels, v.spacing), objects=objects)
