"""Slab-wise volume binarization.

Axial illumination gradients shift the gray-level statistics from slice
to slice, so a single global threshold misses dim objects. The volume
is split along z into contiguous slab groups that are smoothed,
histogrammed, and thresholded independently; foreground is everything
strictly above the group threshold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .histmodel import (
    DegenerateHistogram,
    FitFailure,
    Histogram,
    HistogramModel,
    em_fit,
    model_threshold,
    otsu_threshold,
)
from .volume import Volume, gaussian_smooth

__all__ = ["BinarizationConfig", "SlabResult", "slab_ranges", "binarize"]

METHODS = ("otsu", "model_threshold")


@dataclass(frozen=True)
class BinarizationConfig:
    method: str = "otsu"
    sigma_smooth: float = 0.0
    slabs: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown binarization method {self.method!r}")
        if self.sigma_smooth < 0:
            raise ValueError("sigma_smooth must be >= 0")
        if self.slabs < 1:
            raise ValueError("slab count must be >= 1")


@dataclass(frozen=True)
class SlabResult:
    """One slab group's outcome; the z range is half-open [z_lo, z_hi)."""

    z_lo: int
    z_hi: int
    threshold: int
    model: Optional[HistogramModel]

    def to_dict(self) -> dict:
        return {
            "z_lo": self.z_lo,
            "z_hi": self.z_hi,
            "threshold": self.threshold,
            "model": None if self.model is None else self.model.to_dict(),
        }


def slab_ranges(sz: int, m: int) -> List[Tuple[int, int]]:
    """Split ``sz`` slices into ``m`` contiguous near-equal groups; the
    first groups take the remainder slices."""
    if not 1 <= m <= sz:
        raise ValueError(f"slab count must lie in [1, {sz}], got {m}")
    base, rem = divmod(sz, m)
    out = []
    z = 0
    for i in range(m):
        size = base + (1 if i < rem else 0)
        out.append((z, z + size))
        z += size
    return out


def _binarize_slab(v: Volume, z_lo: int, z_hi: int, cfg: BinarizationConfig):
    slab = Volume(v.data[z_lo:z_hi], v.spacing)
    smoothed = gaussian_smooth(slab, cfg.sigma_smooth)
    q = np.rint(smoothed.data).astype(np.int64)
    if q.min() < 0:
        raise ValueError("negative gray levels cannot be binarized")
    hist = Histogram.from_values(q)
    model: Optional[HistogramModel] = None
    if cfg.method == "model_threshold":
        model = em_fit(hist)
        t = model_threshold(model)
    else:
        t = otsu_threshold(hist)
        # downstream probability weights want a model even here
        try:
            model = em_fit(hist)
        except (DegenerateHistogram, FitFailure):
            model = None
    return (q > t).astype(np.uint8), SlabResult(z_lo, z_hi, int(t), model)


def binarize(
    v: Volume, cfg: BinarizationConfig = BinarizationConfig(), threads: int = 1
) -> Tuple[Volume, List[SlabResult]]:
    """Binarize per slab group; returns the 0/1 mask and per-group results.

    Groups write disjoint z ranges, so the result does not depend on
    ``threads``.
    """
    ranges = slab_ranges(v.data.shape[0], cfg.slabs)
    mask = np.empty(v.data.shape, dtype=np.uint8)

    def run(zr):
        return _binarize_slab(v, zr[0], zr[1], cfg)

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, ranges))
    else:
        results = [run(zr) for zr in ranges]
    slabs = []
    for (z_lo, z_hi), (sub, res) in zip(ranges, results):
        mask[z_lo:z_hi] = sub
        slabs.append(res)
    return Volume(mask, v.spacing), slabs
