"""Grid graphs over foreground components.

Each voxel of a component becomes a node; 6-adjacent voxel pairs inside
the component become undirected weighted edges. Three base weight
schemes are supported (intensity gradient, background probability,
constant), and every weight is divided by the physical distance between
the voxel centers so cuts read the same in any orientation under
anisotropic spacing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Optional, Tuple

import numpy as np

from .histmodel import HistogramModel, background_posterior
from .volume import Component, Volume

__all__ = ["EdgeWeightConfig", "ComponentGraph", "build_graph", "csr_from_edges"]

SCHEMES = ("grad", "prob", "const")


@dataclass(frozen=True)
class EdgeWeightConfig:
    scheme: str = "const"
    sigma_grad: float = 15.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown edge weight scheme {self.scheme!r}")
        if not self.sigma_grad > 0:
            raise ValueError("sigma_grad must be > 0")


class ComponentGraph:
    """Compressed sparse adjacency over scan-ordered component voxels.

    Node i corresponds to node_coords[i]; indptr/indices/weights hold
    both directions of every undirected edge.
    """

    __slots__ = ("node_coords", "indptr", "indices", "weights", "edge_count")

    def __init__(self, node_coords, indptr, indices, weights):
        self.node_coords = node_coords
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.edge_count = len(indices) // 2

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    def neighbors(self, u: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once, as (u, v, w) with u < v."""
        rows = np.repeat(np.arange(self.n_nodes, dtype=np.int64), np.diff(self.indptr))
        keep = rows < self.indices
        return rows[keep], self.indices[keep].astype(np.int64), self.weights[keep]

    def cut_weight(self, side: np.ndarray) -> float:
        rows = np.repeat(np.arange(self.n_nodes, dtype=np.int64), np.diff(self.indptr))
        crossing = side[rows] != side[self.indices]
        # both directions of a crossing edge match, so halve the sum
        return float(self.weights[crossing].sum() / 2.0)

    def write_edges(self, fh: IO[str]) -> None:
        for u, v, w in zip(*self.edge_arrays()):
            fh.write(f"{u} {v} {float(w)!r}\n")


def csr_from_edges(n_nodes: int, eu, ev, ew) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetric CSR adjacency from each undirected edge listed once.

    Neighbor lists come out sorted by node id.
    """
    rows = np.concatenate([eu, ev]).astype(np.int64)
    cols = np.concatenate([ev, eu]).astype(np.int64)
    wts = np.concatenate([ew, ew]).astype(np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, wts = rows[order], cols[order], wts[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, cols.astype(np.int32), wts


def _posteriors(values: np.ndarray, model: HistogramModel) -> np.ndarray:
    # posterior model is over integer gray bins; snap and clip into range
    bins = np.rint(values).astype(np.int64)
    hi = model.n_levels - 1 if model.n_levels is not None else None
    bins = np.clip(bins, 0, hi)
    return background_posterior(model, bins)


def build_graph(
    c: Component,
    v: Volume,
    model: Optional[HistogramModel] = None,
    cfg: EdgeWeightConfig = EdgeWeightConfig(),
) -> ComponentGraph:
    if cfg.scheme == "prob" and model is None:
        raise ValueError("prob edge weights need a fitted histogram model")

    coords = c.coords
    lo, hi = c.bounding_box()
    shape = hi - lo + 1
    grid = np.full((shape[2], shape[1], shape[0]), -1, dtype=np.int64)
    rel = coords - lo
    grid[rel[:, 2], rel[:, 1], rel[:, 0]] = np.arange(len(coords), dtype=np.int64)

    if cfg.scheme == "const":
        node_vals = None
    else:
        node_vals = v.data[coords[:, 2], coords[:, 1], coords[:, 0]].astype(np.float64)
    if cfg.scheme == "prob":
        node_post = _posteriors(node_vals, model)

    us, vs, ws = [], [], []
    for axis, step in ((0, v.spacing[0]), (1, v.spacing[1]), (2, v.spacing[2])):
        grid_axis = 2 - axis  # grid is (z, y, x)
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[grid_axis] = slice(None, -1)
        b[grid_axis] = slice(1, None)
        ga, gb = grid[tuple(a)], grid[tuple(b)]
        present = (ga >= 0) & (gb >= 0)
        ua, va = ga[present], gb[present]
        if cfg.scheme == "const":
            base = np.ones(len(ua))
        elif cfg.scheme == "grad":
            diff = node_vals[ua] - node_vals[va]
            base = np.exp(-(diff * diff) / (2.0 * cfg.sigma_grad**2))
        else:
            base = -np.log(np.minimum(node_post[ua], node_post[va]))
        us.append(ua)
        vs.append(va)
        ws.append(base / step)

    eu = np.concatenate(us)
    ev = np.concatenate(vs)
    ew = np.concatenate(ws)
    indptr, indices, weights = csr_from_edges(len(coords), eu, ev, ew)
    return ComponentGraph(coords, indptr, indices, weights)
