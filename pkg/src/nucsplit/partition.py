"""Balanced two-way multilevel graph partitioning.

The classic scheme: coarsen by heavy-edge matching until the graph is
small, grow an initial block by BFS from a pseudo-peripheral node, then
refine with pass-based FM local search while projecting back through
the levels. Balance is a hard constraint: neither block may exceed
(1 + imbalance) * ceil(n / 2) nodes, counted in fine-level voxels at
every level via aggregated node weights.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from .graphbuild import ComponentGraph, csr_from_edges
from .volume import Component, Volume, components_from_labels, label_mask, paint_component

__all__ = [
    "PartitionerConfig",
    "Bipartition",
    "bipartition",
    "split_blocks",
    "graph_from_edge_list",
]


@dataclass(frozen=True)
class PartitionerConfig:
    imbalance: float = 0.5
    seed: int = 0
    coarsen_floor: int = 40
    fm_passes: int = 10

    def __post_init__(self):
        if not self.imbalance > 0:
            raise ValueError("imbalance must be > 0")
        if self.coarsen_floor < 2:
            raise ValueError("coarsen_floor must be >= 2")
        if self.fm_passes < 0:
            raise ValueError("fm_passes must be >= 0")


@dataclass(frozen=True)
class Bipartition:
    side: np.ndarray
    cut_weight: float
    block_sizes: Tuple[int, int]

    def __post_init__(self):
        n0, n1 = self.block_sizes
        if n0 <= 0 or n1 <= 0 or n0 + n1 != len(self.side):
            raise ValueError("blocks must be non-empty and cover all nodes")
        if self.cut_weight < 0:
            raise ValueError("cut weight must be >= 0")


class _Level:
    __slots__ = ("indptr", "indices", "weights", "node_w", "rows", "cmap")

    def __init__(self, indptr, indices, weights, node_w):
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.node_w = node_w
        self.rows = np.repeat(np.arange(len(node_w), dtype=np.int64), np.diff(indptr))
        self.cmap = None  # fine -> coarse node map, set when coarsened

    @property
    def n(self) -> int:
        return len(self.node_w)


def _cut_of(lv: _Level, side: np.ndarray) -> float:
    crossing = side[lv.rows] != side[lv.indices]
    return float(lv.weights[crossing].sum() / 2.0)


def _match_level(lv: _Level, cap: int, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """Greedy heavy-edge matching over a seeded random visit order.

    Ties on edge weight break toward the lowest neighbor id. Pairs whose
    combined node weight would exceed ``cap`` are not matched so the
    coarsest level always admits a balanced partition.
    """
    n = lv.n
    ptr = lv.indptr.tolist()
    idx = lv.indices.tolist()
    wts = lv.weights.tolist()
    nw = lv.node_w.tolist()
    mate = [-1] * n
    pairs = 0
    for u in rng.permutation(n).tolist():
        if mate[u] >= 0:
            continue
        wu = nw[u]
        best = -1
        best_w = -1.0
        for j in range(ptr[u], ptr[u + 1]):
            v = idx[j]
            if mate[v] >= 0 or wu + nw[v] > cap:
                continue
            w = wts[j]
            # id-sorted neighbors: ties on weight keep the lowest id
            if w > best_w:
                best_w = w
                best = v
        if best >= 0:
            mate[u] = best
            mate[best] = u
            pairs += 1
    return np.array(mate, dtype=np.int64), pairs


def _coarsen(lv: _Level, mate: np.ndarray) -> _Level:
    n = lv.n
    ids = np.arange(n, dtype=np.int64)
    is_rep = (mate < 0) | (ids < mate)
    cmap = np.empty(n, dtype=np.int64)
    n_coarse = int(is_rep.sum())
    cmap[is_rep] = np.arange(n_coarse, dtype=np.int64)
    cmap[~is_rep] = cmap[mate[~is_rep]]
    lv.cmap = cmap

    half = lv.rows < lv.indices
    eu = cmap[lv.rows[half]]
    ev = cmap[lv.indices[half]]
    ew = lv.weights[half]
    cross = eu != ev
    a = np.minimum(eu[cross], ev[cross])
    b = np.maximum(eu[cross], ev[cross])
    key = a * n_coarse + b
    uniq, inv = np.unique(key, return_inverse=True)
    agg = np.bincount(inv, weights=ew[cross])
    indptr, indices, weights = csr_from_edges(n_coarse, uniq // n_coarse, uniq % n_coarse, agg)
    node_w = np.bincount(cmap, weights=lv.node_w, minlength=n_coarse).astype(np.int64)
    return _Level(indptr, indices, weights, node_w)


def _bfs_farthest(lv: _Level, start: int) -> Tuple[int, int]:
    dist = [-1] * lv.n
    dist[start] = 0
    q = deque([start])
    idx = lv.indices
    ptr = lv.indptr
    far, far_d = start, 0
    while q:
        u = q.popleft()
        for j in range(ptr[u], ptr[u + 1]):
            v = int(idx[j])
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                if dist[v] > far_d:  # id-ordered neighbors keep ties low
                    far, far_d = v, dist[v]
                q.append(v)
    return far, far_d


def _start_candidates(lv: _Level) -> List[int]:
    """Growth starts for the coarsest level.

    Small enough to scan: every node (on near-regular small graphs most
    nodes tie for maximal eccentricity anyway). Larger stalled graphs:
    the two endpoints of the two-sweep pseudo-peripheral heuristic.
    """
    if lv.n <= 64:
        return list(range(lv.n))
    s1, _ = _bfs_farthest(lv, 0)
    s2, _ = _bfs_farthest(lv, s1)
    return list(dict.fromkeys((s2, s1)))


def _grow_initial(lv: _Level, target: int, start: int, policy: int) -> np.ndarray:
    """Greedy frontier growth from ``start`` until the first block holds
    at least ``target`` node weight.

    The next frontier node absorbed is the one minimizing the running
    cut (policy 0) or the one most attached to the region (policy 1),
    ties toward the lowest id; BFS-flavored greedy growth rather than
    FIFO order.
    """
    n = lv.n
    ptr, idx, wts = lv.indptr, lv.indices, lv.weights
    deg_w = np.bincount(lv.rows, weights=wts, minlength=n)
    in_region = np.zeros(n, dtype=bool)
    w_region = np.zeros(n)  # edge weight from each outside node into the region
    side = np.ones(n, dtype=np.uint8)
    nw = lv.node_w.tolist()

    heap: List[Tuple[float, int]] = []
    w0 = 0
    taken = 0
    next_seed = 0

    def priority(v: int) -> float:
        if policy == 0:
            return float(deg_w[v] - 2.0 * w_region[v])
        return float(-w_region[v])

    def absorb(u: int):
        nonlocal w0, taken
        in_region[u] = True
        side[u] = 0
        w0 += nw[u]
        taken += 1
        for j in range(ptr[u], ptr[u + 1]):
            v = int(idx[j])
            if not in_region[v]:
                w_region[v] += wts[j]
                heapq.heappush(heap, (priority(v), v))

    absorb(start)
    while w0 < target and taken < n - 1:
        u = -1
        while heap:
            loss, cand = heapq.heappop(heap)
            if not in_region[cand] and loss == priority(cand):
                u = cand
                break
        if u < 0:
            # disconnected graph: restart from the lowest untouched id
            while in_region[next_seed]:
                next_seed += 1
            u = next_seed
        absorb(u)
    return side


def _fm_pass(lv, side, w0, total_w, max_side_w, stall_limit, cut):
    n = lv.n
    same = side[lv.rows] == side[lv.indices]
    ext = np.bincount(lv.rows[~same], weights=lv.weights[~same], minlength=n)
    intw = np.bincount(lv.rows[same], weights=lv.weights[same], minlength=n)
    gain = ext - intw
    moved = np.zeros(n, dtype=bool)
    heap = [(float(-gain[u]), int(u)) for u in np.flatnonzero(ext > 0)]
    heapq.heapify(heap)
    node_w = lv.node_w
    ptr, idx, wts = lv.indptr, lv.indices, lv.weights

    hist: List[int] = []
    cur = cut
    best_cut = cut
    best_len = 0
    w0_hist = [w0]
    fruitless = 0
    while heap and fruitless < stall_limit:
        neg_g, u = heapq.heappop(heap)
        if moved[u] or -neg_g != gain[u] or ext[u] <= 0:
            continue  # stale heap entry or no longer a boundary node
        wu = int(node_w[u])
        new_w0 = w0 - wu if side[u] == 0 else w0 + wu
        if new_w0 < 1 or total_w - new_w0 < 1 or max(new_w0, total_w - new_w0) > max_side_w:
            continue
        side[u] = 1 - side[u]
        moved[u] = True
        w0 = new_w0
        cur -= gain[u]
        hist.append(u)
        w0_hist.append(w0)
        if cur < best_cut - 1e-12:
            best_cut = cur
            best_len = len(hist)
            fruitless = 0
        else:
            fruitless += 1
        for j in range(ptr[u], ptr[u + 1]):
            v = int(idx[j])
            if moved[v]:
                continue
            w = wts[j]
            if side[v] == side[u]:
                ext[v] -= w
                intw[v] += w
            else:
                ext[v] += w
                intw[v] -= w
            gain[v] = ext[v] - intw[v]
            if ext[v] > 0:
                heapq.heappush(heap, (float(-gain[v]), v))
        ext[u], intw[u] = intw[u], ext[u]
        gain[u] = -gain[u]

    for u in hist[best_len:][::-1]:
        side[u] = 1 - side[u]
    return best_cut, w0_hist[best_len], best_len > 0


def _fm_refine(lv: _Level, side: np.ndarray, cfg: PartitionerConfig, total_w: int, max_side_w: int):
    w0 = int(lv.node_w[side == 0].sum())
    stall_limit = max(200, lv.n // 50)
    for _ in range(cfg.fm_passes):
        cut = _cut_of(lv, side)
        new_cut, w0, changed = _fm_pass(lv, side, w0, total_w, max_side_w, stall_limit, cut)
        if not changed or new_cut >= cut - 1e-12:
            break


def bipartition(g: ComponentGraph, cfg: PartitionerConfig = PartitionerConfig()) -> Bipartition:
    n = g.n_nodes
    if n < 2:
        raise ValueError("cannot bipartition a graph with fewer than 2 nodes")
    rng = np.random.default_rng(cfg.seed)

    base = _Level(
        np.asarray(g.indptr, dtype=np.int64),
        np.asarray(g.indices, dtype=np.int64),
        np.asarray(g.weights, dtype=np.float64),
        np.ones(n, dtype=np.int64),
    )
    ceil_half = (n + 1) // 2
    max_side_w = int(math.floor((1.0 + cfg.imbalance) * ceil_half + 1e-9))
    cap = max(2, int(cfg.imbalance * ceil_half))

    levels = [base]
    while levels[-1].n > max(cfg.coarsen_floor, 2):
        lv = levels[-1]
        mate, pairs = _match_level(lv, cap, rng)
        if pairs == 0 or lv.n - pairs > 0.95 * lv.n:
            break  # matching stalled
        levels.append(_coarsen(lv, mate))

    coarsest = levels[-1]
    side = None
    best_cut = math.inf
    for start in _start_candidates(coarsest):
        for policy in (0, 1):
            cand = _grow_initial(coarsest, ceil_half, start, policy)
            _fm_refine(coarsest, cand, cfg, n, max_side_w)
            cut = _cut_of(coarsest, cand)
            if cut < best_cut - 1e-12:
                side, best_cut = cand, cut
    for lv in reversed(levels[:-1]):
        side = side[lv.cmap]
        _fm_refine(lv, side, cfg, n, max_side_w)

    n0 = int((side == 0).sum())
    n1 = n - n0
    if max(n0, n1) > max_side_w:
        raise RuntimeError("partitioner produced an unbalanced result")
    return Bipartition(side=side.astype(np.uint8), cut_weight=_cut_of(base, side), block_sizes=(n0, n1))


def split_blocks(c: Component, b: Bipartition) -> List[Component]:
    """Decompose the two blocks into 6-connected components.

    Returned components are ordered by their first voxel in scan order
    and renumbered 1..k; their union is exactly the input component.
    """
    if len(b.side) != len(c.coords):
        raise ValueError("bipartition does not cover the component")
    found = []
    for s in (0, 1):
        sub = c.coords[b.side == s]
        if len(sub) == 0:
            continue
        box, origin = paint_component(Component(id=1, coords=sub))
        labels, n_lab = label_mask(Volume(box.astype(np.uint8)), 6)
        for comp in components_from_labels(labels, n_lab):
            found.append(comp.coords + origin)
    found.sort(key=lambda a: (int(a[0, 2]), int(a[0, 1]), int(a[0, 0])))
    return [Component(id=i + 1, coords=coords) for i, coords in enumerate(found)]


def graph_from_edge_list(n_nodes: int, edges: Iterable[Tuple[int, int, float]]) -> ComponentGraph:
    """Abstract weighted graph for oracle tests; duplicate pairs are summed."""
    eu, ev, ew = [], [], []
    for u, v, w in edges:
        if not 0 <= u < n_nodes or not 0 <= v < n_nodes or u == v:
            raise ValueError(f"bad edge ({u}, {v})")
        if w < 0:
            raise ValueError("edge weights must be >= 0")
        eu.append(min(u, v))
        ev.append(max(u, v))
        ew.append(float(w))
    if eu:
        key = np.array(eu, dtype=np.int64) * n_nodes + np.array(ev, dtype=np.int64)
        uniq, inv = np.unique(key, return_inverse=True)
        agg = np.bincount(inv, weights=np.array(ew))
        indptr, indices, weights = csr_from_edges(n_nodes, uniq // n_nodes, uniq % n_nodes, agg)
    else:
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        indices = np.empty(0, dtype=np.int32)
        weights = np.empty(0, dtype=np.float64)
    coords = np.stack(
        [np.arange(n_nodes, dtype=np.int32), np.zeros(n_nodes, np.int32), np.zeros(n_nodes, np.int32)],
        axis=1,
    )
    return ComponentGraph(coords, indptr, indices, weights)
