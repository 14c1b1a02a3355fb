"""Label-map comparison against ground truth.

Matching is by plurality overlap, run in both directions: each truth
nucleus maps to the predicted label (possibly background) covering most
of its voxels, and each predicted object maps back the same way. Ties
go to the smaller label id so reports are reproducible. From the two
maps we count missed and added objects and the excess fan-in that shows
up as merges and splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .volume import Volume

__all__ = ["EvalReport", "evaluate"]


@dataclass(frozen=True)
class EvalReport:
    gt_count: int
    predicted_count: int
    missed: int
    added: int
    merged: int
    split: int
    missed_pct: float = field(default=0.0)
    added_pct: float = field(default=0.0)
    merged_pct: float = field(default=0.0)
    split_pct: float = field(default=0.0)

    def to_dict(self) -> Dict:
        return {
            "gt_count": self.gt_count,
            "predicted_count": self.predicted_count,
            "missed": self.missed,
            "added": self.added,
            "merged": self.merged,
            "split": self.split,
            "missed_pct": self.missed_pct,
            "added_pct": self.added_pct,
            "merged_pct": self.merged_pct,
            "split_pct": self.split_pct,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def format_table(self) -> str:
        rows = [
            ("ground truth", self.gt_count, ""),
            ("predicted", self.predicted_count, ""),
            ("missed", self.missed, f"{self.missed_pct:.1f}%"),
            ("added", self.added, f"{self.added_pct:.1f}%"),
            ("merged", self.merged, f"{self.merged_pct:.1f}%"),
            ("split", self.split, f"{self.split_pct:.1f}%"),
        ]
        width = max(len(name) for name, _, _ in rows)
        lines = [f"{name:<{width}}  {count:>6} {pct:>7}".rstrip() for name, count, pct in rows]
        return "\n".join(lines)


def _plurality(keys: np.ndarray, partners: np.ndarray, counts: np.ndarray) -> Dict[int, int]:
    """partner with the largest count per key; ties -> smaller partner id."""
    # sort so the winner is the first row of each key group
    order = np.lexsort((partners, -counts, keys))
    k = keys[order]
    first = np.ones(len(k), dtype=bool)
    first[1:] = k[1:] != k[:-1]
    return dict(zip(k[first].tolist(), partners[order][first].tolist()))


def evaluate(truth: Volume, predicted: Volume) -> EvalReport:
    if truth.data.shape != predicted.data.shape:
        raise ValueError(
            f"shape mismatch: truth {truth.data.shape} vs predicted {predicted.data.shape}"
        )
    t = truth.data.ravel().astype(np.int64)
    p = predicted.data.ravel().astype(np.int64)

    pairs, counts = np.unique(np.stack([t, p]), axis=1, return_counts=True)
    tk, pk = pairs[0], pairs[1]

    gt_labels = np.unique(tk[tk > 0])
    pred_labels = np.unique(pk[pk > 0])
    gt_count = int(gt_labels.size)
    predicted_count = int(pred_labels.size)

    fwd_rows = tk > 0  # truth nucleus -> predicted label (background allowed)
    fwd = _plurality(tk[fwd_rows], pk[fwd_rows], counts[fwd_rows])
    back_rows = pk > 0
    back = _plurality(pk[back_rows], tk[back_rows], counts[back_rows])

    missed = sum(1 for g in gt_labels.tolist() if fwd[g] == 0)
    added = sum(1 for o in pred_labels.tolist() if back[o] == 0)

    fan_in: Dict[int, int] = {}
    for g in gt_labels.tolist():
        if fwd[g] != 0:
            fan_in[fwd[g]] = fan_in.get(fwd[g], 0) + 1
    merged = sum(c - 1 for c in fan_in.values() if c > 1)

    fan_out: Dict[int, int] = {}
    for o in pred_labels.tolist():
        if back[o] != 0:
            fan_out[back[o]] = fan_out.get(back[o], 0) + 1
    split = sum(c - 1 for c in fan_out.values() if c > 1)

    def pct(count: int) -> float:
        return 100.0 * count / gt_count if gt_count else 0.0

    return EvalReport(
        gt_count=gt_count,
        predicted_count=predicted_count,
        missed=missed,
        added=added,
        merged=merged,
        split=split,
        missed_pct=pct(missed),
        added_pct=pct(added),
        merged_pct=pct(merged),
        split_pct=pct(split),
    )
