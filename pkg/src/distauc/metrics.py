"""Rank-based AUC, model evaluation, and per-run metric records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import primal_objective, split_primal
from .scorer import ScorerSpec, score_batch

__all__ = ["RunMetrics", "auc", "evaluate"]


@dataclass
class RunMetrics:
    """One evaluation snapshot along a run; cumulative fields never decrease."""

    stage: int
    cumulative_iterations: int
    cumulative_rounds: int
    scalars_moved: int
    test_auc: float
    empirical_phi: float | None = None
    wall_seconds: float = 0.0

    def to_record(self, config_hash: str | None = None, include_timing: bool = False) -> dict:
        # wall time is excluded by default so identical (config, seed) runs
        # produce byte-identical metric streams
        rec = {
            "type": "metrics",
            "stage": self.stage,
            "cumulative_iterations": self.cumulative_iterations,
            "cumulative_rounds": self.cumulative_rounds,
            "scalars_moved": self.scalars_moved,
            "test_auc": self.test_auc,
            "empirical_phi": self.empirical_phi,
        }
        if include_timing:
            rec["wall_seconds"] = self.wall_seconds
        if config_hash is not None:
            rec["config_hash"] = config_hash
        return rec


def auc(scores, labels) -> float:
    """Probability that a positive outscores a negative, ties counted half.

    Computed in O(n log n) from midranks, which matches the brute-force
    count over all positive-negative pairs exactly.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"scores shape {s.shape} and labels shape {y.shape} must be equal 1-d")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int((y == 1).sum())
    n_neg = int((y == -1).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    if n_pos + n_neg != y.shape[0]:
        raise ValueError("labels must be +1/-1")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    new_group = np.r_[True, s_sorted[1:] != s_sorted[:-1]]
    group = np.cumsum(new_group) - 1
    counts = np.bincount(group)
    first_rank = np.cumsum(counts) - counts + 1  # 1-based rank of each tie group start
    mid = first_rank + (counts - 1) / 2.0
    ranks = np.empty_like(s)
    ranks[order] = mid[group]
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def evaluate(spec: ScorerSpec, v: np.ndarray, test_ds, phi_ds=None) -> dict:
    """Score a test set with the current model; optionally track the training objective."""
    w, _, _ = split_primal(v)
    scores = score_batch(spec, w, test_ds.X)
    out = {"test_auc": auc(scores, test_ds.y)}
    if phi_ds is not None:
        out["empirical_phi"] = primal_objective(spec, v, phi_ds)
    return out
