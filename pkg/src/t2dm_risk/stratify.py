"""Quantile risk groups and per-group positive predictive value."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, StratificationError

GROUPS = ("Low", "Medium", "High")


@dataclass(frozen=True)
class GroupStats:
    group: str
    count: int
    positives: int
    ppv: Optional[float]


@dataclass(frozen=True)
class RiskGroups:
    t_low: float
    t_high: float
    assignment: np.ndarray  # one of GROUPS per row

    def counts(self) -> dict[str, int]:
        return {g: int(np.sum(self.assignment == g)) for g in GROUPS}


def assign_risk_groups(scores, quantiles=(0.2, 0.8)) -> RiskGroups:
    """Low below the lower quantile, High at or above the upper one, Medium between."""
    s = np.asarray(scores, dtype=float).ravel()
    if s.size < 5:
        raise StratificationError(f"need at least 5 scores, got {s.size}")
    t_low, t_high = (float(t) for t in np.quantile(s, quantiles))
    assignment = np.full(s.size, "Medium", dtype=object)
    assignment[s < t_low] = "Low"
    assignment[s >= t_high] = "High"
    return RiskGroups(t_low, t_high, assignment)


def group_ppv(groups: RiskGroups, labels) -> dict[str, GroupStats]:
    y = np.asarray(labels).ravel()
    if y.size != groups.assignment.size:
        raise DimensionError("labels do not line up with the grouped scores")
    out = {}
    for g in GROUPS:
        sel = groups.assignment == g
        count, positives = int(sel.sum()), int(y[sel].sum())
        out[g] = GroupStats(g, count, positives, positives / count if count else None)
    return out
