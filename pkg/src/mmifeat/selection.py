"""Feature ranking and selection baselines.

All selectors are deterministic functions of their inputs; ties break toward
the lower feature index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _stats

from .dataset import LabeledFeatures
from .density import average_mi

__all__ = [
    "SelectionResult",
    "r2_select",
    "sda_select",
    "discretize_3state",
    "mrmr_select",
    "mmi_select",
]


@dataclass
class SelectionResult:
    """Selected feature indices (in selection order) and per-feature scores."""

    indices: list[int]
    scores: np.ndarray

    def __post_init__(self):
        self.indices = [int(i) for i in self.indices]
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selected indices must be unique")


def _binary_targets(labels) -> np.ndarray:
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) != 2:
        raise ValueError(f"binary labels required, got classes {classes}")
    return np.where(labels == classes.max(), 1.0, -1.0)


def _rank_by_score(scores: np.ndarray, k: int) -> list[int]:
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return order[:k]


def r2_select(features: LabeledFeatures, k: int) -> SelectionResult:
    """Top-k features by squared Pearson correlation with the +-1 targets."""
    if k > features.d:
        raise ValueError("cannot select more features than available")
    y = _binary_targets(features.labels)
    yc = y - y.mean()
    denom_y = np.sqrt(np.sum(yc**2))
    if denom_y == 0:
        raise ValueError("constant label vector")
    scores = np.empty(features.d)
    for j in range(features.d):
        xc = features.x[:, j] - features.x[:, j].mean()
        denom_x = np.sqrt(np.sum(xc**2))
        if denom_x == 0:
            scores[j] = 0.0
        else:
            r = float(np.dot(xc, yc) / (denom_x * denom_y))
            scores[j] = r * r
    return SelectionResult(_rank_by_score(scores, k), scores)


def _ols_rss(design: np.ndarray, y: np.ndarray):
    """Least-squares residual sum of squares, or None if rank-deficient."""
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        return None
    resid = y - design @ coef
    return float(np.dot(resid, resid))


def sda_select(
    features: LabeledFeatures,
    p_in: float = 0.05,
    p_out: float = 0.05,
    cap: int = 6,
) -> SelectionResult:
    """Stepwise forward/backward selection on an OLS discriminant.

    Targets are the +-1 labels regressed with an intercept. The forward step
    adds the candidate with the smallest partial-F p-value when it is below
    ``p_in``; the backward step drops the worst included feature whose
    p-value exceeds ``p_out``; iteration stops when neither fires or the cap
    is reached. Candidates that make the design rank-deficient are skipped.
    """
    y = _binary_targets(features.labels)
    n, d = features.x.shape
    selected: list[int] = []
    p_values = np.full(d, np.nan)

    def design_for(cols):
        return np.column_stack([np.ones(n)] + [features.x[:, j] for j in cols])

    while True:
        changed = False
        # forward step
        if len(selected) < cap and n > len(selected) + 3:
            rss_base = _ols_rss(design_for(selected), y)
            best_j, best_p = None, None
            for j in range(d):
                if j in selected:
                    continue
                cols = selected + [j]
                rss_full = _ols_rss(design_for(cols), y)
                if rss_full is None or rss_full <= 0:
                    continue
                dof = n - (len(cols) + 1)
                f = max(rss_base - rss_full, 0.0) / (rss_full / dof)
                p = float(_stats.f.sf(f, 1, dof))
                if best_p is None or p < best_p or (p == best_p and j < best_j):
                    best_j, best_p = j, p
            if best_j is not None and best_p < p_in:
                selected.append(best_j)
                p_values[best_j] = best_p
                changed = True
        # backward step
        if len(selected) > 1:
            rss_full = _ols_rss(design_for(selected), y)
            worst_i, worst_p = None, None
            if rss_full is not None and rss_full > 0:
                dof = n - (len(selected) + 1)
                for i, j in enumerate(selected):
                    reduced = selected[:i] + selected[i + 1 :]
                    rss_red = _ols_rss(design_for(reduced), y)
                    if rss_red is None:
                        continue
                    f = max(rss_red - rss_full, 0.0) / (rss_full / dof)
                    p = float(_stats.f.sf(f, 1, dof))
                    p_values[j] = p
                    if worst_p is None or p > worst_p:
                        worst_i, worst_p = i, p
                if worst_p is not None and worst_p > p_out:
                    del selected[worst_i]
                    changed = True
        if not changed or len(selected) >= cap:
            break
    scores = np.where(np.isnan(p_values), 0.0, 1.0 - np.nan_to_num(p_values, nan=1.0))
    return SelectionResult(selected, scores)


def discretize_3state(column) -> np.ndarray:
    """Map a column to states {0, 1, 2} split at mean +- sample std."""
    col = np.asarray(column, dtype=np.float64)
    if col.size < 2:
        raise ValueError("at least two samples required")
    mu = col.mean()
    s = col.std(ddof=1)
    states = np.ones(col.shape, dtype=np.int64)
    states[col < mu - s] = 0
    states[col > mu + s] = 2
    return states


def _discrete_mi(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in mutual information of two discrete sequences, in nats."""
    a_vals, a_idx = np.unique(a, return_inverse=True)
    b_vals, b_idx = np.unique(b, return_inverse=True)
    joint = np.zeros((len(a_vals), len(b_vals)))
    np.add.at(joint, (a_idx, b_idx), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def mrmr_select(features: LabeledFeatures, k: int) -> SelectionResult:
    """Greedy minimal-redundancy-maximal-relevance selection (difference form).

    Columns are discretized to three states; the first pick maximizes the
    discrete MI with the labels, later picks maximize relevance minus the
    mean MI with the already-selected features.
    """
    if k > features.d:
        raise ValueError("cannot select more features than available")
    cols = [discretize_3state(features.x[:, j]) for j in range(features.d)]
    labels = features.labels
    relevance = np.array([_discrete_mi(c, labels) for c in cols])
    selected: list[int] = []
    while len(selected) < k:
        best_j, best_score = None, None
        for j in range(features.d):
            if j in selected:
                continue
            if selected:
                redundancy = np.mean([_discrete_mi(cols[j], cols[s]) for s in selected])
            else:
                redundancy = 0.0
            score = relevance[j] - redundancy
            if best_score is None or score > best_score:
                best_j, best_score = j, score
        selected.append(best_j)
    return SelectionResult(selected, relevance)


def mmi_select(
    features: LabeledFeatures,
    k: int,
    pair_map: Sequence[int],
) -> SelectionResult:
    """Greedy pairwise selection by per-feature KDE mutual information.

    Each feature is scored by the leave-one-out average MI of that single
    column against the labels; the greedy step adds the best unselected
    feature together with its eigen-pair partner from ``pair_map``.
    ``k`` must be even.
    """
    if k % 2 != 0:
        raise ValueError("pairwise selection requires an even k")
    if k > features.d:
        raise ValueError("cannot select more features than available")
    pair_map = list(pair_map)
    if len(pair_map) != features.d:
        raise ValueError("pair_map must cover every feature")
    scores = np.array(
        [
            average_mi(LabeledFeatures(features.x[:, [j]], features.labels))
            for j in range(features.d)
        ]
    )
    selected: list[int] = []
    for j in _rank_by_score(scores, features.d):
        if len(selected) >= k:
            break
        if j in selected:
            continue
        partner = pair_map[j]
        if partner is None or partner == j or not 0 <= partner < features.d:
            raise ValueError(f"feature {j} has no valid eigen-pair partner")
        selected.append(j)
        if partner not in selected:
            selected.append(partner)
    return SelectionResult(selected[:k], scores)
