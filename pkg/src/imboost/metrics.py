"""Exact ranking metrics over outlier scores (outliers are the positive class)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("both classes must be present")
    return scores, labels, n_pos, n_neg


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_out > score_in) + 0.5 * P(equal), exact via
    mid-ranks."""
    scores, labels, n_pos, n_neg = _validate(scores, labels)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # mid-rank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-wise AP = sum (R_k - R_{k-1}) * P_k over descending-score
    thresholds, with tied scores grouped at one threshold."""
    scores, labels, n_pos, _ = _validate(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # threshold boundaries: positions where the score changes
    boundaries = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([boundaries, [s.size - 1]])
    tp = np.cumsum(y)[cut].astype(np.float64)
    fp = (cut + 1.0) - tp
    recall = tp / n_pos
    precision = tp / (tp + fp)
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


@dataclass
class EvalReport:
    auc: float
    ap: float
    n_pos: int
    n_neg: int
    per_round: list = field(default_factory=list)  # (round, auc, ap)


def evaluate(scores, labels, per_round=None) -> EvalReport:
    scores, labels, n_pos, n_neg = _validate(scores, labels)
    return EvalReport(auc=auc(scores, labels), ap=average_precision(scores, labels),
                      n_pos=n_pos, n_neg=n_neg, per_round=list(per_round or []))
