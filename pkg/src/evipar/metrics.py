"""Multi-attribute recognition metrics and uncertainty diagnostics.

Label-centric: per attribute, the mean of true-positive and true-negative
rate, averaged over attributes (mA). Instance-centric: per sample, set
overlap between predicted-positive and ground-truth-positive attribute sets
(accuracy = Jaccard, precision, recall, with F1 from the averaged pair).

Degenerate denominators follow one rule everywhere: an empty denominator
scores 1 when the counterpart set is empty too (nothing to get wrong) and 0
when it is not. Zero-positive or zero-negative attribute columns likewise
contribute a vacuous rate of 1, and a warning is logged when that happens.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

_LOG = logging.getLogger("evipar.metrics")


def _as_binary(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int64)


@dataclass
class LabelMetrics:
    tpr: np.ndarray            # per attribute
    tnr: np.ndarray
    balanced_accuracy: np.ndarray
    mean_accuracy: float       # mA


@dataclass
class InstanceMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def label_metrics(gt, pred) -> LabelMetrics:
    gt = _as_binary(gt, "ground truth")
    pred = _as_binary(pred, "predictions")
    if gt.shape != pred.shape or gt.ndim != 2:
        raise ValueError(f"need matching (samples, attrs) matrices, "
                         f"got {gt.shape} vs {pred.shape}")
    pos = gt.sum(axis=0)
    neg = (1 - gt).sum(axis=0)
    tp = ((gt == 1) & (pred == 1)).sum(axis=0)
    tn = ((gt == 0) & (pred == 0)).sum(axis=0)
    if np.any(pos == 0) or np.any(neg == 0):
        degenerate = np.nonzero((pos == 0) | (neg == 0))[0]
        _LOG.warning("attributes %s have a one-sided label column; their "
                     "undefined rate counts as 1", degenerate.tolist())
    tpr = np.where(pos > 0, tp / np.maximum(pos, 1), 1.0)
    tnr = np.where(neg > 0, tn / np.maximum(neg, 1), 1.0)
    balanced = (tpr + tnr) / 2.0
    return LabelMetrics(tpr=tpr, tnr=tnr, balanced_accuracy=balanced,
                        mean_accuracy=float(np.mean(balanced)))


def instance_metrics(gt, pred) -> InstanceMetrics:
    gt = _as_binary(gt, "ground truth")
    pred = _as_binary(pred, "predictions")
    if gt.shape != pred.shape or gt.ndim != 2:
        raise ValueError(f"need matching (samples, attrs) matrices, "
                         f"got {gt.shape} vs {pred.shape}")
    inter = ((gt == 1) & (pred == 1)).sum(axis=1).astype(np.float64)
    union = ((gt == 1) | (pred == 1)).sum(axis=1).astype(np.float64)
    n_true = gt.sum(axis=1).astype(np.float64)
    n_pred = pred.sum(axis=1).astype(np.float64)

    def ratio(num, den, counterpart):
        both_empty = (den == 0) & (counterpart == 0)
        one_sided = (den == 0) & (counterpart > 0)
        out = np.where(den > 0, num / np.maximum(den, 1.0), 0.0)
        out = np.where(both_empty, 1.0, out)
        out = np.where(one_sided, 0.0, out)
        return out

    acc = np.where(union > 0, inter / np.maximum(union, 1.0), 1.0)
    prec = ratio(inter, n_pred, n_true)
    rec = ratio(inter, n_true, n_pred)
    mp, mr = float(np.mean(prec)), float(np.mean(rec))
    f1 = 2.0 * mp * mr / (mp + mr) if mp + mr > 0 else 0.0
    return InstanceMetrics(accuracy=float(np.mean(acc)), precision=mp,
                           recall=mr, f1=f1)


@dataclass
class RejectionCurve:
    coverages: tuple[float, ...]
    accuracies: tuple[float, ...]

    def __post_init__(self):
        if not self.coverages:
            raise ValueError("rejection curve needs at least one coverage")
        if any(not 0.0 < c <= 1.0 for c in self.coverages):
            raise ValueError("coverages must lie in (0, 1]")
        if any(a >= b for a, b in zip(self.coverages, self.coverages[1:])):
            raise ValueError("coverages must be strictly increasing")
        if len(self.accuracies) != len(self.coverages):
            raise ValueError("one accuracy per coverage required")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["coverage", "accuracy"])
            for c, a in zip(self.coverages, self.accuracies):
                writer.writerow([repr(float(c)), repr(float(a))])


def rejection_curve(correct, uncertainty, coverages) -> RejectionCurve:
    """Accuracy over the most-certain ceil(coverage * M) decisions.

    Ties in uncertainty are broken toward the lower index, so the curve is
    deterministic for any input.
    """
    correct = _as_binary(correct, "correctness")
    u = np.asarray(uncertainty, dtype=np.float64)
    if correct.ndim != 1 or correct.shape != u.shape:
        raise ValueError("correctness and uncertainty must be equal-length vectors")
    if correct.size == 0:
        raise ValueError("rejection curve needs at least one decision")
    coverages = tuple(float(c) for c in coverages)
    # construct-first so the shared coverage validation runs before any math
    curve = RejectionCurve(coverages=coverages,
                           accuracies=tuple(0.0 for _ in coverages))
    order = np.argsort(u, kind="stable")
    ranked = correct[order]
    accuracies = []
    for cov in coverages:
        keep = int(np.ceil(cov * correct.size))
        accuracies.append(float(np.mean(ranked[:keep])))
    curve.accuracies = tuple(accuracies)
    return curve


def uncertainty_auroc(uncertainty, flags) -> float:
    """Mann-Whitney AUROC of uncertainty as a score for the flagged class;
    tied scores count half."""
    flags = _as_binary(flags, "flags")
    u = np.asarray(uncertainty, dtype=np.float64)
    if flags.ndim != 1 or flags.shape != u.shape:
        raise ValueError("flags and uncertainty must be equal-length vectors")
    n_pos = int(flags.sum())
    n_neg = flags.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both flagged and unflagged decisions")
    ranks = rankdata(u)  # average ranks implement the tie convention
    rank_sum = float(ranks[flags == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
