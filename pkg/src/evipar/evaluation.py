"""Model evaluation on a dataset split.

Evaluation always scores against clean labels; training-time label noise is
a property of what the model saw, not of what counts as correct. Vacuity
is graded two ways: against occlusion (does the model report ignorance
where evidence was destroyed?) and against its own mistakes (is it less
sure where it is wrong?). Occlusion grading restricts to the attributes
whose body region actually gets occluded in the split, comparing occluded
against clean samples cell by cell; diluting the comparison with
unaffected attributes would say nothing about localization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evidential import UNCERTAINTY_FLAG_THRESHOLD
from .metrics import (InstanceMetrics, LabelMetrics, RejectionCurve,
                      instance_metrics, label_metrics, rejection_curve,
                      uncertainty_auroc)
from .model import AttributeModel
from .synth import Dataset, Split


@dataclass
class SplitEvaluation:
    split: str
    p_hat: np.ndarray                 # (M, N)
    u: np.ndarray                     # (M, N)
    eps_pos: np.ndarray
    eps_neg: np.ndarray
    pred: np.ndarray                  # (M, N) 0/1 at threshold 0.5
    labels: np.ndarray                # clean labels
    label: LabelMetrics
    instance: InstanceMetrics
    flagged_fraction: float           # share of decisions with u above 0.4
    auroc_error: float | None
    auroc_occlusion: float | None
    mean_u_occluded: float | None
    mean_u_clean: float | None
    mean_attention: np.ndarray | None  # (N, L) averaged over the split
    mean_gate: float | None

    def curve(self, coverages) -> RejectionCurve:
        correct = (self.pred == self.labels).astype(np.int64).reshape(-1)
        return rejection_curve(correct, self.u.reshape(-1), coverages)


def occlusion_cells(split: Split, regions: list[str]):
    """(uncertainty column mask, per-cell occlusion flags) for the attributes
    whose region gets occluded somewhere in this split, or None if nothing
    is occluded."""
    hit_regions = {r for r in split.occluded_region if r is not None}
    if not hit_regions:
        return None
    cols = np.array([j for j, r in enumerate(regions) if r in hit_regions])
    if cols.size == 0:
        return None
    flags = np.zeros((len(split), cols.size), dtype=np.int64)
    for i, region in enumerate(split.occluded_region):
        if region is not None:
            flags[i] = [regions[j] == region for j in cols]
    return cols, flags


def evaluate(model: AttributeModel, dataset: Dataset, split: str = "test",
             batch_size: int = 256) -> SplitEvaluation:
    data = dataset.splits[split]
    text = dataset.text_tokens
    p_hat, u, eps_pos, eps_neg = [], [], [], []
    attention_sum = None
    gate_sum = 0.0
    for start in range(0, len(data), batch_size):
        visual = data.visual[start:start + batch_size]
        bundle, info = model.forward(visual, text)
        p_hat.append(bundle.p_hat.data)
        u.append(bundle.u.data)
        eps_pos.append(bundle.eps_pos.data)
        eps_neg.append(bundle.eps_neg.data)
        if info["raer_attention"] is not None:
            block = info["raer_attention"].sum(axis=0)
            attention_sum = block if attention_sum is None else attention_sum + block
            gate_sum += float(info["gate"].sum())
    p_hat = np.concatenate(p_hat)
    u = np.concatenate(u)
    eps_pos = np.concatenate(eps_pos)
    eps_neg = np.concatenate(eps_neg)
    pred = (p_hat > 0.5).astype(np.int64)
    labels = data.labels_clean.astype(np.int64)

    errors = (pred != labels).astype(np.int64).reshape(-1)
    auroc_error = None
    if 0 < errors.sum() < errors.size:
        auroc_error = uncertainty_auroc(u.reshape(-1), errors)

    auroc_occ = mean_u_occ = mean_u_clean = None
    cells = occlusion_cells(data, dataset.spec.regions)
    if cells is not None:
        cols, flags = cells
        scores = u[:, cols].reshape(-1)
        flat = flags.reshape(-1)
        if 0 < flat.sum() < flat.size:
            auroc_occ = uncertainty_auroc(scores, flat)
            mean_u_occ = float(scores[flat == 1].mean())
            mean_u_clean = float(scores[flat == 0].mean())

    mean_attention = None
    mean_gate = None
    if attention_sum is not None:
        mean_attention = attention_sum / len(data)
        mean_gate = gate_sum / (len(data) * dataset.spec.n_attrs)

    return SplitEvaluation(
        split=split, p_hat=p_hat, u=u, eps_pos=eps_pos, eps_neg=eps_neg,
        pred=pred, labels=labels,
        label=label_metrics(labels, pred),
        instance=instance_metrics(labels, pred),
        flagged_fraction=float((u > UNCERTAINTY_FLAG_THRESHOLD).mean()),
        auroc_error=auroc_error, auroc_occlusion=auroc_occ,
        mean_u_occluded=mean_u_occ, mean_u_clean=mean_u_clean,
        mean_attention=mean_attention, mean_gate=mean_gate)


def region_attention_mass(evaluation: SplitEvaluation, dataset: Dataset) -> dict:
    """Mean attention mass each region-bound attribute puts on its own
    region's patch columns, next to the mass a uniform map would put there."""
    if evaluation.mean_attention is None:
        return {}
    spec = dataset.spec
    region_map = spec.region_map()
    n_tokens = evaluation.mean_attention.shape[1]
    patch_base = spec.n_attrs + 1
    out = {}
    for j, attr in enumerate(spec.attributes):
        if attr.region == "global":
            continue
        idx = region_map.region_patches(attr.region) + patch_base
        out[attr.name] = {
            "region": attr.region,
            "mass": float(evaluation.mean_attention[j, idx].sum()),
            "uniform_mass": float(idx.size / n_tokens),
        }
    return out


def summary_dict(evaluation: SplitEvaluation) -> dict:
    """JSON-ready metric summary for one split."""
    return {
        "split": evaluation.split,
        "mA": evaluation.label.mean_accuracy,
        "tpr": evaluation.label.tpr.tolist(),
        "tnr": evaluation.label.tnr.tolist(),
        "instance_accuracy": evaluation.instance.accuracy,
        "instance_precision": evaluation.instance.precision,
        "instance_recall": evaluation.instance.recall,
        "instance_f1": evaluation.instance.f1,
        "mean_vacuity": float(evaluation.u.mean()),
        "flagged_fraction": evaluation.flagged_fraction,
        "auroc_error": evaluation.auroc_error,
        "auroc_occlusion": evaluation.auroc_occlusion,
        "mean_u_occluded": evaluation.mean_u_occluded,
        "mean_u_clean": evaluation.mean_u_clean,
        "mean_gate": evaluation.mean_gate,
    }
