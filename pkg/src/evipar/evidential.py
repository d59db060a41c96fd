"""Beta-evidence heads and the losses trained on them.

Per attribute the head emits two non-negative evidence values through a
softplus: support for the attribute being present and for it being absent.
Adding one to each gives the parameters of a Beta posterior,

    alpha = e_pos + 1,  beta = e_neg + 1,  S = alpha + beta,

whose mean p = alpha / S is the predicted probability and whose vacuity
u = 2 / S shrinks from 1 (no evidence at all) toward 0 as evidence mounts.

Loss functions reduce over the last axis only, so a (N,) input yields a
scalar and a (B, N) batch yields per-sample values the trainer can weight
individually before its own reduction.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor

PROB_CLAMP = 1e-12

# decisions with vacuity above this are flagged as unreliable in reports
UNCERTAINTY_FLAG_THRESHOLD = 0.4


class BetaBundle:
    """Evidence plus every derived Beta quantity, all as live tensors."""

    __slots__ = ("eps_pos", "eps_neg", "alpha", "beta", "strength", "p_hat", "u")

    def __init__(self, eps_pos: Tensor, eps_neg: Tensor):
        self.eps_pos = eps_pos
        self.eps_neg = eps_neg
        self.alpha = ad.add(eps_pos, 1.0)
        self.beta = ad.add(eps_neg, 1.0)
        self.strength = ad.add(self.alpha, self.beta)
        self.p_hat = ad.div(self.alpha, self.strength)
        self.u = ad.div(2.0, self.strength)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.eps_pos.shape


def init_evidence_params(dim: int, n_attrs: int, rng: np.random.Generator,
                         shared: bool = True) -> dict[str, Tensor]:
    """Evidence projection weights; one shared head or one per attribute."""
    scale = dim ** -0.5
    if shared:
        w = rng.normal(0.0, scale, size=(dim, 2))
        b = np.zeros(2)
    else:
        w = rng.normal(0.0, scale, size=(n_attrs, dim, 2))
        b = np.zeros((n_attrs, 2))
    return {"evidence.W": Tensor(w, requires_grad=True),
            "evidence.b": Tensor(b, requires_grad=True)}


def evidence_head(features: Tensor, params: dict[str, Tensor]) -> BetaBundle:
    """Project per-attribute features (..., N, d) to a BetaBundle (..., N)."""
    w, b = params["evidence.W"], params["evidence.b"]
    if w.ndim == 2:
        raw = ad.add(ad.matmul(features, w), b)              # (..., N, 2)
    else:
        # per-attribute weights: stack a singleton so (N, d, 2) broadcasts
        *lead, n, d = features.shape
        f = ad.reshape(features, (*lead, n, 1, d))
        raw = ad.add(ad.reshape(ad.matmul(f, w), (*lead, n, 2)), b)
    ev = ad.softplus(raw)
    eps_pos = ad.reshape(ad.slice_axis(ev, ev.ndim - 1, 0, 1), ev.shape[:-1])
    eps_neg = ad.reshape(ad.slice_axis(ev, ev.ndim - 1, 1, 2), ev.shape[:-1])
    return BetaBundle(eps_pos, eps_neg)


# ---------------------------------------------------------------------------
# losses


def bce_loss(p, y) -> Tensor:
    """Binary cross-entropy, mean over the last axis, probabilities clamped
    at PROB_CLAMP before the logs."""
    p, y = as_tensor(p), np.asarray(y, dtype=np.float64)
    pc = ad.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = ad.mul(ad.log(pc), y)
    negp = ad.clip(ad.sub(1.0, p), PROB_CLAMP, 1.0 - PROB_CLAMP)
    neg = ad.mul(ad.log(negp), 1.0 - y)
    return ad.neg(ad.mean_lastdim(ad.add(pos, neg)))


def beta_ce_loss(bundle: BetaBundle, y) -> Tensor:
    """Cross-entropy on the Beta mean; literally bce_loss(bundle.p_hat, y)."""
    return bce_loss(bundle.p_hat, y)


def beta_mse_loss(bundle: BetaBundle, y) -> Tensor:
    """Expected squared error under the Beta posterior:
    (y - p)^2 + p(1 - p) / (S + 1), mean over the last axis."""
    y = np.asarray(y, dtype=np.float64)
    err = ad.sub(y, bundle.p_hat)
    bias2 = ad.mul(err, err)
    var = ad.div(ad.mul(bundle.p_hat, ad.sub(1.0, bundle.p_hat)),
                 ad.add(bundle.strength, 1.0))
    return ad.mean_lastdim(ad.add(bias2, var))


def awr_loss(bundle: BetaBundle, y) -> Tensor:
    """Directional penalty on wrong-way evidence: positives pay for negative
    evidence, negatives pay for positive evidence."""
    y = np.asarray(y, dtype=np.float64)
    wrong = ad.add(ad.mul(bundle.eps_neg, y), ad.mul(bundle.eps_pos, 1.0 - y))
    return ad.mean_lastdim(wrong)


def edl_loss(bundle: BetaBundle, y, lam: float) -> Tensor:
    """Evidential loss: cross-entropy plus lam * expected squared error."""
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    ce = beta_ce_loss(bundle, y)
    if lam == 0.0:
        return ce
    return ad.add(ce, ad.mul(beta_mse_loss(bundle, y), lam))


def stage2_loss(bundle: BetaBundle, y, weights, lam: float,
                lam_awr: float) -> Tensor:
    """Per-sample curriculum-weighted evidential loss.

    weights multiplies only the evidential term; the wrong-evidence penalty
    is applied unweighted so hard samples keep their directional pressure.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0.0):
        raise ValueError("curriculum weights must be non-negative")
    if lam_awr < 0.0:
        raise ValueError(f"lambda_awr must be >= 0, got {lam_awr}")
    main = ad.mul(edl_loss(bundle, y, lam), weights)
    if lam_awr == 0.0:
        return main
    return ad.add(main, ad.mul(awr_loss(bundle, y), lam_awr))


# ---------------------------------------------------------------------------
# prediction export


PREDICTION_COLUMNS = ["sample_id", "attribute", "label", "p_hat", "u",
                      "eps_pos", "eps_neg"]


def write_prediction_log(path: str | Path, sample_ids, attr_names: list[str],
                         labels: np.ndarray, p_hat: np.ndarray, u: np.ndarray,
                         eps_pos: np.ndarray, eps_neg: np.ndarray) -> None:
    """One CSV row per (sample, attribute) decision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_COLUMNS)
        for i, sid in enumerate(sample_ids):
            for j, name in enumerate(attr_names):
                writer.writerow([sid, name, int(labels[i, j]),
                                 repr(float(p_hat[i, j])), repr(float(u[i, j])),
                                 repr(float(eps_pos[i, j])), repr(float(eps_neg[i, j]))])


def read_prediction_log(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of the prediction log as flat arrays, one entry per decision."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "sample_id": np.array([r["sample_id"] for r in rows]),
        "attribute": np.array([r["attribute"] for r in rows]),
        "label": np.array([int(r["label"]) for r in rows]),
        "p_hat": np.array([float(r["p_hat"]) for r in rows]),
        "u": np.array([float(r["u"]) for r in rows]),
        "eps_pos": np.array([float(r["eps_pos"]) for r in rows]),
        "eps_neg": np.array([float(r["eps_neg"]) for r in rows]),
    }
