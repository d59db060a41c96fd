"""Two-stage uncertainty-paced curriculum.

Stage I (epochs 1..warmup): hard self-paced retention. Per batch, keep the
ceil(q * B) lowest-loss samples at weight 1 and drop the rest at weight 0,
with q growing linearly from q0 to 1 across the warmup epochs.

Stage II (epochs warmup+1..total): every sample gets a soft Gaussian weight
centred on a moving uncertainty target,

    w_i = exp(-(u_bar_i - c)^2 / (2 sigma^2)),

so training attention follows a frontier that slides from low-uncertainty
(consolidation) toward high-uncertainty (exploration) samples. The
evidential regularizer weight lambda ramps linearly from ~0 to lambda_max
over the same stretch.

Weights are treated as constants by the trainer: the ranking/weighting pass
reads detached values and gradients never flow through w_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor


@dataclass
class ScheduleStep:
    """Resolved knob values for one epoch."""

    stage: str          # "I" or "II"
    q: float            # stage-I retention fraction (1.0 in stage II)
    c: float            # stage-II Gaussian center (c_lo during stage I)
    sigma: float
    lam: float          # evidential regularizer weight (0.0 in stage I)


@dataclass
class CurriculumSchedule:
    warmup_epochs: int = 12
    total_epochs: int = 24
    q0: float = 0.5
    c_lo: float = 0.2
    c_hi: float = 0.6
    sigma: float = 0.15
    lambda_max: float = 1.0
    lambda_awr: float = 0.1

    def __post_init__(self):
        if self.warmup_epochs < 1:
            raise ValueError("warmup must last at least one epoch")
        if self.total_epochs <= self.warmup_epochs:
            raise ValueError(
                f"total epochs ({self.total_epochs}) must exceed warmup "
                f"({self.warmup_epochs})")
        if not 0.0 < self.q0 <= 1.0:
            raise ValueError(f"q0 must lie in (0, 1], got {self.q0}")
        if not 0.0 <= self.c_lo <= self.c_hi <= 1.0:
            raise ValueError("need 0 <= c_lo <= c_hi <= 1")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lambda_max < 0.0 or self.lambda_awr < 0.0:
            raise ValueError("lambda_max and lambda_awr must be >= 0")

    def at(self, epoch: int) -> ScheduleStep:
        """Knob values for a 1-based epoch index."""
        if not 1 <= epoch <= self.total_epochs:
            raise ValueError(
                f"epoch {epoch} outside schedule 1..{self.total_epochs}")
        if epoch <= self.warmup_epochs:
            span = max(self.warmup_epochs - 1, 1)
            q = self.q0 + (1.0 - self.q0) * (epoch - 1) / span
            return ScheduleStep(stage="I", q=min(q, 1.0), c=self.c_lo,
                                sigma=self.sigma, lam=0.0)
        frac = (epoch - self.warmup_epochs) / (self.total_epochs - self.warmup_epochs)
        return ScheduleStep(stage="II", q=1.0,
                            c=self.c_lo + (self.c_hi - self.c_lo) * frac,
                            sigma=self.sigma, lam=self.lambda_max * frac)


def pacing_weights(losses: np.ndarray, fraction: float) -> np.ndarray:
    """0/1 retention by loss rank: keep the ceil(fraction * B) easiest
    samples; ties broken toward the lower sample index."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("per-sample losses must be a non-empty vector")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"retention fraction must lie in (0, 1], got {fraction}")
    keep = math.ceil(fraction * losses.size)
    order = np.argsort(losses, kind="stable")
    weights = np.zeros(losses.size)
    weights[order[:keep]] = 1.0
    return weights


def sample_mean_uncertainty(u: Tensor | np.ndarray) -> np.ndarray:
    """Mean vacuity per sample, detached: (B, N) -> (B,)."""
    data = u.data if isinstance(u, Tensor) else np.asarray(u)
    if data.ndim != 2:
        raise ValueError(f"expected a (batch, attrs) vacuity matrix, got {data.shape}")
    return data.mean(axis=1)


def gaussian_weights(u_bar: np.ndarray, center: float, sigma: float) -> np.ndarray:
    """Gaussian pacing weight in (0, 1], peaking where u_bar == center."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    u_bar = np.asarray(u_bar, dtype=np.float64)
    z = (u_bar - center) / sigma
    return np.exp(-0.5 * z * z)


def renormalize_weights(weights: np.ndarray) -> np.ndarray:
    """Optional variant: rescale a batch of weights to mean 1."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("cannot renormalize all-zero weights")
    return weights * (weights.size / total)
