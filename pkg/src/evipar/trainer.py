"""Two-stage training loop with uncertainty-paced sample weighting.

Stage I trains the Beta-mean probabilities with cross-entropy and hard
self-paced retention: each batch is ranked by per-sample loss (on detached
values, so ranking never differentiates) and only the easiest
ceil(q * B) samples contribute to the single weighted backward pass. The
retention quota q expands linearly until the warmup ends.

Stage II switches to the evidential objective. Each sample is weighted by
a Gaussian in its mean vacuity centered at c(t), which slides from low to
high uncertainty over the stage, and the wrong-way-evidence penalty joins
unweighted. Both the weights and the vacuity they are computed from are
treated as constants by the tape.

Every epoch appends one JSON line to the log; lines carry no timestamps so
reruns of the same seed produce byte-identical logs.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ComputationRecord, backward
from .curriculum import (CurriculumSchedule, ScheduleStep, gaussian_weights,
                         pacing_weights, renormalize_weights,
                         sample_mean_uncertainty)
from .errors import NumericalAbort
from .evidential import bce_loss, stage2_loss
from .metrics import label_metrics
from .model import AttributeModel
from .optim import SgdOptimizer
from .synth import Dataset

_LOG = logging.getLogger("evipar.trainer")

SHUFFLE_STREAM_KEY = 7


@dataclass
class TrainerConfig:
    lr: float = 6e-3
    weight_decay: float = 5e-4
    momentum: float = 0.9
    batch_size: int = 48
    use_edl: bool = True      # False: cross-entropy on the Beta mean throughout
    use_cl: bool = True       # False: every sample weighs 1 in both stages
    use_awr: bool = True      # False: wrong-way-evidence penalty off
    renormalize: bool = False  # rescale stage-II weights to batch mean 1
    max_skip_fraction: float = 0.1

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.max_skip_fraction <= 1.0:
            raise ValueError("max_skip_fraction must lie in [0, 1]")


@dataclass
class EpochReport:
    epoch: int
    stage: str
    mean_loss: float
    mean_vacuity: float
    retained_fraction: float
    lam: float
    center: float
    train_ma: float
    skipped_steps: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class Trainer:
    def __init__(self, model: AttributeModel, dataset: Dataset,
                 schedule: CurriculumSchedule, config: TrainerConfig,
                 seed: int, log_path=None):
        self.model = model
        self.dataset = dataset
        self.schedule = schedule
        self.config = config
        self.log_path = log_path
        train = dataset.splits["train"]
        self.batch_size = min(config.batch_size, len(train))
        if self.batch_size < config.batch_size:
            _LOG.info("batch size reduced to %d to fit the train split",
                      self.batch_size)
        self.optimizer = SgdOptimizer(model.trainable_params(), lr=config.lr,
                                      weight_decay=config.weight_decay,
                                      momentum=config.momentum)
        self._shuffle = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(seed, spawn_key=(SHUFFLE_STREAM_KEY,))))
        self.reports: list[EpochReport] = []

    def _batch_loss(self, bundle, labels, step: ScheduleStep):
        """Weighted scalar loss plus the retained fraction for reporting."""
        cfg = self.config
        if step.stage == "I" or not cfg.use_edl:
            per_sample = bce_loss(bundle.p_hat, labels)
            if cfg.use_cl and step.stage == "I":
                w = pacing_weights(per_sample.data, step.q)
            else:
                w = np.ones(per_sample.shape[0])
            loss = ad.div(ad.tsum(ad.mul(per_sample, w)), float(w.sum()))
            return loss, float(w.mean())
        if cfg.use_cl:
            u_bar = sample_mean_uncertainty(bundle.u)
            w = gaussian_weights(u_bar, step.c, step.sigma)
            if cfg.renormalize:
                w = renormalize_weights(w)
        else:
            w = np.ones(labels.shape[0])
        lam_awr = self.schedule.lambda_awr if cfg.use_awr else 0.0
        loss = ad.mean(stage2_loss(bundle, labels, w, step.lam, lam_awr))
        return loss, 1.0

    def run_epoch(self, epoch: int) -> EpochReport:
        step = self.schedule.at(epoch)
        train = self.dataset.splits["train"]
        text = self.dataset.text_tokens
        order = self._shuffle.permutation(len(train))

        losses, vacuities, retained = [], [], []
        preds, seen_labels = [], []
        skipped = 0
        n_batches = math.ceil(len(order) / self.batch_size)
        for b in range(n_batches):
            idx = order[b * self.batch_size:(b + 1) * self.batch_size]
            visual = train.visual[idx]
            labels = train.labels[idx]
            with ComputationRecord() as rec:
                bundle, _ = self.model.forward(visual, text)
                loss, kept = self._batch_loss(bundle, labels, step)
            value = loss.item()
            preds.append((bundle.p_hat.data > 0.5).astype(np.int64))
            seen_labels.append(labels)
            vacuities.append(float(bundle.u.data.mean()))
            if not np.isfinite(value):
                _LOG.warning("epoch %d batch %d: non-finite loss, skipped",
                             epoch, b)
                self.optimizer.zero_grad()
                skipped += 1
                continue
            backward(rec, loss)
            if not self.optimizer.step():
                skipped += 1
                continue
            losses.append(value)
            retained.append(kept)

        if skipped > self.config.max_skip_fraction * n_batches:
            raise NumericalAbort(
                f"epoch {epoch}: {skipped} of {n_batches} batches skipped "
                f"for non-finite values")

        train_ma = label_metrics(np.concatenate(seen_labels),
                                 np.concatenate(preds)).mean_accuracy
        report = EpochReport(
            epoch=epoch, stage=step.stage,
            mean_loss=float(np.mean(losses)) if losses else float("nan"),
            mean_vacuity=float(np.mean(vacuities)),
            retained_fraction=float(np.mean(retained)) if retained else 0.0,
            lam=step.lam, center=step.c, train_ma=train_ma,
            skipped_steps=skipped)
        self.reports.append(report)
        if self.log_path is not None:
            with open(self.log_path, "a") as fh:
                fh.write(report.to_json() + "\n")
        return report

    def run(self) -> list[EpochReport]:
        for epoch in range(1, self.schedule.total_epochs + 1):
            self.run_epoch(epoch)
        return self.reports
