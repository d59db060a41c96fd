"""Evidential multi-attribute recognition on a self-contained numpy stack.

The pieces, bottom to top: a tape-based autodiff engine (`autodiff`), a
multimodal fusion encoder (`fusion`), region-aware evidence reasoning with
a spatial prior mask (`raer`), Beta-evidence heads and losses
(`evidential`), a two-stage uncertainty-paced training loop (`curriculum`,
`trainer`), synthetic benchmark tasks with occlusion and label noise
(`synth`, `featfile`), evaluation and selective-prediction metrics
(`metrics`, `evaluation`), and a command line (`cli`).
"""

from .autodiff import ComputationRecord, Tensor, backward
from .curriculum import (CurriculumSchedule, ScheduleStep, gaussian_weights,
                         pacing_weights, sample_mean_uncertainty)
from .errors import ConfigError, DataError, NumericalAbort
from .evaluation import (SplitEvaluation, evaluate, region_attention_mass,
                         summary_dict)
from .evidential import (BetaBundle, awr_loss, bce_loss, beta_ce_loss,
                         beta_mse_loss, edl_loss, evidence_head, stage2_loss)
from .featfile import load_dataset, save_dataset
from .fusion import FeatureBundle, FusionConfig
from .metrics import (InstanceMetrics, LabelMetrics, RejectionCurve,
                      instance_metrics, label_metrics, rejection_curve,
                      uncertainty_auroc)
from .model import AttributeModel, ModelConfig
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import SgdOptimizer
from .raer import RegionMap
from .runconfig import RunConfig, default_run_config, parse_run_config
from .synth import (AttributeSpec, Dataset, LabeledSample, Split, TaskSpec,
                    apply_occlusion, default_attributes, flip_labels,
                    generate_dataset, load_task_spec)
from .trainer import EpochReport, Trainer, TrainerConfig

__version__ = "0.1.0"

__all__ = [
    "AttributeModel", "AttributeSpec", "BetaBundle", "ComputationRecord",
    "ConfigError", "CurriculumSchedule", "DataError", "Dataset",
    "EpochReport", "FeatureBundle", "FusionConfig", "InstanceMetrics",
    "LabelMetrics", "LabeledSample", "ModelConfig", "NumericalAbort",
    "RegionMap", "RejectionCurve", "RunConfig", "ScheduleStep",
    "SgdOptimizer", "Split", "SplitEvaluation", "TaskSpec", "Tensor", "Trainer",
    "TrainerConfig", "apply_occlusion", "awr_loss", "backward", "bce_loss",
    "beta_ce_loss", "beta_mse_loss", "default_attributes",
    "default_run_config", "edl_loss", "evaluate", "evidence_head",
    "flip_labels", "gaussian_weights", "generate_dataset", "instance_metrics",
    "label_metrics", "load_checkpoint", "load_dataset", "load_task_spec",
    "pacing_weights",
    "parse_run_config", "region_attention_mass", "rejection_curve",
    "sample_mean_uncertainty", "save_checkpoint", "save_dataset", "stage2_loss",
    "summary_dict",
    "uncertainty_auroc", "__version__",
]
