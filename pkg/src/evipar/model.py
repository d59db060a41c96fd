"""The full attribute model: fusion encoder, region-aware refinement, and
the evidence head, wired end to end.

Ablation switches never change how many parameters exist or the order they
are initialized in, only which ones train and which paths run:

* ``use_spm=False`` initializes gamma at zero and freezes it, so the
  spatial prior adds nothing to the attention logits;
* ``use_raer=False`` skips the refinement pass entirely (the evidence head
  reads the fused attribute tokens directly) and freezes the refinement
  parameters.

Keeping the parameter set fixed means every variant consumes the init rng
identically, so ablations that share a seed start from bit-identical
shared weights, and checkpoints stay interchangeable in shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError
from .evidential import BetaBundle, evidence_head, init_evidence_params
from .fusion import (FusionConfig, init_fusion_params, multimodal_fusion,
                     project_modalities)
from .raer import (DEFAULT_BANDS, GAMMA_INIT, GATE_BIAS_INIT, RegionMap,
                   build_query, cross_attend, gated_fuse, init_raer_params)
from .synth import TaskSpec


@dataclass
class ModelConfig:
    regions: list[str]                 # region category per attribute
    grid: tuple[int, int]
    d_v: int = 64
    d_t: int = 64
    dim: int = 64
    blocks: int = 1
    heads: int = 4
    ffn_multiplier: int = 4
    shared_evidence: bool = True
    use_raer: bool = True
    use_spm: bool = True
    bands: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BANDS))

    def __post_init__(self):
        # region/grid validation happens in RegionMap, dim/head in FusionConfig
        self.region_map = RegionMap(regions=list(self.regions),
                                    grid=tuple(self.grid), bands=self.bands)
        self.fusion = FusionConfig(dim=self.dim, blocks=self.blocks,
                                   heads=self.heads,
                                   ffn_multiplier=self.ffn_multiplier)
        if self.d_v <= 0 or self.d_t <= 0:
            raise ValueError("token widths must be positive")

    @classmethod
    def from_task(cls, task: TaskSpec, **overrides) -> "ModelConfig":
        kwargs = dict(regions=task.regions, grid=task.grid,
                      d_v=task.d_v, d_t=task.d_t)
        kwargs.update(overrides)
        return cls(**kwargs)

    @property
    def n_attrs(self) -> int:
        return len(self.regions)

    @property
    def n_tokens(self) -> int:
        return self.n_attrs + 1 + self.region_map.n_patches


class AttributeModel:
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.params: dict[str, Tensor] = {}
        # one fixed init order; see module docstring
        self.params.update(init_fusion_params(config.fusion, config.d_v,
                                              config.d_t, rng))
        gamma0 = GAMMA_INIT if config.use_spm else 0.0
        self.params.update(init_raer_params(config.n_attrs, config.dim, rng,
                                            gamma_init=gamma0,
                                            gate_bias_init=GATE_BIAS_INIT))
        self.params.update(init_evidence_params(config.dim, config.n_attrs, rng,
                                                shared=config.shared_evidence))
        self._template = config.region_map.mask_template(config.n_tokens)

    def trainable_params(self) -> dict[str, Tensor]:
        frozen = set()
        if not self.config.use_raer:
            frozen = {k for k in self.params if k.startswith("raer.")}
        elif not self.config.use_spm:
            frozen = {"raer.gamma"}
        return {k: v for k, v in self.params.items() if k not in frozen}

    def forward(self, visual, text) -> tuple[BetaBundle, dict]:
        """visual: (B, P+1, d_v) or (P+1, d_v); text: (N, d_t) shared.

        Returns the Beta evidence bundle over (..., N) plus a diagnostics
        dict (fusion attention per block, refinement attention, gate).
        """
        visual = as_tensor(visual)
        text = as_tensor(text)
        t_proj, v_proj = project_modalities(text, visual, self.params)
        if visual.ndim == 3:
            t_proj = ad.broadcast_to(
                t_proj, (visual.shape[0], *t_proj.shape))
        fused = multimodal_fusion(t_proj, v_proj, self.params, self.config.fusion)
        info: dict = {"fusion_attention": fused.attention,
                      "raer_attention": None, "gate": None}
        if self.config.use_raer:
            query = build_query(self.params["raer.attr_embed"],
                                fused.attr_tokens,
                                self.params["raer.ln.gain"],
                                self.params["raer.ln.bias"])
            mask = ad.mul(self.params["raer.gamma"], self._template)
            attended, attn = cross_attend(query, fused.all_tokens, self.params,
                                          mask, self.config.heads)
            features, gate = gated_fuse(fused.attr_tokens, attended,
                                        self.params["raer.gate.W"],
                                        self.params["raer.gate.b"])
            info["raer_attention"] = attn
            info["gate"] = gate.data
        else:
            features = fused.attr_tokens
        return evidence_head(features, self.params), info

    def save(self, path) -> None:
        save_checkpoint(path, self.params)

    def load(self, path) -> None:
        arrays = load_checkpoint(path)
        if set(arrays) != set(self.params):
            missing = sorted(set(self.params) - set(arrays))
            extra = sorted(set(arrays) - set(self.params))
            raise DataError(
                f"checkpoint does not match model: missing {missing}, "
                f"unexpected {extra}")
        for name, value in arrays.items():
            if value.shape != self.params[name].data.shape:
                raise DataError(
                    f"checkpoint tensor {name!r} has shape {value.shape}, "
                    f"model expects {self.params[name].data.shape}")
            self.params[name].data[...] = value
