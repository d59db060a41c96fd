"""Region-aware attribute refinement.

Each attribute owns a learnable embedding row; added to its fused token and
layer-normalized it becomes a query over the whole fused sequence. A spatial
prior mask nudges the attention logits: for an attribute tied to a body
region, patches inside that region get +gamma, patches outside get -gamma,
and text/cls columns stay untouched. Global attributes get an all-zero row.
The attended result is blended with the original attribute token through a
learned sigmoid gate whose bias starts negative, so early training leans on
the fused token and the attended path fades in as the gate learns to open.

The cross-attention deliberately has no output projection; heads are simply
concatenated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .fusion import merge_heads, split_heads

REGION_CATEGORIES = ("head", "upper", "lower", "foot", "global")

# vertical bands as fractions of image height, [low, high); together they
# tile [0, 1]
DEFAULT_BANDS: dict[str, tuple[float, float]] = {
    "head": (0.0, 0.20),
    "upper": (0.20, 0.55),
    "lower": (0.55, 0.85),
    "foot": (0.85, 1.0),
}

GAMMA_INIT = 2.0
GATE_BIAS_INIT = -2.0


@dataclass
class RegionMap:
    """Attribute -> body-region assignment over a patch grid.

    A patch belongs to the band containing its grid-row center
    ``(row + 0.5) / rows``. Bands must tile [0, 1] exactly.
    """

    regions: list[str]                     # one category per attribute
    grid: tuple[int, int]                  # (rows, cols)
    bands: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BANDS))

    def __post_init__(self):
        for r in self.regions:
            if r not in REGION_CATEGORIES:
                raise ValueError(f"unknown region category {r!r}")
        rows, cols = self.grid
        if rows <= 0 or cols <= 0:
            raise ValueError(f"grid sides must be positive, got {self.grid}")
        if set(self.bands) != set(REGION_CATEGORIES) - {"global"}:
            raise ValueError("bands must cover exactly the four local categories")
        spans = sorted(self.bands.values())
        if spans[0][0] != 0.0 or spans[-1][1] != 1.0:
            raise ValueError("bands must span [0, 1]")
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if hi != lo:
                raise ValueError("bands must tile [0, 1] without gaps or overlap")

    @property
    def n_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    def region_patches(self, region: str) -> np.ndarray:
        """Patch indices whose grid-row center falls in the region's band."""
        if region == "global":
            return np.arange(self.n_patches)
        lo, hi = self.bands[region]
        rows, cols = self.grid
        centers = (np.arange(rows) + 0.5) / rows
        hit_rows = np.nonzero((centers >= lo) & (centers < hi))[0]
        return (hit_rows[:, None] * cols + np.arange(cols)).reshape(-1)

    def mask_template(self, n_tokens: int) -> np.ndarray:
        """Sign pattern in {-1, 0, +1}, shape (n_attrs, n_tokens).

        Token order is [attribute text rows, cls, patches]; only patch
        columns of region-bound attributes are nonzero.
        """
        n_attrs = len(self.regions)
        patch_base = n_attrs + 1
        if n_tokens != patch_base + self.n_patches:
            raise ValueError(
                f"token count {n_tokens} != attrs {n_attrs} + cls + patches {self.n_patches}")
        template = np.zeros((n_attrs, n_tokens))
        for j, region in enumerate(self.regions):
            if region == "global":
                continue
            template[j, patch_base:] = -1.0
            template[j, patch_base + self.region_patches(region)] = 1.0
        return template


def init_raer_params(n_attrs: int, dim: int, rng: np.random.Generator,
                     gamma_init: float = GAMMA_INIT,
                     gate_bias_init: float = GATE_BIAS_INIT) -> dict[str, Tensor]:
    def w(fan_in, *shape):
        return Tensor(rng.normal(0.0, fan_in ** -0.5, size=shape), requires_grad=True)

    return {
        "raer.attr_embed": Tensor(rng.normal(0.0, 0.02, size=(n_attrs, dim)),
                                  requires_grad=True),
        "raer.ln.gain": Tensor(np.ones(dim), requires_grad=True),
        "raer.ln.bias": Tensor(np.zeros(dim), requires_grad=True),
        "raer.Wq": w(dim, dim, dim),
        "raer.Wk": w(dim, dim, dim),
        "raer.Wv": w(dim, dim, dim),
        "raer.gate.W": w(2 * dim, 1, 2 * dim),
        "raer.gate.b": Tensor(float(gate_bias_init), requires_grad=True),
        "raer.gamma": Tensor(float(gamma_init), requires_grad=True),
    }


def build_query(attr_embed: Tensor, attr_tokens: Tensor, ln_gain: Tensor,
                ln_bias: Tensor) -> Tensor:
    """Queries = LayerNorm(attribute embedding + fused attribute token)."""
    return ad.layer_norm(ad.add(attr_embed, attr_tokens), ln_gain, ln_bias)


def build_spm(region_map: RegionMap, gamma: Tensor | float,
              n_tokens: int) -> Tensor:
    """Spatial prior mask: gamma * sign template, shape (n_attrs, n_tokens)."""
    template = region_map.mask_template(n_tokens)
    return ad.mul(as_tensor(gamma), template)


def cross_attend(query: Tensor, fused: Tensor, params: dict[str, Tensor],
                 mask: Tensor, heads: int) -> tuple[Tensor, np.ndarray]:
    """Attend attribute queries over the fused sequence.

    The mask is added to the logits of every head identically. Returns the
    concatenated-head result (no output projection) plus the head-averaged
    attention weights as a plain array for inspection and export.
    """
    q = ad.matmul(query, params["raer.Wq"])
    k = ad.matmul(fused, params["raer.Wk"])
    v = ad.matmul(fused, params["raer.Wv"])
    qh, kh, vh = (split_heads(t, heads) for t in (q, k, v))
    scale = 1.0 / np.sqrt(qh.shape[-1])
    kt_axes = list(range(kh.ndim))
    kt_axes[-1], kt_axes[-2] = kt_axes[-2], kt_axes[-1]
    scores = ad.add(ad.mul(ad.matmul(qh, ad.transpose(kh, kt_axes)), scale), mask)
    weights = ad.softmax(scores)
    attended = merge_heads(ad.matmul(weights, vh))
    return attended, weights.data.mean(axis=-3)


def gated_fuse(attr_tokens: Tensor, attended: Tensor, gate_w: Tensor,
               gate_b: Tensor) -> tuple[Tensor, Tensor]:
    """Blend attended and fused attribute features with a learned gate.

    gate = sigmoid(W [attr_token ; attended] + b), applied per attribute:
    out = gate * attended + (1 - gate) * attr_token. Returns (out, gate)
    with gate shaped (..., n_attrs, 1).
    """
    stacked = ad.concat([attr_tokens, attended], axis=attr_tokens.ndim - 1)
    kt_axes = list(range(gate_w.ndim))
    kt_axes[-1], kt_axes[-2] = kt_axes[-2], kt_axes[-1]
    logits = ad.add(ad.matmul(stacked, ad.transpose(gate_w, kt_axes)), gate_b)
    gate = ad.sigmoid(logits)
    out = ad.add(ad.mul(gate, attended), ad.mul(ad.sub(1.0, gate), attr_tokens))
    return out, gate


def export_attention_csv(path: str | Path, attr_names: list[str],
                         attention: np.ndarray, grid: tuple[int, int]) -> None:
    """Write one row per (attribute, token): attribute, token_index,
    grid_row, grid_col, weight. Text and cls tokens get grid coords -1."""
    n_attrs, n_tokens = attention.shape
    if n_attrs != len(attr_names):
        raise ValueError("attention rows != number of attribute names")
    rows_, cols_ = grid
    patch_base = n_attrs + 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute", "token_index", "grid_row", "grid_col", "weight"])
        for j, name in enumerate(attr_names):
            for tok in range(n_tokens):
                if tok >= patch_base:
                    p = tok - patch_base
                    r, c = divmod(p, cols_)
                else:
                    r = c = -1
                writer.writerow([name, tok, r, c, repr(float(attention[j, tok]))])
