"""Multimodal fusion over a shared token sequence.

Text-side attribute tokens and visual tokens (one class token plus P patch
tokens) are projected into a common width, concatenated text-first, and run
through a stack of pre-norm transformer blocks:

    x = x + MHSA(LN(x))
    x = x + FFN(LN(x))

Tokens carry no positional encoding, so the fused sequence is equivariant
under patch permutations; the attribute rows (the first N) are what the
downstream modules consume.

All functions accept either a single sequence ``(n, d)`` or a batch
``(B, n, d)``; weights broadcast over the batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor


@dataclass
class FusionConfig:
    dim: int = 64
    blocks: int = 1
    heads: int = 4
    ffn_multiplier: int = 4

    def __post_init__(self):
        if self.dim <= 0 or self.heads <= 0 or self.ffn_multiplier <= 0:
            raise ValueError("fusion dims, heads and ffn multiplier must be positive")
        if self.blocks < 0:
            raise ValueError("block count must be >= 0")
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")


@dataclass
class FeatureBundle:
    """One sample's raw tokens: visual = [cls, patch_0 .. patch_{P-1}]."""

    visual: np.ndarray        # (P + 1, d_v)
    text: np.ndarray          # (N, d_t)
    grid: tuple[int, int]     # (rows, cols), rows * cols == P

    def __post_init__(self):
        rows, cols = self.grid
        if rows <= 0 or cols <= 0:
            raise ValueError(f"grid sides must be positive, got {self.grid}")
        if self.visual.shape[0] != rows * cols + 1:
            raise ValueError(
                f"visual tokens {self.visual.shape[0]} != grid {rows}x{cols} + cls")


@dataclass
class FusedOutput:
    all_tokens: Tensor                      # (..., L, d)
    attr_tokens: Tensor                     # (..., N, d), first N rows of the above
    attention: list = field(default_factory=list)   # per block: (..., H, L, L) ndarray


def _swap_axes(t: Tensor, i: int, j: int) -> Tensor:
    axes = list(range(t.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return ad.transpose(t, axes)


def split_heads(t: Tensor, heads: int) -> Tensor:
    """(..., L, d) -> (..., heads, L, d // heads)"""
    *lead, length, dim = t.shape
    x = ad.reshape(t, (*lead, length, heads, dim // heads))
    return _swap_axes(x, -3, -2)


def merge_heads(t: Tensor) -> Tensor:
    """(..., heads, L, d_h) -> (..., L, heads * d_h)"""
    x = _swap_axes(t, -3, -2)
    *lead, length, heads, dh = x.shape
    return ad.reshape(x, (*lead, length, heads * dh))


def init_fusion_params(cfg: FusionConfig, d_v: int, d_t: int,
                       rng: np.random.Generator) -> dict[str, Tensor]:
    d = cfg.dim

    def w(fan_in, *shape):
        return Tensor(rng.normal(0.0, fan_in ** -0.5, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape), requires_grad=True)

    params: dict[str, Tensor] = {
        "proj.text.W": w(d_t, d_t, d),
        "proj.text.b": zeros(d),
        "proj.visual.W": w(d_v, d_v, d),
        "proj.visual.b": zeros(d),
    }
    for i in range(cfg.blocks):
        p = f"fuse.{i}."
        params[p + "ln1.gain"] = ones(d)
        params[p + "ln1.bias"] = zeros(d)
        for name in ("Wq", "Wk", "Wv", "Wo"):
            params[p + "attn." + name] = w(d, d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[p + "attn." + name] = zeros(d)
        params[p + "ln2.gain"] = ones(d)
        params[p + "ln2.bias"] = zeros(d)
        hidden = d * cfg.ffn_multiplier
        params[p + "ffn.W1"] = w(d, d, hidden)
        params[p + "ffn.b1"] = zeros(hidden)
        params[p + "ffn.W2"] = w(hidden, hidden, d)
        params[p + "ffn.b2"] = zeros(d)
    return params


def project_modalities(text, visual, params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Map raw text/visual tokens into the common fusion width."""
    text, visual = as_tensor(text), as_tensor(visual)
    t_proj = ad.add(ad.matmul(text, params["proj.text.W"]), params["proj.text.b"])
    v_proj = ad.add(ad.matmul(visual, params["proj.visual.W"]), params["proj.visual.b"])
    return t_proj, v_proj


def _self_attention(x: Tensor, params: dict[str, Tensor], prefix: str,
                    heads: int) -> tuple[Tensor, Tensor]:
    q = ad.add(ad.matmul(x, params[prefix + "Wq"]), params[prefix + "bq"])
    k = ad.add(ad.matmul(x, params[prefix + "Wk"]), params[prefix + "bk"])
    v = ad.add(ad.matmul(x, params[prefix + "Wv"]), params[prefix + "bv"])
    qh, kh, vh = (split_heads(t, heads) for t in (q, k, v))
    scale = 1.0 / np.sqrt(qh.shape[-1])
    scores = ad.mul(ad.matmul(qh, _swap_axes(kh, -1, -2)), scale)
    weights = ad.softmax(scores)
    ctx = merge_heads(ad.matmul(weights, vh))
    out = ad.add(ad.matmul(ctx, params[prefix + "Wo"]), params[prefix + "bo"])
    return out, weights


def multimodal_fusion(t_proj: Tensor, v_proj: Tensor, params: dict[str, Tensor],
                      cfg: FusionConfig) -> FusedOutput:
    """Concatenate projected modalities text-first and fuse them.

    With ``blocks == 0`` the output is exactly the concatenation, which makes
    the projection path testable in isolation.
    """
    n_attr = t_proj.shape[-2]
    x = ad.concat([t_proj, v_proj], axis=t_proj.ndim - 2)
    attention = []
    for i in range(cfg.blocks):
        p = f"fuse.{i}."
        h = ad.layer_norm(x, params[p + "ln1.gain"], params[p + "ln1.bias"])
        attn_out, weights = _self_attention(h, params, p + "attn.", cfg.heads)
        attention.append(weights.data)
        x = ad.add(x, attn_out)
        h2 = ad.layer_norm(x, params[p + "ln2.gain"], params[p + "ln2.bias"])
        ff = ad.matmul(ad.gelu(ad.matmul(h2, params[p + "ffn.W1"]) + params[p + "ffn.b1"]),
                       params[p + "ffn.W2"]) + params[p + "ffn.b2"]
        x = ad.add(x, ff)
    attr = ad.slice_axis(x, x.ndim - 2, 0, n_attr)
    return FusedOutput(all_tokens=x, attr_tokens=attr, attention=attention)
