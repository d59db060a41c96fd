"""
Steering cross-attention with a body-region prior
=================================================

Each attribute knows which body region should carry its evidence: a hat
lives in the head band, a skirt in the lower band, "female" is global.
The region map turns that knowledge into a sign template over tokens,
and a learnable scale gamma converts the template into an additive
attention bias: +gamma on the attribute's own patches, -gamma on other
patches, 0 on non-patch tokens. This script shows the template and how
strongly it concentrates a freshly initialized model's attention.
"""

import numpy as np

from evipar.cli import model_init_rng
from evipar.model import AttributeModel, ModelConfig
from evipar.raer import RegionMap

###############################################################################
# Four attributes on an 8-row x 2-column patch grid. Rows are split into
# head / upper / lower / foot bands by fractional height.

regions = ["head", "upper", "lower", "global"]
names = ["hat", "jacket", "skirt", "female"]
rmap = RegionMap(regions=regions, grid=(8, 2))
for name, region in zip(names, regions):
    print(f"{name:8s} -> {region:7s} patches {rmap.region_patches(region).tolist()}")

###############################################################################
# The sign template has one row per attribute and one column per token
# (text rows, then cls, then patches). Printing the patch block makes the
# banding visible: +1 on own-region patches, -1 elsewhere.

template = rmap.mask_template(n_tokens=len(regions) + 1 + rmap.n_patches)
patch_block = template[:, len(regions) + 1:].astype(int)
print("\npatch columns of the sign template:")
for name, row in zip(names, patch_block):
    print(f"{name:8s} {''.join('+' if v > 0 else '-' if v < 0 else '.' for v in row)}")

###############################################################################
# Run one forward pass and measure where each attribute's attention lands.
# Even at initialization (gamma = 2) the prior focuses most of the mass on
# the right band; training sharpens it further.

config = ModelConfig(regions=regions, grid=(8, 2), d_v=16, d_t=16, dim=32,
                     blocks=1, heads=4)
model = AttributeModel(config, model_init_rng(0))
rng = np.random.default_rng(1)
visual = rng.standard_normal((17, 16))
text = rng.standard_normal((4, 16))
_, info = model.forward(visual, text)
attention = info["raer_attention"]   # head-averaged weights, (N, tokens)

print("\nattention mass on own region (uniform share in parentheses):")
for j, (name, region) in enumerate(zip(names, regions)):
    cols = len(regions) + 1 + rmap.region_patches(region)
    mass = attention[j, cols].sum()
    uniform = len(cols) / attention.shape[1]
    print(f"{name:8s} {mass:.3f}  ({uniform:.3f})")

###############################################################################
# The gated fusion keeps a blend of the attended region feature and the
# plain attribute feature. The gate starts low on purpose (bias -2): the
# model leans on its original features until the region pathway earns
# trust during training.

print("\nmean gate at initialization:", round(float(info["gate"].mean()), 3))
