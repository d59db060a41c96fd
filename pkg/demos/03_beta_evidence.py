"""
From evidence to calibrated doubt
=================================

Instead of a bare sigmoid probability, each attribute head emits two
non-negative evidence values: support for "present" and support for
"absent". They parameterize a Beta distribution (alpha = pos + 1,
beta = neg + 1) whose mean is the prediction and whose total mass sets
the vacuity u = 2 / (alpha + beta): u near 1 means the model has seen
nothing decisive, u near 0 means a lot of evidence either way.
"""

import numpy as np

from evipar.autodiff import Tensor
from evipar.evidential import (BetaBundle, awr_loss, beta_mse_loss, edl_loss)

###############################################################################
# Three regimes with the same 3:1 evidence ratio but different volume.
# The prediction barely moves; the vacuity collapses as evidence piles up.

print(f"{'pos':>6} {'neg':>6} {'p_hat':>7} {'vacuity':>8}")
for scale in (0.3, 3.0, 30.0):
    bundle = BetaBundle(Tensor(np.array([3 * scale])), Tensor(np.array([scale])))
    print(f"{3 * scale:6.1f} {scale:6.1f} "
          f"{bundle.p_hat.item():7.3f} {bundle.u.item():8.3f}")

###############################################################################
# The Beta form of the squared error has a closed form with a built-in
# variance term: E[(y - theta)^2] = (y - mean)^2 + var. A quick Monte
# Carlo draw confirms it.

rng = np.random.default_rng(0)
alpha, beta, y = 4.0, 2.0, 1.0
bundle = BetaBundle(Tensor(np.array([alpha - 1])), Tensor(np.array([beta - 1])))
closed = beta_mse_loss(bundle, np.array([y])).item()
draws = rng.beta(alpha, beta, 200_000)
print(f"\nclosed-form E[(y-theta)^2] {closed:.5f} "
      f"vs Monte Carlo {np.mean((y - draws) ** 2):.5f}")

###############################################################################
# Wrong-direction evidence is what the AWR penalty prices: for a positive
# label it charges the negative evidence and vice versa. A confident
# mistake is expensive; honest ignorance is cheap.

cases = {
    "confident right": (np.array([8.0]), np.array([0.5])),
    "confident wrong": (np.array([0.5]), np.array([8.0])),
    "ignorant":        (np.array([0.1]), np.array([0.1])),
}
print(f"\n{'case':18s} {'EDL(lam=1)':>11} {'AWR':>7}   for y = 1")
for name, (pos, neg) in cases.items():
    b = BetaBundle(Tensor(pos), Tensor(neg))
    print(f"{name:18s} {edl_loss(b, np.array([1.0]), lam=1.0).item():11.3f} "
          f"{awr_loss(b, np.array([1.0])).item():7.3f}")
