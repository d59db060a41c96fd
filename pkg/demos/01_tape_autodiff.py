"""
Reverse-mode gradients on a recording tape
==========================================

The whole model trains on a small numpy autodiff engine. Operations
compute eagerly; while a ComputationRecord is active they also append
nodes to a tape, and backward() walks that tape once in reverse to fill
in gradients. This script builds a few computations by hand and checks
one gradient against a central finite difference.
"""

import numpy as np

from evipar import autodiff as ad
from evipar.autodiff import ComputationRecord, Tensor, backward

rng = np.random.default_rng(0)

###############################################################################
# A tensor is numpy data plus an optional gradient slot. Outside a record,
# ops are just eager numpy.

x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
w = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
print("eager matmul shape:", ad.matmul(x, w).shape)

###############################################################################
# Record a forward pass and pull gradients back through it. The loss here
# is a scalar so backward seeds it with 1.0.

with ComputationRecord() as rec:
    h = ad.gelu(ad.matmul(x, w))
    loss = ad.mean(ad.mul(h, h))
backward(rec, loss)
print("loss:", round(loss.item(), 6))
print("dloss/dw row 0:", np.round(w.grad[0], 4))

###############################################################################
# Broadcasting follows numpy rules and the backward pass sums gradients
# over the broadcast axes, so a (4,) bias feeding a (2, 4) activation
# accumulates a (4,) gradient.

b = Tensor(np.zeros(4), requires_grad=True)
with ComputationRecord() as rec:
    out = ad.tsum(ad.sigmoid(ad.add(ad.matmul(x, w), b)))
backward(rec, out)
print("bias grad shape:", b.grad.shape)

###############################################################################
# Trust, then verify: nudge one element of w and compare the slope against
# the recorded gradient.

i, j = 1, 2
h_step = 1e-5


def forward():
    return ad.mean(ad.mul(ad.gelu(ad.matmul(x, w)), ad.gelu(ad.matmul(x, w)))).item()


w.grad = None
with ComputationRecord() as rec:
    hh = ad.gelu(ad.matmul(x, w))
    loss = ad.mean(ad.mul(hh, hh))
backward(rec, loss)
analytic = w.grad[i, j]

keep = w.data[i, j]
w.data[i, j] = keep + h_step
up = forward()
w.data[i, j] = keep - h_step
down = forward()
w.data[i, j] = keep
numeric = (up - down) / (2 * h_step)

print(f"analytic {analytic:.8f} vs numeric {numeric:.8f} "
      f"(|diff| {abs(analytic - numeric):.2e})")
