"""
Two stages, one dial per epoch
==============================

Training walks a fixed curriculum. Stage I is self-paced: each batch
keeps only its easiest fraction q, and q grows linearly to 1 across the
warmup. Stage II switches to the evidential loss and re-weights samples
by a Gaussian bump over their mean vacuity whose center drifts from
low-uncertainty (consolidate the easy) to high-uncertainty (attack the
frontier), while the variance penalty ramps up alongside.
"""

import numpy as np

from evipar.curriculum import (CurriculumSchedule, gaussian_weights,
                               pacing_weights)

sched = CurriculumSchedule(warmup_epochs=6, total_epochs=12)

###############################################################################
# The per-epoch knob values. q only matters in Stage I; the center c and
# the ramp weight lam only matter in Stage II.

print(f"{'epoch':>5} {'stage':>5} {'q':>6} {'c':>6} {'lam':>6}")
for epoch in range(1, sched.total_epochs + 1):
    s = sched.at(epoch)
    print(f"{epoch:5d} {s.stage:>5} {s.q:6.2f} {s.c:6.2f} {s.lam:6.2f}")

###############################################################################
# Stage I pacing on a toy batch: losses are fixed, the retained set grows
# with q and never drops a sample it already accepted.

rng = np.random.default_rng(0)
losses = rng.random(12)
order = np.argsort(losses)
print("\nsamples sorted easy -> hard:", order.tolist())
for epoch in (1, 3, 6):
    keep = pacing_weights(losses, sched.at(epoch).q)
    kept = np.nonzero(keep)[0]
    print(f"epoch {epoch}: q={sched.at(epoch).q:.2f} retains {kept.tolist()}")

###############################################################################
# Stage II weighting: the same batch of per-sample vacuities gets a bump
# that tracks the moving center. Early Stage II favors low-vacuity
# samples; by the end the weight sits on the uncertain ones.

u_bar = np.linspace(0.05, 0.95, 10)
print("\nper-sample vacuity:", np.round(u_bar, 2).tolist())
for epoch in (7, 10, 12):
    s = sched.at(epoch)
    w = gaussian_weights(u_bar, s.c, s.sigma)
    bars = "".join("#" if v > 0.6 else "+" if v > 0.2 else "." for v in w)
    print(f"epoch {epoch}: c={s.c:.2f} weights {bars}")
