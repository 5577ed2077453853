# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Named nonsmooth test problems
#
# Nine of the bundled chained problems have known optimal values at every
# dimension. We solve each at `n = 50` and stop as soon as the value is within
# a fixed distance of the optimum.

# %%
import math

import numpy as np

from gradsamp import NAMED, SolverConfig, minimize, named

n = 50
targets = {name: 1e-2 for name in ("MaxQ", "MxHilb", "ActiveFaces", "ChainedCrescent1",
                                   "ChainedCrescent2", "BrownFunction2")}
targets["ChainedLQ"] = -(n - 1) * math.sqrt(2) + 1e-1
targets["ChainedCB3_1"] = targets["ChainedCB3_2"] = 2 * (n - 1) + 1e-1
print("available:", ", ".join(NAMED))

# %%
print(f"{'problem':18s} {'target':>12s} {'f':>13s} {'iters':>6s} {'qp':>6s} {'grads':>6s}")
for name, target in targets.items():
    cfg = SolverConfig(seed=0, time_limit=60.0, f_tol=float(np.nextafter(target, np.inf)))
    rep = minimize(named(name, n), cfg)
    print(f"{name:18s} {target:12.4e} {rep.final_f:13.6e} {rep.iters:6d} {rep.qp_iters:6d} {rep.grads:6d}")

# %% [markdown]
# ## The radius and inexactness schedule
#
# Each iteration either shrinks the sampling radius (and resets `sigma`),
# keeps both parameters, or halves `sigma` after a short step. Starting from a
# wide radius makes shrinks visible within a few iterations. A larger
# `alpha_lo` turns short accepted steps into `sigma` reductions.

# %%
cfg = SolverConfig(seed=3, eps0=3.0, alpha_lo=0.1, max_iters=30, record_history=True)
rep = minimize(named("ChainedLQ", 10), cfg)
for r in rep.history:
    event = ("shrink" if r.kind == "radius_shrink" else "keep" if r.alpha >= cfg.alpha_lo else "sigma down")
    print(f"k={r.k:2d} eps={r.epsilon:7.4f} sigma={r.sigma:8.4f} alpha={r.alpha:7.4f} "
          f"columns={r.columns:3d} {event}")
