"""Two-dimensional constrained target: Q-method against p-method.

The target is exp(-(x1 + x2)) restricted to the disk x1^2 + x2^2 <= 2 inside
the box [-2, 2]^2. Its mass piles up at the disk edge near (-1, -1).

Run: python demos/01_toy2d_q_vs_p.py
Writes demos/out/toy2d_q.svg and demos/out/toy2d_p.svg.
"""

# %% Setup
from pathlib import Path

import numpy as np

from constrained_svgd import SoftFormulation, SolveConfig, StepControl, emd, rejection_sample, solve_p, solve_q
from constrained_svgd.problems import toy2d_problem
from constrained_svgd.svg import scatter_svg

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
P = toy2d_problem()
n = 200

# %% Ground truth by rejection sampling
truth = rejection_sample(P, n, seed=1000).samples
print("rejection-sample mean", truth.mean(axis=0).round(3))

# %% Q-method: every particle is pushed into the feasible set on its own
F = SoftFormulation.create("auglag", P.constraints, c=1.0, d_w=1.0)
cfg = SolveConfig(n_particles=n, seed=0, inner_tol=1e-4, outer_tol=1e-3, max_inner=1000, max_outer=30,
                  step=StepControl(eps0=0.5, min_eps=1e-3))
rq = solve_q(P, F, cfg)
print(f"Q: converged={rq.converged} steps={rq.total_gradient_steps} EMD={emd(rq.particles, truth):.3f}")

# %% p-method: the penalty is part of the target and is shared through the kernel
F = SoftFormulation.create("auglag", P.constraints, c=1.0, d_w=1.0)
cfg = SolveConfig(n_particles=n, seed=0, inner_tol=1e-4, outer_tol=1e-3, max_inner=1000, max_outer=30,
                  step=StepControl(eps0=0.5, min_eps=1e-3), mapping="none")
rp = solve_p(P, F, cfg)
print(f"p: converged={rp.converged} steps={rp.total_gradient_steps} EMD={emd(rp.particles, truth):.3f}")

# %% Pictures with the feasible disk drawn in
disk = [((0.0, 0.0), float(np.sqrt(2.0)))]
for name, r in (("q", rq), ("p", rp)):
    (out / f"toy2d_{name}.svg").write_text(scatter_svg(r.particles, disk, extent=((-2, -2), (2, 2))))
print("pictures in", out)
