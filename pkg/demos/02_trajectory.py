"""Trajectory distribution around circular obstacles.

Each particle is a 20-waypoint path from (0, 0) to (4, 0). The cost is the
sum of squared second differences and every segment must keep clear of three
disks. The run compares augmented Lagrangian and quadratic penalty step counts.

Run: python demos/02_trajectory.py
Writes demos/out/trajectory.svg.
"""

# %% Setup
from pathlib import Path

import numpy as np

from constrained_svgd import SoftFormulation, SolveConfig, StepControl, solve_q
from constrained_svgd.problems import trajectory_problem
from constrained_svgd.svg import scatter_svg

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
P = trajectory_problem(alpha=10.0)
T = P.info["T"]

# %% Same start, two formulations
reports = {}
for kind in ("auglag", "quadpenalty"):
    F = SoftFormulation.create(kind, P.constraints, c=1.0, d_w=1.0)
    cfg = SolveConfig(n_particles=20, seed=0, inner_tol=1e-4, outer_tol=1e-4, max_inner=1000, max_outer=20,
                      step=StepControl(eps0=0.1, min_eps=1e-3))
    reports[kind] = r = solve_q(P, F, cfg)
    print(f"{kind:12s} converged={r.converged} steps={r.total_gradient_steps} "
          f"max violation={r.final_violation.max_pos_g:.1e}")

# %% Paths as polylines over the obstacles
X = reports["auglag"].particles
lines = [np.vstack([P.info["start"], x.reshape(T, 2), P.info["goal"]]) for x in X]
circles = [(tuple(c), r) for c, r in P.info["obstacles"]]
(out / "trajectory.svg").write_text(scatter_svg(X.reshape(-1, 2), circles, lines))
print("picture in", out)
