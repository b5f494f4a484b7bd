"""Inverse kinematics as a distribution over joint angles.

A six-joint arm should reach a target pose. Two equalities keep the wrist
vertical and the end effector at the target height. The spread of reached
poses grows with the number of particles.

Run: python demos/03_inverse_kinematics.py   (about two minutes)
"""

# %% Setup
import numpy as np

from constrained_svgd import SoftFormulation, SolveConfig, StepControl, solve_q
from constrained_svgd import se3
from constrained_svgd.problems import ik_problem

P = ik_problem()
chain, target = P.info["chain"], P.info["target"]


def solve(n):
    F = SoftFormulation.create("auglag", P.constraints, c=10.0, d_w=10.0)
    cfg = SolveConfig(n_particles=n, seed=0, inner_tol=1e-4, outer_tol=1e-3, max_inner=2000, max_outer=30,
                      max_total_steps=20000, step=StepControl(eps0=0.002, min_eps=1e-9))
    return solve_q(P, F, cfg)


# %% Feasibility and spread at two particle counts
for n in (10, 50):
    r = solve(n)
    d = np.sqrt(se3.weighted_screw_norm(se3.relative_screw(se3.fk(chain, r.particles), target)))
    print(f"{n:3d} particles: converged={r.converged} steps={r.total_gradient_steps} "
          f"max |h|={r.final_violation.max_abs_h:.1e} screw distance median={np.median(d):.3f} max={d.max():.3f}")
