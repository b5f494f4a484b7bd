"""The pieces the solvers are made of.

Rigid-body exp and log maps, the two kernels, soft constraint formulations and
the optimal-assignment Earth Mover Distance.

Run: python demos/05_building_blocks.py
"""

# %% Rigid-body maps: log is the inverse of exp away from half-turns
import numpy as np

from constrained_svgd import (Constraint, ConstraintSet, SoftFormulation, emd, median_bandwidth, rbf_kernel, se3_kernel,
                              soft_value)
from constrained_svgd import se3

xi = np.array([[0.1, -0.2, 0.3, 0.0, 0.0, np.pi / 2]])
T = se3.se3_exp(xi)
print("quarter turn about z, translation part:", T.t.round(3), " log:", se3.se3_log(T).round(6))

# %% Kernels: RBF on vectors and a screw-distance kernel on poses
X = np.random.default_rng(0).standard_normal((4, 2))
print("RBF kernel with the median bandwidth\n", rbf_kernel(X, median_bandwidth(X)).K.round(3))
poses = np.array([[0, 0, 0, 0, 0, 0.0], [0, 0, 0, 0, 0, np.pi - 1e-9]])
print("pose kernel, half turn apart, h = 1:", se3_kernel(poses, h=1.0).K[0, 1].round(5), "vs", np.exp(-np.pi**2).round(5))

# %% Soft formulations of one inequality x <= 1
g = Constraint(lambda Z: Z[:, :1] - 1.0, lambda Z: np.ones((len(Z), 1, 1)), 1, "x<=1")
C = ConstraintSet([], [g])
Z = np.array([[0.5], [1.5]])
for kind in ("quadpenalty", "auglag", "relaxedlogbarrier"):
    F = SoftFormulation.create(kind, C)
    print(f"{kind:18s} cost at x=0.5, 1.5:", soft_value(F, C, Z).round(4))

# %% Earth Mover Distance between equal-size sets
A = np.array([[0.0, 0.0], [1.0, 0.0]])
B = np.array([[1.0, 1.0], [0.0, 1.0]])
print("EMD of two unit-shifted pairs:", emd(A, B))
