"""Benchmark problems: a 2D toy problem, obstacle-avoiding trajectories, arm
inverse kinematics with placement constraints and point-cloud pose estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import se3
from .constraints import Constraint, ConstraintSet
from .solvers import RBF, SE3, Problem


def toy2d_problem(alpha=1.0, bound=2.0):
    """``f(x) = x1 + x2`` subject to ``x1^2 + x2^2 <= 2`` inside ``[-bound, bound]^2``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    def f(X):
        return X[:, 0] + X[:, 1]

    def grad_f(X):
        return np.ones_like(X)

    disk = Constraint(lambda X: (np.sum(X * X, axis=1) - 2.0)[:, None],
                      lambda X: 2.0 * X[:, None, :], 1, "disk")
    lo, hi = np.full(2, -bound), np.full(2, bound)
    C = ConstraintSet(inequalities=[disk], lo=lo, hi=hi)
    return Problem(2, f, grad_f, alpha, C, RBF, lambda rng, n: rng.uniform(lo, hi, size=(n, 2)), "toy2d",
                   info={"optimum": np.array([-1.0, -1.0])})


# ---------------------------------------------------------------- trajectory

DEFAULT_OBSTACLES = (((1.3, 0.15), 0.45), ((2.1, -0.55), 0.4), ((2.9, 0.35), 0.45))


def _full_path(X, start, goal, T):
    n = X.shape[0]
    W = X.reshape(n, T, 2)
    return np.concatenate([np.broadcast_to(start, (n, 1, 2)), W, np.broadcast_to(goal, (n, 1, 2))], axis=1)


def segment_distances(P, centers):
    """Distance from each segment of each path to each center.

    ``P`` has shape (n, S + 1, 2); returns distances (n, S, O), clamped
    projection parameters ``tau`` and unit directions from center to the
    closest point (zero where the distance vanishes).
    """
    a = P[:, :-1, None, :]
    u = (P[:, 1:] - P[:, :-1])[:, :, None, :]
    w = centers[None, None, :, :] - a
    uu = np.sum(u * u, axis=-1)
    tau = np.where(uu > 0, np.sum(w * u, axis=-1) / np.where(uu > 0, uu, 1.0), 0.0)
    tau = np.clip(tau, 0.0, 1.0)
    diff = a + tau[..., None] * u - centers[None, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    unit = np.where(dist[..., None] > 0, diff / np.where(dist > 0, dist, 1.0)[..., None], 0.0)
    return dist, tau, unit


def trajectory_problem(start=(0.0, 0.0), goal=(4.0, 0.0), T=20, obstacles=DEFAULT_OBSTACLES, alpha=1.0,
                       init_noise=0.3):
    """Waypoint trajectory with squared second differences as cost and one
    inequality ``r - dist(segment, center) <= 0`` per segment and obstacle.

    Decision vector: the T free waypoints flattened as ``(x1, y1, ..., xT, yT)``.
    """
    if T < 2:
        raise ValueError("need at least two free waypoints")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    centers = np.array([c for c, _ in obstacles], dtype=float).reshape(-1, 2)
    radii = np.array([r for _, r in obstacles], dtype=float)
    for c, r in zip(centers, radii):
        if np.linalg.norm(start - c) <= r or np.linalg.norm(goal - c) <= r:
            raise ValueError("obstacles must not contain start or goal")
    d = 2 * T

    def f(X):
        P = _full_path(X, start, goal, T)
        A = P[:, 2:] - 2.0 * P[:, 1:-1] + P[:, :-2]
        return np.sum(A * A, axis=(1, 2))

    def grad_f(X):
        P = _full_path(X, start, goal, T)
        A = P[:, 2:] - 2.0 * P[:, 1:-1] + P[:, :-2]
        G = np.zeros_like(P)
        G[:, 2:] += 2.0 * A
        G[:, 1:-1] -= 4.0 * A
        G[:, :-2] += 2.0 * A
        return G[:, 1:-1].reshape(X.shape[0], d)

    n_seg = T + 1

    def g(X):
        dist, _, _ = segment_distances(_full_path(X, start, goal, T), centers)
        return (radii[None, None, :] - dist).reshape(X.shape[0], -1)

    def g_jac(X):
        n = X.shape[0]
        dist, tau, unit = segment_distances(_full_path(X, start, goal, T), centers)
        J = np.zeros((n, n_seg, len(radii), T + 2, 2))
        s = np.arange(n_seg)
        J[:, s, :, s, :] = np.moveaxis(-(1.0 - tau)[..., None] * unit, 1, 0)
        J[:, s, :, s + 1, :] += np.moveaxis(-tau[..., None] * unit, 1, 0)
        return J[:, :, :, 1:-1, :].reshape(n, n_seg * len(radii), d)

    C = ConstraintSet(inequalities=[Constraint(g, g_jac, n_seg * len(radii), "obstacles")])
    line = start + (goal - start) * np.arange(1, T + 1)[:, None] / (T + 1)

    def init(rng, n):
        return (line[None] + init_noise * rng.standard_normal((n, T, 2))).reshape(n, d)

    return Problem(d, f, grad_f, alpha, C, RBF, init, "trajectory",
                   info={"start": start, "goal": goal, "T": T, "obstacles": list(zip(centers.tolist(), radii.tolist()))})


# ------------------------------------------------------------ inverse kinematics

DEFAULT_IK_JOINTS = np.array([0.4, 0.6, 0.5, 0.0, -1.1, 0.3])


def default_ik_target(chain=None):
    """End-effector pose of a configuration whose wrist points straight up."""
    chain = chain or se3.default_arm()
    T = se3.fk(chain, DEFAULT_IK_JOINTS)
    return se3.Transform(T.R, T.t)


def wrist_tilt(chain, Q):
    """Squared x/y rotational screw components of ``log(fk(q))``."""
    w = se3.so3_log(se3.fk(chain, Q).R, strict=False)
    return w[:, 0] ** 2 + w[:, 1] ** 2


def ik_problem(chain=None, target=None, W=None, alpha=10.0, z_target=None, init_spread=1.0):
    """Joint-space target ``exp(-alpha ||log(fk(q)^-1 T)||_W^2)`` with a
    vertical-wrist equality and an end-effector height equality, joint limits
    as box bounds.

    Initial particles are uniform in ``[-init_spread, init_spread]`` per joint
    (clipped to the limits; ``None`` uses the full limits).
    """
    chain = chain or se3.default_arm()
    target = target or default_ik_target(chain)
    target.validate()
    if np.linalg.norm(target.t) >= chain.reach:
        raise ValueError("target is out of reach")
    z_target = float(target.t[2]) if z_target is None else float(z_target)
    m = chain.m

    def f(Q):
        return se3.pose_cost(chain, Q, target, W)

    def grad_f(Q):
        return se3.pose_cost_and_grad(chain, Q, target, W)[1]

    def h1(Q):
        return wrist_tilt(chain, Q)[:, None]

    def h1_jac(Q):
        w, J = se3.rotation_log_jacobian(chain, Q)
        return (2.0 * w[:, 0, None] * J[:, 0] + 2.0 * w[:, 1, None] * J[:, 1])[:, None, :]

    def h2(Q):
        return ((se3.fk(chain, Q).t[:, 2] - z_target) ** 2)[:, None]

    def h2_jac(Q):
        p, J = se3.position_jacobian(chain, Q)
        return (2.0 * (p[:, 2] - z_target)[:, None] * J[:, 2])[:, None, :]

    C = ConstraintSet(
        equalities=[Constraint(h1, h1_jac, 1, "wrist_vertical"), Constraint(h2, h2_jac, 1, "height")],
        lo=chain.lo, hi=chain.hi)
    lo = chain.lo if init_spread is None else np.maximum(chain.lo, -init_spread)
    hi = chain.hi if init_spread is None else np.minimum(chain.hi, init_spread)

    def init(rng, n):
        return rng.uniform(lo, hi, size=(n, m))

    return Problem(m, f, grad_f, alpha, C, RBF, init, "ik",
                   info={"chain": chain, "target": target, "W": W, "z_target": z_target})


# -------------------------------------------------------------------- ICP


@dataclass
class CylinderScene:
    """Synthetic tabletop scene: a cylinder standing on a disk-shaped table
    seen from one camera. ``object_model`` is the full cylinder in its own frame
    (origin at the cylinder center); ``scene_object`` holds the visible object
    points in the world frame and ``table_points`` the visible table, missing the
    shadow cast by the object."""

    object_model: np.ndarray
    scene_object: np.ndarray
    table_points: np.ndarray
    center: np.ndarray
    radius: float
    height: float
    table_radius: float
    camera: np.ndarray

    @property
    def scene_points(self):
        return np.concatenate([self.scene_object, self.table_points])


def cylinder_scene(seed=0, radius=0.08, height=0.25, center_xy=(0.1, 0.05), table_radius=0.5, n_model=400,
                   n_surface=1200, n_table=800, noise=0.002, camera=(1.2, -0.3, 0.9)):
    rng = np.random.default_rng(seed)
    camera = np.asarray(camera, dtype=float)
    center = np.array([center_xy[0], center_xy[1], height / 2.0])

    def surface(k):
        n_side = int(round(k * 2 * np.pi * radius * height / (2 * np.pi * radius * height + np.pi * radius**2)))
        ang = rng.uniform(0, 2 * np.pi, n_side)
        z = rng.uniform(-height / 2, height / 2, n_side)
        side = np.stack([radius * np.cos(ang), radius * np.sin(ang), z], axis=1)
        rr = radius * np.sqrt(rng.uniform(0, 1, k - n_side))
        aa = rng.uniform(0, 2 * np.pi, k - n_side)
        top = np.stack([rr * np.cos(aa), rr * np.sin(aa), np.full(k - n_side, height / 2)], axis=1)
        return side, top

    side, top = surface(n_model)
    model = np.concatenate([side, top])

    side, top = surface(n_surface)
    normals = side * np.array([1.0, 1.0, 0.0]) / radius
    world_side = side + center
    visible = np.sum(normals * (camera - world_side), axis=1) > 0
    scene_object = np.concatenate([world_side[visible], top + center])
    scene_object = scene_object + noise * rng.standard_normal(scene_object.shape)

    rr = table_radius * np.sqrt(rng.uniform(0, 1, n_table))
    aa = rng.uniform(0, 2 * np.pi, n_table)
    table = np.stack([rr * np.cos(aa), rr * np.sin(aa), np.zeros(n_table)], axis=1)
    # occlusion: the ray from the camera to a table point passes through the cylinder
    t = np.linspace(0.0, 1.0, 64)[None, :, None]
    rays = camera + t * (table[:, None, :] - camera)
    radial = np.linalg.norm(rays[..., :2] - center[:2], axis=-1)
    blocked = np.any((radial < radius) & (rays[..., 2] < height) & (rays[..., 2] > 0), axis=1)
    table = table[~blocked]
    table = table + noise * rng.standard_normal(table.shape) * np.array([0.0, 0.0, 1.0])
    return CylinderScene(model, scene_object, table, center, radius, height, table_radius, camera)


def nearest_distances(points, scene, chunk=200_000):
    """Euclidean distance from each of ``points`` (..., 3) to its nearest scene point."""
    flat = points.reshape(-1, 3)
    out = np.empty(len(flat))
    s2 = np.sum(scene * scene, axis=1)
    rows = max(1, chunk // max(1, len(scene)))
    for i in range(0, len(flat), rows):
        p = flat[i:i + rows]
        d2 = np.sum(p * p, axis=1)[:, None] + s2[None, :] - 2.0 * p @ scene.T
        idx = np.argmin(d2, axis=1)
        out[i:i + rows] = np.linalg.norm(p - scene[idx], axis=1)
    return out.reshape(points.shape[:-1])


def icp_cost(poses, subset, scene, d_max, tree=None):
    """Truncated mean nearest-neighbour distance of the transformed subset.

    ``tree`` is an optional ``cKDTree`` over ``scene`` for exact but faster
    nearest-neighbour queries; without it the search is brute force."""
    T = se3.Transform.from_pose_vector(poses)
    moved = T.apply(subset)
    if tree is None:
        d = nearest_distances(moved, scene)
    else:
        d = tree.query(moved.reshape(-1, 3))[0].reshape(moved.shape[:-1])
    return np.sum(np.where(d < d_max, d, 0.0), axis=-1) / (1.0 + subset.shape[0])


def icp_problem(scene=None, object_points=None, N=64, d_max=0.1, r=None, seed=0, alpha=50.0, z_init=(0.0, 0.25),
                fd_step=1e-6, kernel_bandwidth=0.1):
    """Pose distribution for aligning ``object_points`` to ``scene``.

    Decision vector: (translation, axis-angle). The N-point object subset is
    redrawn from a stream seeded by ``(seed, sweep)`` at every solver sweep and
    held fixed while a gradient is evaluated. The truncated cost is flat away
    from the object, so the pose kernel uses a fixed bandwidth
    (``kernel_bandwidth``; None selects the median rule): the median rule
    spreads particles over the whole table and repulsion then drives most of
    them off the object.
    """
    if scene is None or object_points is None:
        cyl = cylinder_scene(seed)
        scene = cyl.scene_object if scene is None else scene
        object_points = cyl.object_model if object_points is None else object_points
        r = cyl.table_radius if r is None else r
    scene = np.asarray(scene, dtype=float)
    object_points = np.asarray(object_points, dtype=float)
    if len(scene) == 0 or len(object_points) == 0:
        raise ValueError("point clouds must be nonempty")
    if N > len(object_points):
        raise ValueError("subset size exceeds the object cloud")
    if not d_max > 0:
        raise ValueError("d_max must be positive")
    r = 0.5 if r is None else float(r)
    state = {"subset": object_points[np.random.default_rng([seed, 0]).choice(len(object_points), N, replace=False)]}

    def resample(sweep):
        rng = np.random.default_rng([seed, sweep + 1])
        state["subset"] = object_points[rng.choice(len(object_points), N, replace=False)]

    tree = cKDTree(scene)

    def f(X):
        return icp_cost(X, state["subset"], scene, d_max, tree)

    def grad_f(X):
        # correspondences and inliers are fixed at the base pose, like the
        # subset; the difference quotient of a nearest distance equals that of
        # its active branch away from ties, and freezing the inliers keeps the
        # truncation seam from turning into spikes
        sub = state["subset"]
        base, idx = tree.query(se3.Transform.from_pose_vector(X).apply(sub).reshape(-1, 3))
        inlier = base.reshape(len(X), -1) < d_max
        partner = scene[idx].reshape(len(X), -1, 3)
        reps = 2 * X.shape[1]

        def masked(Z):
            moved = se3.Transform.from_pose_vector(Z).apply(sub)
            d = np.linalg.norm(moved - np.tile(partner, (reps, 1, 1)), axis=-1)
            return (np.sum(np.where(np.tile(inlier, (reps, 1)), d, 0.0), axis=1) / (1.0 + len(sub)))[:, None]

        return se3.central_difference(masked, X, fd_step)[:, 0, :]

    below = Constraint(lambda X: -X[:, 2:3], lambda X: np.tile(np.array([[[0, 0, -1.0, 0, 0, 0]]]), (len(X), 1, 1)),
                       1, "above_table")

    def disk_jac(X):
        J = np.zeros((len(X), 1, 6))
        J[:, 0, 0] = 2 * X[:, 0]
        J[:, 0, 1] = 2 * X[:, 1]
        return J

    disk = Constraint(lambda X: (X[:, 0] ** 2 + X[:, 1] ** 2 - r**2)[:, None], disk_jac, 1, "on_table")

    def upright_jac(X):
        J = np.zeros((len(X), 1, 6))
        J[:, 0, 3] = 2 * X[:, 3]
        J[:, 0, 4] = 2 * X[:, 4]
        return J

    upright = Constraint(lambda X: (X[:, 3] ** 2 + X[:, 4] ** 2)[:, None], upright_jac, 1, "upright")
    C = ConstraintSet(equalities=[upright], inequalities=[below, disk])

    def init(rng, n):
        rad = r * np.sqrt(rng.uniform(0, 1, n))
        ang = rng.uniform(0, 2 * np.pi, n)
        z = rng.uniform(z_init[0], z_init[1], n)
        v = rng.standard_normal((n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        rot = v * (np.pi * np.cbrt(rng.uniform(0, 1, n)))[:, None]
        return np.column_stack([rad * np.cos(ang), rad * np.sin(ang), z, rot])

    P = Problem(6, f, grad_f, alpha, C, SE3, init, "icp", sweep_hook=resample,
                info={"scene": scene, "object": object_points, "N": N, "d_max": d_max, "r": r, "state": state})
    P.kernel_bandwidth = None if kernel_bandwidth is None else float(kernel_bandwidth)
    return P
