"""Rigid-body geometry: SO(3)/SE(3) exp and log maps, weighted screw norms and
serial-chain forward kinematics.

All functions broadcast over leading batch dimensions. Screws are 6-vectors
ordered ``[t_x, t_y, t_z, r_x, r_y, r_z]`` (translation part first), so the
rotational x/y components sit at indices 3 and 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

# Below these angles the closed-form coefficients are replaced by their series.
_SMALL_ANGLE = 1e-7
_SMALL_ANGLE_V = 1e-4
# Distance from pi at which the log switches to the symmetric-part axis recovery.
_NEAR_PI = 1e-3
LOG_BRANCH_MARGIN = 1e-6


def hat(w):
    """Skew-symmetric matrix of a (batched) 3-vector."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def vee(M):
    M = np.asarray(M, dtype=float)
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def so3_exp(w):
    """Rodrigues formula, ``w`` is an axis-angle vector of shape (..., 3)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    small = theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    A = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    B = np.where(small, 0.5 - theta**2 / 24.0, 2.0 * np.sin(safe / 2.0) ** 2 / safe**2)
    W = hat(w)
    return np.eye(3) + A[..., None, None] * W + B[..., None, None] * (W @ W)


def rotation_angle(R):
    R = np.asarray(R, dtype=float)
    v = vee(R - np.swapaxes(R, -1, -2))
    s = 0.5 * np.linalg.norm(v, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)


def so3_log(R, strict=True):
    """Axis-angle vector of a rotation matrix (principal branch).

    With ``strict=True`` rotations within ``LOG_BRANCH_MARGIN`` of pi raise
    :class:`GeometryError`; otherwise the axis is recovered from the symmetric
    part near pi (sign chosen by the antisymmetric part when it is nonzero).
    """
    R = np.asarray(R, dtype=float)
    v = vee(R - np.swapaxes(R, -1, -2))
    s = 0.5 * np.linalg.norm(v, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)
    if strict and np.any(theta >= np.pi - LOG_BRANCH_MARGIN):
        raise GeometryError("rotation angle at pi is outside the principal log branch")

    small = theta < _SMALL_ANGLE
    safe_s = np.where(small | (s == 0.0), 1.0, s)
    scale = np.where(small, 0.5 * (1.0 + theta**2 / 6.0), 0.5 * theta / safe_s)
    w = scale[..., None] * v

    near_pi = theta > np.pi - _NEAR_PI
    if np.any(near_pi):
        Rn = R[near_pi]
        cn = c[near_pi]
        S = 0.5 * (Rn + np.swapaxes(Rn, -1, -2)) - cn[:, None, None] * np.eye(3)
        S = S / (1.0 - cn)[:, None, None]
        diag = np.diagonal(S, axis1=-2, axis2=-1)
        k = np.argmax(diag, axis=-1)
        idx = np.arange(len(k))
        axis = S[idx, :, k] / np.sqrt(np.maximum(diag[idx, k], 1e-300))[:, None]
        axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
        sign = np.sign(np.sum(axis * v[near_pi], axis=-1))
        sign = np.where(sign == 0.0, 1.0, sign)
        w[near_pi] = (sign * theta[near_pi])[:, None] * axis
    return w


def _v_coefficients(theta):
    small = theta < _SMALL_ANGLE_V
    safe = np.where(small, 1.0, theta)
    B = np.where(small, 0.5 - theta**2 / 24.0, 2.0 * np.sin(safe / 2.0) ** 2 / safe**2)
    C = np.where(small, 1.0 / 6.0 - theta**2 / 120.0, (safe - np.sin(safe)) / safe**3)
    return B, C


def left_jacobian_inverse(w):
    """Inverse of the SO(3) left Jacobian; also the map from translation to the
    screw's translational part."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    small = theta < _SMALL_ANGLE_V
    safe = np.where(small, 1.0, theta)
    half = safe / 2.0
    # 1/t^2 - (1 + cos t) / (2 t sin t), written via cot(t/2) for stability near pi
    D = np.where(
        small,
        1.0 / 12.0 + theta**2 / 720.0 + theta**4 / 30240.0,
        (1.0 - half * np.cos(half) / np.sin(half)) / safe**2,
    )
    W = hat(w)
    return np.eye(3) - 0.5 * W + D[..., None, None] * (W @ W)


@dataclass
class Transform:
    """Rigid transform ``x -> R x + t``. ``R`` may carry batch dimensions."""

    R: np.ndarray
    t: np.ndarray = field(default=None)

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        if self.t is None:
            self.t = np.zeros(self.R.shape[:-2] + (3,))
        self.t = np.asarray(self.t, dtype=float)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(M[..., :3, :3], M[..., :3, 3])

    @classmethod
    def from_pose_vector(cls, x):
        """Pose vector ``(t, axis-angle)`` of shape (..., 6)."""
        x = np.asarray(x, dtype=float)
        return cls(so3_exp(x[..., 3:]), x[..., :3])

    @classmethod
    def translation(cls, t):
        return cls(np.eye(3), t)

    def matrix(self):
        M = np.zeros(self.R.shape[:-2] + (4, 4))
        M[..., :3, :3] = self.R
        M[..., :3, 3] = self.t
        M[..., 3, 3] = 1.0
        return M

    def __matmul__(self, other):
        if isinstance(other, Transform):
            return Transform(self.R @ other.R, (self.R @ other.t[..., None])[..., 0] + self.t)
        return NotImplemented

    def inverse(self):
        Rt = np.swapaxes(self.R, -1, -2)
        return Transform(Rt, -(Rt @ self.t[..., None])[..., 0])

    def apply(self, points):
        """Transform points of shape (..., k, 3)."""
        return points @ np.swapaxes(self.R, -1, -2) + self.t[..., None, :]

    def validate(self, tol=1e-9):
        RtR = np.swapaxes(self.R, -1, -2) @ self.R
        if not np.all(np.isfinite(self.R)) or not np.all(np.isfinite(self.t)):
            raise GeometryError("non-finite transform")
        if np.max(np.abs(RtR - np.eye(3))) > tol:
            raise GeometryError("rotation block is not orthonormal")
        if np.max(np.abs(np.linalg.det(self.R) - 1.0)) > tol:
            raise GeometryError("rotation block has det != +1")
        return self


def se3_log(T, strict=True):
    """Screw ``(rho, omega)`` with ``exp(screw) == T``."""
    w = so3_log(T.R, strict=strict)
    rho = (left_jacobian_inverse(w) @ T.t[..., None])[..., 0]
    return np.concatenate([rho, w], axis=-1)


def se3_exp(xi):
    xi = np.asarray(xi, dtype=float)
    rho, w = xi[..., :3], xi[..., 3:]
    theta = np.linalg.norm(w, axis=-1)
    B, C = _v_coefficients(theta)
    W = hat(w)
    V = np.eye(3) + B[..., None, None] * W + C[..., None, None] * (W @ W)
    return Transform(so3_exp(w), (V @ rho[..., None])[..., 0])


def _weight_diagonal(W):
    W = np.asarray(W, dtype=float)
    if W.ndim == 2:
        W = np.diagonal(W)
    if W.shape != (6,):
        raise ValueError("W must be a 6x6 diagonal matrix or a length-6 vector")
    if np.any(W < 0):
        raise ValueError("W must be nonnegative")
    return W


def weighted_screw_norm(xi, W=None):
    """``xi^T W xi`` for diagonal ``W`` (defaults to identity)."""
    xi = np.asarray(xi, dtype=float)
    w = np.ones(6) if W is None else _weight_diagonal(W)
    return np.sum(w * xi * xi, axis=-1)


def relative_screw(Ta, Tb, strict=False):
    """Screw of ``Ta^-1 Tb``."""
    return se3_log(Ta.inverse() @ Tb, strict=strict)


@dataclass
class Joint:
    axis: np.ndarray
    offset: Transform

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(self.axis)
        if not np.isclose(n, 1.0, atol=1e-12):
            raise ValueError("joint axis must be a unit vector")


@dataclass
class KinematicChain:
    """Serial chain of revolute joints. Each joint first applies its fixed
    offset and then rotates about its local axis; ``tool`` is applied last."""

    joints: list
    lo: np.ndarray
    hi: np.ndarray
    tool: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != (self.m,) or self.hi.shape != (self.m,):
            raise ValueError("joint limits must have one entry per joint")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("joint limits must be finite")

    @property
    def m(self):
        return len(self.joints)

    @property
    def reach(self):
        return float(sum(np.linalg.norm(j.offset.t) for j in self.joints) + np.linalg.norm(self.tool.t))


def default_arm():
    """Six-joint all-revolute arm used by the inverse kinematics benchmark.

    Links of (0.33, 0.33, 0.33, 0.18, 0.18, 0.10) m stacked along z with
    joint axes z, y, y, z, y, z and limits of +-2.9 rad.
    """
    links = (0.33, 0.33, 0.33, 0.18, 0.18, 0.10)
    axes = ((0, 0, 1), (0, 1, 0), (0, 1, 0), (0, 0, 1), (0, 1, 0), (0, 0, 1))
    joints = [Joint(np.array(a, float), Transform.translation([0.0, 0.0, L])) for a, L in zip(axes, links)]
    return KinematicChain(joints, lo=np.full(6, -2.9), hi=np.full(6, 2.9))


def _axis_rotation(axis, angle):
    """Rotations by ``angle`` (...,) about a fixed unit ``axis`` (Rodrigues)."""
    K = hat(axis)
    s = np.sin(angle)[..., None, None]
    c = np.cos(angle)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def fk_frames(chain, q):
    """End-effector transform plus the world-frame axis and origin of every
    joint, shapes (..., m, 3). Joint ``k`` moves the end effector with spatial
    angular velocity ``axes[k]`` about the point ``origins[k]``."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != chain.m:
        raise ValueError(f"expected {chain.m} joint angles, got {q.shape[-1]}")
    batch = q.shape[:-1]
    R = np.broadcast_to(np.eye(3), batch + (3, 3))
    t = np.zeros(batch + (3,))
    axes, origins = [], []
    for k, joint in enumerate(chain.joints):
        t = t + R @ joint.offset.t
        R = R @ joint.offset.R
        axes.append(R @ joint.axis)
        origins.append(t)
        R = R @ _axis_rotation(joint.axis, q[..., k])
    T = Transform(R, t) @ chain.tool
    return T, np.stack(axes, axis=-2), np.stack(origins, axis=-2)


def fk(chain, q):
    """End-effector transform for joint angles ``q`` of shape (..., m)."""
    return fk_frames(chain, q)[0]


def position_jacobian(chain, q):
    """End-effector position and its joint Jacobian (..., 3, m)."""
    T, axes, origins = fk_frames(chain, q)
    J = np.cross(axes, T.t[..., None, :] - origins)
    return T.t, np.swapaxes(J, -1, -2)


def rotation_log_jacobian(chain, q):
    """``w = log(R(q))`` and ``dw/dq`` (..., 3, m) via the inverse left Jacobian."""
    T, axes, _ = fk_frames(chain, q)
    w = so3_log(T.R, strict=False)
    J = left_jacobian_inverse(w) @ np.swapaxes(axes, -1, -2)
    return w, J


def central_difference(fun, Q, step=1e-6):
    """Jacobian of a row-vectorized ``fun: (n, m) -> (n, k)`` by central
    differences; returns shape (n, k, m). All 2m perturbations are evaluated in
    one batched call."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n, m = Q.shape
    E = np.eye(m) * step
    stacked = np.concatenate([Q[None] + E[:, None, :], Q[None] - E[:, None, :]], axis=0)
    vals = np.asarray(fun(stacked.reshape(2 * m * n, m)))
    vals = vals.reshape(2, m, n, -1)
    J = (vals[0] - vals[1]) / (2.0 * step)
    return np.transpose(J, (1, 2, 0))


def pose_cost(chain, q, target, W=None):
    """``||log(fk(q)^-1 target)||_W^2``, vectorized over rows of ``q``."""
    xi = relative_screw(fk(chain, q), target, strict=False)
    return weighted_screw_norm(xi, W)


def pose_cost_and_grad(chain, q, target, W=None, step=1e-6):
    """Pose cost and its joint-space gradient (central differences).

    Accepts a single configuration (m,) or a batch (n, m).
    """
    q = np.asarray(q, dtype=float)
    Q = np.atleast_2d(q)
    value = pose_cost(chain, Q, target, W)
    grad = central_difference(lambda Z: pose_cost(chain, Z, target, W)[:, None], Q, step)[:, 0, :]
    if q.ndim == 1:
        return float(value[0]), grad[0]
    return value, grad
