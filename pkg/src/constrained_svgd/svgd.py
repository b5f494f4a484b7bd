"""Kernels, the SVGD functional-gradient direction, shared-step backtracking
line search and box projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from . import se3
from .errors import ContractError, DegenerateInputError, InvalidStateError, ParameterError


@dataclass(frozen=True)
class KernelEval:
    """Kernel matrix ``K[j, i] = k(x_j, x_i)`` and ``gradK[j, i] = grad_{x_j} k(x_j, x_i)``.

    ``repulsion`` optionally caches ``gradK.sum(axis=0)``; kernels with a closed
    form for that sum may leave ``gradK`` as None.
    """

    K: np.ndarray
    gradK: np.ndarray | None
    h: float
    repulsion: np.ndarray | None = None

    def repulsion_sum(self):
        return self.gradK.sum(axis=0) if self.repulsion is None else self.repulsion


@dataclass(frozen=True)
class StepControl:
    """Backtracking schedule ``eps0 * beta**k`` for ``k = 0..max_backtracks``,
    falling back to ``min_eps`` when no trial decreases the objective."""

    eps0: float = 0.1
    beta: float = 0.5
    max_backtracks: int = 20
    min_eps: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ParameterError("beta must lie in (0, 1)")
        if not (self.eps0 > self.min_eps > 0.0):
            raise ParameterError("need eps0 > min_eps > 0")
        if self.max_backtracks < 0:
            raise ParameterError("max_backtracks must be nonnegative")


def as_particles(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ContractError(f"particles must be an (n, d) array with n, d >= 1, got shape {X.shape}")
    return X


def _median_rule(distances, n):
    med = float(np.median(distances))
    if med == 0.0:
        return 1.0
    return med**2 / np.log(n + 1.0)


def median_bandwidth(X):
    """Median heuristic ``h = med^2 / log(n + 1)`` over pairwise Euclidean
    distances; 1.0 when all particles coincide."""
    X = as_particles(X)
    n = X.shape[0]
    if n < 2:
        raise DegenerateInputError("median heuristic needs at least two particles")
    return _median_rule(pdist(X), n)


def rbf_kernel(X, h, full_gradient=True):
    """RBF kernel ``exp(-||a - b||^2 / h)`` with its gradient in the first argument.

    With ``full_gradient=False`` only the summed repulsion
    ``sum_j grad_{x_j} k(x_j, x_i) = (2/h) (x_i sum_j K[j, i] - sum_j K[j, i] x_j)``
    is formed, which avoids the (n, n, d) tensor.
    """
    X = as_particles(X)
    if not h > 0:
        raise ParameterError(f"bandwidth must be positive, got {h}")
    if not full_gradient:
        sq = np.maximum(cdist(X, X, "sqeuclidean"), 0.0)
        K = np.exp(-sq / h)
        rep = (2.0 / h) * (X * K.sum(axis=0)[:, None] - K.T @ X)
        return KernelEval(K, None, float(h), rep)
    diff = X[None, :, :] - X[:, None, :]  # diff[j, i] = x_i - x_j
    sq = np.einsum("jid,jid->ji", diff, diff)
    K = np.exp(-sq / h)
    gradK = (2.0 / h) * diff * K[:, :, None]
    return KernelEval(K, gradK, float(h))


def _pose_vectors(poses):
    if isinstance(poses, np.ndarray) or (isinstance(poses, list) and poses and not isinstance(poses[0], se3.Transform)):
        return as_particles(poses)
    Rs = np.stack([T.validate().R for T in poses])
    ts = np.stack([T.t for T in poses])
    return np.concatenate([ts, se3.so3_log(Rs, strict=False)], axis=-1)


def se3_sqdist(XA, XB, W=None):
    """Matrix of ``||log(T(a)^-1 T(b))||_W^2`` between pose vectors."""
    TA = se3.Transform.from_pose_vector(XA[:, None, :])
    TB = se3.Transform.from_pose_vector(XB[None, :, :])
    return se3.weighted_screw_norm(se3.relative_screw(TA, TB), W)


def se3_bandwidth(X, W=None):
    """Median heuristic over weighted screw distances between pose vectors."""
    X = as_particles(X)
    n = X.shape[0]
    if n < 2:
        raise DegenerateInputError("median heuristic needs at least two particles")
    D2 = se3_sqdist(X, X, W)
    iu = np.triu_indices(n, k=1)
    return _median_rule(np.sqrt(np.maximum(D2[iu], 0.0)), n)


def se3_kernel(poses, h=None, W=None, step=1e-6):
    """Kernel ``exp(-||log(T_j^-1 T_i)||_W^2 / h)`` on poses.

    ``poses`` is an (n, 6) array of pose vectors (translation, axis-angle) or a
    list of :class:`~constrained_svgd.se3.Transform`. The gradient is taken with
    respect to the pose vector of the first argument by central differences.
    """
    X = _pose_vectors(poses)
    if X.shape[1] != 6:
        raise ContractError("pose vectors must have 6 components")
    if h is None:
        h = se3_bandwidth(X, W) if X.shape[0] >= 2 else 1.0
    if not h > 0:
        raise ParameterError(f"bandwidth must be positive, got {h}")
    K = np.exp(-se3_sqdist(X, X, W) / h)
    n = X.shape[0]
    gradK = np.empty((n, n, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = step
        Kp = np.exp(-se3_sqdist(X + e, X, W) / h)
        Km = np.exp(-se3_sqdist(X - e, X, W) / h)
        gradK[:, :, k] = (Kp - Km) / (2.0 * step)
    return KernelEval(K, gradK, float(h))


def svgd_direction(X, grad_logp, ker):
    """``phi(x_i) = 1/n sum_j [K[j, i] grad_logp[j] + gradK[j, i]]``."""
    X = as_particles(X)
    grad_logp = np.asarray(grad_logp, dtype=float)
    n, d = X.shape
    rep = ker.repulsion_sum()
    if grad_logp.shape != (n, d) or ker.K.shape != (n, n) or rep.shape != (n, d):
        raise ContractError("particle, gradient and kernel shapes disagree")
    return (ker.K.T @ grad_logp + rep) / n


def backtracking_line_search(objective, X, direction, ctl):
    """Largest ``eps0 * beta**k`` with ``objective(X + eps * direction) < objective(X)``.

    A trial that evaluates to NaN or inf is rejected like any other failure.
    Returns ``ctl.min_eps`` when every trial fails.
    """
    f0 = objective(X)
    if not np.isfinite(f0):
        raise InvalidStateError(f"objective is not finite at the current particles ({f0})")
    for k in range(ctl.max_backtracks + 1):
        eps = ctl.eps0 * ctl.beta**k
        trial = objective(X + eps * direction)
        if np.isfinite(trial) and trial < f0:
            return eps
    return ctl.min_eps


def project_box(X, lo, hi):
    """Clamp every coordinate into ``[lo, hi]`` (infinite bounds pass through)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ParameterError("box lower bound exceeds upper bound")
    return np.minimum(np.maximum(lo, X), hi)
