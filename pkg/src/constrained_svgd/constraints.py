"""Constraint containers and soft-constraint formulations.

Constraint functions are row-vectorized: a block's ``value`` maps an (n, d)
array of points to (n, k) values and ``jac`` maps it to (n, k, d). Equalities
are feasible at ``h(x) = 0`` and inequalities at ``g(x) <= 0``.

A :class:`SoftFormulation` holds the parameters of one of four penalty
families. Its scalar parameters may be plain numbers (shared by all particles)
or length-n arrays (one parameter set per particle); multipliers then carry a
leading particle axis as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import BarrierDomainError, ContractError, UnsupportedCombinationError

QUADRATIC_PENALTY = "quadpenalty"
AUGMENTED_LAGRANGIAN = "auglag"
LOG_BARRIER = "logbarrier"
RELAXED_LOG_BARRIER = "relaxedlogbarrier"
KINDS = (AUGMENTED_LAGRANGIAN, QUADRATIC_PENALTY, LOG_BARRIER, RELAXED_LOG_BARRIER)


@dataclass
class Constraint:
    """A block of ``size`` scalar constraints sharing one evaluation."""

    value: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    size: int = 1
    name: str = ""

    @classmethod
    def pointwise(cls, value, grad, name=""):
        """Wrap a scalar constraint given as ``x -> float`` and ``x -> (d,)``."""

        def v(X):
            return np.array([[value(x)] for x in X], dtype=float).reshape(len(X), 1)

        def j(X):
            return np.array([grad(x) for x in X], dtype=float).reshape(len(X), 1, -1)

        return cls(v, j, 1, name)


def _stack(blocks, X, attr, trailing):
    n = X.shape[0]
    if not blocks:
        return np.zeros((n, 0) + trailing)
    return np.concatenate([np.asarray(getattr(b, attr)(X), dtype=float).reshape((n, b.size) + trailing) for b in blocks], axis=1)


@dataclass
class ConstraintSet:
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @property
    def n_eq(self):
        return sum(b.size for b in self.equalities)

    @property
    def n_in(self):
        return sum(b.size for b in self.inequalities)

    def bounds(self, d):
        lo = np.full(d, -np.inf) if self.lo is None else np.broadcast_to(np.asarray(self.lo, float), (d,)).copy()
        hi = np.full(d, np.inf) if self.hi is None else np.broadcast_to(np.asarray(self.hi, float), (d,)).copy()
        return lo, hi

    def h(self, X):
        return _stack(self.equalities, np.atleast_2d(X), "value", ())

    def h_jac(self, X):
        X = np.atleast_2d(X)
        return _stack(self.equalities, X, "jac", (X.shape[1],))

    def g(self, X):
        return _stack(self.inequalities, np.atleast_2d(X), "value", ())

    def g_jac(self, X):
        X = np.atleast_2d(X)
        return _stack(self.inequalities, X, "jac", (X.shape[1],))

    def union(self, other):
        """Constraints of both sets; boxes are intersected."""

        def pick(a, b, fn):
            if a is None:
                return b
            if b is None:
                return a
            return fn(np.asarray(a, float), np.asarray(b, float))

        return ConstraintSet(
            self.equalities + other.equalities,
            self.inequalities + other.inequalities,
            pick(self.lo, other.lo, np.maximum),
            pick(self.hi, other.hi, np.minimum),
        )

    def with_box_as_inequalities(self, d):
        """Equivalent set whose finite box bounds are ordinary inequalities."""
        lo, hi = self.bounds(d)
        blocks = list(self.inequalities)
        lo_idx = np.flatnonzero(np.isfinite(lo))
        hi_idx = np.flatnonzero(np.isfinite(hi))
        if lo_idx.size:
            sel = np.eye(d)[lo_idx]
            blocks.append(Constraint(lambda X, i=lo_idx, b=lo[lo_idx]: b - X[:, i],
                                     lambda X, s=sel: np.broadcast_to(-s, (len(X),) + s.shape).copy(),
                                     lo_idx.size, "box_lo"))
        if hi_idx.size:
            sel = np.eye(d)[hi_idx]
            blocks.append(Constraint(lambda X, i=hi_idx, b=hi[hi_idx]: X[:, i] - b,
                                     lambda X, s=sel: np.broadcast_to(s, (len(X),) + s.shape).copy(),
                                     hi_idx.size, "box_hi"))
        return ConstraintSet(list(self.equalities), blocks, None, None)


@dataclass(frozen=True)
class ViolationReport:
    max_abs_h: float
    max_pos_g: float
    h: np.ndarray
    g: np.ndarray

    @property
    def particle_abs_h(self):
        h = np.atleast_2d(self.h)
        return np.max(np.abs(h), axis=1, initial=0.0)

    @property
    def particle_pos_g(self):
        g = np.atleast_2d(self.g)
        return np.max(np.maximum(g, 0.0), axis=1, initial=0.0)


def violation(C, x):
    """Worst equality residual and worst positive inequality value at ``x``
    (a point or an (n, d) batch). Box bounds are not included."""
    x = np.asarray(x, dtype=float)
    h = C.h(x)
    g = C.g(x)
    if x.ndim == 1:
        h, g = h[0], g[0]
    max_h = float(np.max(np.abs(h), initial=0.0))
    max_g = float(np.max(np.maximum(g, 0.0), initial=0.0))
    return ViolationReport(max_h, max_g, h, g)


@dataclass(frozen=True)
class SoftFormulation:
    kind: str
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c: float | np.ndarray = 1.0
    d_w: float | np.ndarray = 1.0
    mu: float | np.ndarray = 1.0
    delta: float | np.ndarray = 0.1
    growth: float = 10.0
    shrink: float = 0.5
    prev_h: float | np.ndarray = np.inf
    prev_g: float | np.ndarray = np.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown formulation {self.kind!r}; expected one of {KINDS}")
        for name in ("c", "d_w", "mu", "delta"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be nonnegative")
        if np.any(np.asarray(self.gamma) < 0):
            raise ValueError("inequality multipliers must be nonnegative")
        if not self.growth > 1.0 or not 0.0 < self.shrink < 1.0:
            raise ValueError("need growth > 1 and 0 < shrink < 1")

    @classmethod
    def create(cls, kind, constraints, **params):
        """Formulation with zero multipliers sized for ``constraints``."""
        params.setdefault("lam", np.zeros(constraints.n_eq))
        params.setdefault("gamma", np.zeros(constraints.n_in))
        params["lam"] = np.asarray(params["lam"], dtype=float)
        params["gamma"] = np.asarray(params["gamma"], dtype=float)
        F = cls(kind, **params)
        _check_barrier(F, constraints)
        return F

    @property
    def per_particle(self):
        return np.ndim(self.c) == 1

    def broadcast(self, n):
        """One parameter set per particle, copied from this shared one."""
        def rows(a):
            return np.broadcast_to(np.asarray(a, float), (n,) + np.shape(a)).copy()

        return replace(self, lam=rows(self.lam), gamma=rows(self.gamma), c=rows(self.c), d_w=rows(self.d_w),
                       mu=rows(self.mu), delta=rows(self.delta), prev_h=rows(self.prev_h), prev_g=rows(self.prev_g))

    def select(self, rows):
        """Parameters of a subset of particles (per-particle formulations only)."""
        if not self.per_particle:
            return self
        return replace(self, lam=self.lam[rows], gamma=self.gamma[rows], c=self.c[rows], d_w=self.d_w[rows],
                       mu=self.mu[rows], delta=self.delta[rows], prev_h=self.prev_h[rows], prev_g=self.prev_g[rows])


def _col(a):
    return np.asarray(a, dtype=float)[..., None]


def _relaxed_barrier(g, delta):
    delta = _col(delta)
    inside = g <= -delta
    safe = np.where(inside, g, -1.0)
    log_part = -np.log(-safe)
    quad = 0.5 * (((g + 2.0 * delta) / delta) ** 2 - 1.0) - np.log(delta)
    return np.where(inside, log_part, quad)


def _relaxed_barrier_slope(g, delta):
    delta = _col(delta)
    inside = g <= -delta
    safe = np.where(inside, g, -1.0)
    return np.where(inside, -1.0 / safe, (g + 2.0 * delta) / delta**2)


def _check_barrier(F, C):
    if F.kind == LOG_BARRIER and C.n_eq:
        raise UnsupportedCombinationError("the log barrier cannot handle equality constraints")


def soft_value(F, C, x):
    """Soft constraint cost ``L_theta(x)`` (objective term excluded).

    ``x`` may be a single point (returns a float) or an (n, d) batch. The log
    barrier returns ``inf`` wherever some ``g_j >= 0``.
    """
    _check_barrier(F, C)
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    h = C.h(X)
    g = C.g(X)
    if F.kind == QUADRATIC_PENALTY:
        val = F.c * np.sum(h * h, axis=1) + F.d_w * np.sum(np.maximum(g, 0.0) ** 2, axis=1)
    elif F.kind == AUGMENTED_LAGRANGIAN:
        active = (g > 0) | (F.gamma > 0)
        val = (np.sum(F.lam * h, axis=1) + np.sum(F.gamma * g, axis=1) + F.c * np.sum(h * h, axis=1)
               + F.d_w * np.sum(np.where(active, g * g, 0.0), axis=1))
    elif F.kind == LOG_BARRIER:
        feasible = np.all(g < 0, axis=1)
        safe = np.where(g < 0, g, -1.0)
        val = np.where(feasible, -F.mu * np.sum(np.log(-safe), axis=1), np.inf)
    else:
        val = F.mu * np.sum(_relaxed_barrier(g, F.delta), axis=1) + F.c * np.sum(h * h, axis=1)
    val = np.asarray(val, dtype=float)
    return float(val[0]) if x.ndim == 1 else val


def soft_grad(F, C, x):
    """Gradient of :func:`soft_value` in ``x`` (point or batch)."""
    _check_barrier(F, C)
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    h = C.h(X)
    g = C.g(X)
    if F.kind == QUADRATIC_PENALTY:
        ch = 2.0 * _col(F.c) * h
        cg = 2.0 * _col(F.d_w) * np.maximum(g, 0.0)
    elif F.kind == AUGMENTED_LAGRANGIAN:
        active = (g > 0) | (F.gamma > 0)
        ch = F.lam + 2.0 * _col(F.c) * h
        cg = F.gamma + 2.0 * _col(F.d_w) * np.where(active, g, 0.0)
    elif F.kind == LOG_BARRIER:
        if np.any(g >= 0):
            raise BarrierDomainError("log barrier gradient requested at a point that is not strictly feasible")
        ch = np.zeros_like(h)
        cg = -_col(F.mu) / g
    else:
        ch = 2.0 * _col(F.c) * h
        cg = _col(F.mu) * _relaxed_barrier_slope(g, F.delta)
    grad = np.zeros_like(X)
    if h.shape[1]:
        grad = grad + np.einsum("nk,nkd->nd", ch, C.h_jac(X))
    if g.shape[1]:
        grad = grad + np.einsum("nk,nkd->nd", cg, C.g_jac(X))
    return grad[0] if x.ndim == 1 else grad


def _pool(values, pooling, magnitude):
    """Per-constraint value of the particle selected by ``pooling``."""
    if values.shape[0] == 1 or values.shape[1] == 0:
        return values[0]
    key = np.abs(values) if magnitude else values
    rows = np.argmax(key, axis=0) if pooling == "max" else np.argmin(key, axis=0)
    return values[rows, np.arange(values.shape[1])]


def update_params(F, V, tol=1e-3, pooling="max"):
    """Outer-loop parameter update after an inner solve.

    ``V`` holds raw constraint values at the current particle(s). For a
    per-particle formulation each particle's parameters see only its own
    values. A shared formulation combines particles with ``pooling``: ``"max"``
    takes, per constraint, the particle most in violation and ``"min"`` the one
    least in violation. Penalty growth always looks at the worst violation.
    """
    if pooling not in ("max", "min"):
        raise ValueError("pooling must be 'max' or 'min'")
    h = np.atleast_2d(V.h)
    g = np.atleast_2d(V.g)
    if F.per_particle:
        if h.shape[0] != np.shape(F.c)[0] or g.shape[0] != np.shape(F.c)[0]:
            raise ContractError("violation rows do not match the per-particle parameters")
        H, G = h, g
        viol_h = np.max(np.abs(h), axis=1, initial=0.0)
        viol_g = np.max(np.maximum(g, 0.0), axis=1, initial=0.0)
    else:
        H = _pool(h, pooling, magnitude=True)
        G = _pool(g, pooling, magnitude=False)
        viol_h = float(np.max(np.abs(h), initial=0.0))
        viol_g = float(np.max(np.maximum(g, 0.0), initial=0.0))

    rho = F.growth
    if F.kind == QUADRATIC_PENALTY:
        return replace(F, c=np.where(viol_h > tol, rho * F.c, F.c) * 1.0,
                       d_w=np.where(viol_g > tol, rho * F.d_w, F.d_w) * 1.0,
                       prev_h=viol_h, prev_g=viol_g)
    if F.kind == AUGMENTED_LAGRANGIAN:
        lam = F.lam + 2.0 * _col(F.c) * H if F.per_particle else F.lam + 2.0 * F.c * H
        gamma = np.maximum(0.0, F.gamma + (2.0 * _col(F.d_w) * G if F.per_particle else 2.0 * F.d_w * G))
        # no earlier violation on the first update counts as no improvement
        prev_h, prev_g = np.asarray(F.prev_h), np.asarray(F.prev_g)
        grow_h = (viol_h > tol) & ((viol_h > 0.25 * prev_h) | np.isinf(prev_h))
        grow_g = (viol_g > tol) & ((viol_g > 0.25 * prev_g) | np.isinf(prev_g))
        return replace(F, lam=lam, gamma=gamma,
                       c=np.where(grow_h, rho * F.c, F.c) * 1.0,
                       d_w=np.where(grow_g, rho * F.d_w, F.d_w) * 1.0,
                       prev_h=viol_h, prev_g=viol_g)
    sigma = F.shrink
    if F.kind == LOG_BARRIER:
        return replace(F, mu=sigma * np.asarray(F.mu), prev_h=viol_h, prev_g=viol_g)
    return replace(F, mu=sigma * np.asarray(F.mu), delta=sigma * np.asarray(F.delta),
                   c=np.where(viol_h > tol, rho * F.c, F.c) * 1.0, prev_h=viol_h, prev_g=viol_g)
