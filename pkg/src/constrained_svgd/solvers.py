"""Constrained SVGD drivers.

``solve_q`` keeps the kernel average on the unconstrained target and adds each
particle's own soft-constraint gradient after it, then projects onto the box.
``solve_p`` folds the soft-constraint cost into the target density, so
constraint gradients are shared through the kernel, and enforces the box with
a squashing map. Both run an inner SVGD loop at fixed constraint parameters
and an outer loop that updates them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constraints import (
    LOG_BARRIER,
    ConstraintSet,
    SoftFormulation,
    soft_grad,
    soft_value,
    update_params,
    violation,
)
from .errors import BarrierDomainError, ParameterError
from .svgd import (
    StepControl,
    backtracking_line_search,
    median_bandwidth,
    project_box,
    rbf_kernel,
    se3_kernel,
    svgd_direction,
)

RBF = "euclidean-rbf"
SE3 = "se3"


@dataclass
class Problem:
    """Target ``exp(-alpha f(x))`` restricted to the feasible set of ``constraints``.

    ``f`` and ``grad_f`` are row-vectorized: (n, d) -> (n,) and (n, d) -> (n, d).
    ``sweep_hook``, when set, is called with the sweep index before every
    particle update (used by problems that resample data each iteration).
    """

    dim: int
    f: Callable[[np.ndarray], np.ndarray]
    grad_f: Callable[[np.ndarray], np.ndarray]
    alpha: float = 1.0
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    kernel_kind: str = RBF
    init_sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None
    name: str = ""
    kernel_weights: np.ndarray | None = None
    kernel_bandwidth: float | None = None
    sweep_hook: Callable[[int], None] | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError("alpha must be nonnegative")
        if self.kernel_kind not in (RBF, SE3):
            raise ParameterError(f"unknown kernel kind {self.kernel_kind!r}")

    def bounds(self):
        return self.constraints.bounds(self.dim)

    def sample_init(self, rng, n):
        if self.init_sampler is None:
            lo, hi = self.bounds()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                return rng.standard_normal((n, self.dim))
            return rng.uniform(lo, hi, size=(n, self.dim))
        return np.asarray(self.init_sampler(rng, n), dtype=float)


@dataclass
class SolveConfig:
    n_particles: int = 50
    inner_tol: float = 1e-4
    outer_tol: float = 1e-3
    max_inner: int = 500
    max_outer: int = 20
    step: StepControl = field(default_factory=StepControl)
    seed: int = 0
    theta_mode: str = "per-particle"
    mapping: str = "tanh"
    max_total_steps: int | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ParameterError("n_particles must be at least 1")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ParameterError("tolerances must be positive")
        if self.theta_mode not in ("per-particle", "shared"):
            raise ParameterError(f"unknown theta_mode {self.theta_mode!r}")
        if self.mapping not in ("none", "tanh", "sin"):
            raise ParameterError(f"unknown mapping {self.mapping!r}")


@dataclass
class SolveReport:
    particles: np.ndarray
    total_gradient_steps: int
    outer_iterations: int
    feasibility_trace: list
    converged: bool
    wall_time: float
    formulation: SoftFormulation | None = None

    @property
    def final_violation(self):
        return self.feasibility_trace[-1] if self.feasibility_trace else None


def kernel_for(P, X):
    if P.kernel_kind == SE3:
        return se3_kernel(X, h=P.kernel_bandwidth, W=P.kernel_weights)
    if P.kernel_bandwidth is not None:
        h = P.kernel_bandwidth
    else:
        h = median_bandwidth(X) if X.shape[0] >= 2 else 1.0
    return rbf_kernel(X, h, full_gradient=False)


def q_log_target_grad(P, x):
    """Gradient of the unconstrained log target, ``-alpha grad f``."""
    x = np.asarray(x, dtype=float)
    g = -P.alpha * P.grad_f(np.atleast_2d(x))
    return g[0] if x.ndim == 1 else g


def plain_svgd(P, X0, n_steps, step, callback=None):
    """Unconstrained SVGD on ``exp(-alpha f)`` ignoring constraints and bounds.

    ``step`` is a :class:`StepControl` (shared backtracking line search on
    ``sum_j alpha f(x_j)``) or a fixed float step size.
    """
    X = np.array(X0, dtype=float)
    for it in range(n_steps):
        if P.sweep_hook is not None:
            P.sweep_hook(it)
        grad_logp = -P.alpha * P.grad_f(X)
        phi = svgd_direction(X, grad_logp, kernel_for(P, X))
        if isinstance(step, StepControl):
            eps = backtracking_line_search(lambda Y: np.sum(P.alpha * P.f(Y)), X, phi, step)
        else:
            eps = float(step)
        X = X + eps * phi
        if callback is not None:
            callback(X, it)
    return X


def _initial_particles(P, F, cfg, rng):
    lo, hi = P.bounds()
    X = project_box(P.sample_init(rng, cfg.n_particles), lo, hi)
    if F.kind != LOG_BARRIER or P.constraints.n_in == 0:
        return X
    # the barrier needs a strictly feasible start: redraw infeasible particles
    for _ in range(1000):
        bad = np.any(P.constraints.g(X) >= 0, axis=1)
        if not np.any(bad):
            return X
        X[bad] = project_box(P.sample_init(rng, int(bad.sum())), lo, hi)
    raise BarrierDomainError("could not draw a strictly feasible initial particle set")


def _nested_loop(P, F, cfg, X, direction, objective, project, report_map, constraints, pooling, callback):
    t0 = time.perf_counter()
    steps = 0
    trace = []
    converged = False
    outer = 0
    cap = cfg.max_total_steps
    for outer in range(1, cfg.max_outer + 1):
        inner_converged = False
        for _ in range(cfg.max_inner):
            if cap is not None and steps >= cap:
                break
            if P.sweep_hook is not None:
                P.sweep_hook(steps)
            D = direction(X, F)
            eps = backtracking_line_search(objective(F), X, D, cfg.step)
            X_new = project(X + eps * D)
            moved = float(np.mean(np.linalg.norm(X_new - X, axis=1)))
            X = X_new
            steps += 1
            if callback is not None:
                callback(report_map(X), steps)
            if moved < cfg.inner_tol:
                inner_converged = True
                break
        V = violation(constraints, report_map(X))
        trace.append(V)
        if inner_converged and V.max_abs_h <= cfg.outer_tol and V.max_pos_g <= cfg.outer_tol:
            converged = True
            break
        if cap is not None and steps >= cap:
            break
        F = update_params(F, V, tol=cfg.outer_tol, pooling=pooling)
    return SolveReport(report_map(X), steps, outer, trace, converged, time.perf_counter() - t0, F)


def solve_q(P, F, cfg, callback=None):
    """Constrained SVGD with a feasible variational family.

    Inner update ``x_i <- clip(x_i + eps (phi_p(x_i) - grad L_i(x_i)))`` with a
    shared step from backtracking on ``sum_j alpha f(x_j) + L_j(x_j)``.
    """
    rng = np.random.default_rng(cfg.seed)
    C = P.constraints
    lo, hi = P.bounds()
    X = _initial_particles(P, F, cfg, rng)
    if cfg.theta_mode == "per-particle":
        F = F.broadcast(cfg.n_particles)

    def project(Y):
        return project_box(Y, lo, hi)

    def direction(X, F):
        phi = svgd_direction(X, q_log_target_grad(P, X), kernel_for(P, X))
        return phi - soft_grad(F, C, X)

    def objective(F):
        def total(Y):
            Y = project(Y)
            return float(np.sum(P.alpha * P.f(Y) + soft_value(F, C, Y)))
        return total

    return _nested_loop(P, F, cfg, X, direction, objective, project, lambda Y: Y, C, "max", callback)


class BoxMapping:
    """Squashing map from unbounded coordinates onto the box.

    Dimensions bounded on both sides use ``lo + (hi - lo) (s(x) + 1) / 2`` with
    ``s`` = tanh or sin; other dimensions pass through unchanged.
    """

    def __init__(self, lo, hi, kind="tanh"):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.kind = kind
        self.mask = np.isfinite(self.lo) & np.isfinite(self.hi) if kind != "none" else np.zeros(self.lo.shape, bool)
        self.active = bool(np.any(self.mask))
        self.half_width = np.where(self.mask, (self.hi - self.lo) / 2.0, 1.0)

    def __call__(self, X):
        if not self.active:
            return X
        s = np.tanh(X) if self.kind == "tanh" else np.sin(X)
        Y = np.where(self.mask, self.lo + self.half_width * (s + 1.0), X)
        if self.kind == "tanh":
            # tanh rounds to +-1 for |x| > ~19; keep the image strictly inside the box
            Y = np.where(self.mask, np.clip(Y, np.nextafter(self.lo, self.hi), np.nextafter(self.hi, self.lo)), Y)
        return Y

    def derivative(self, X):
        ds = 1.0 - np.tanh(X) ** 2 if self.kind == "tanh" else np.cos(X)
        return np.where(self.mask, self.half_width * ds, 1.0)

    def inverse(self, Y):
        if not self.active:
            return np.array(Y, dtype=float)
        u = np.where(self.mask, (Y - self.lo) / self.half_width - 1.0, 0.0)
        u = np.clip(u, -1.0 + 1e-12, 1.0 - 1e-12)
        x = np.arctanh(u) if self.kind == "tanh" else np.arcsin(u)
        return np.where(self.mask, x, Y)


def p_constraints(P, cfg):
    """Constraints seen by the p-method: box bounds not covered by the mapping
    become ordinary inequalities."""
    lo, hi = P.bounds()
    mapping = BoxMapping(lo, hi, cfg.mapping)
    C = P.constraints
    covered = mapping.mask
    lo_rest = np.where(covered, -np.inf, lo)
    hi_rest = np.where(covered, np.inf, hi)
    if np.any(np.isfinite(lo_rest)) or np.any(np.isfinite(hi_rest)):
        C = ConstraintSet(C.equalities, C.inequalities, lo_rest, hi_rest).with_box_as_inequalities(P.dim)
    else:
        C = ConstraintSet(C.equalities, C.inequalities)
    return C, mapping


def p_log_target(P, F, cfg, x, _cache=None):
    """Unnormalized ``log p_hat(x) = -alpha f(m(x)) - L(m(x))``."""
    C, m = _cache or p_constraints(P, cfg)
    x = np.asarray(x, dtype=float)
    Y = m(np.atleast_2d(x))
    val = -P.alpha * P.f(Y) - soft_value(F, C, Y)
    return float(val[0]) if x.ndim == 1 else val


def p_log_target_grad(P, F, cfg, x, _cache=None):
    """Gradient of :func:`p_log_target`, chained through the box mapping."""
    C, m = _cache or p_constraints(P, cfg)
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    Y = m(X)
    g = -P.alpha * P.grad_f(Y) - soft_grad(F, C, Y)
    if m.active:
        g = g * m.derivative(X)
    return g[0] if x.ndim == 1 else g


def solve_p(P, F, cfg, callback=None):
    """Constrained SVGD on the smoothed target ``p_hat``.

    Parameters are shared by all particles; multipliers are updated from the
    particle least in violation of each constraint. Returned particles are in
    box coordinates.
    """
    rng = np.random.default_rng(cfg.seed)
    cache = p_constraints(P, cfg)
    C, m = cache
    X = m.inverse(_initial_particles(P, F, cfg, rng))
    if F.per_particle:
        raise ParameterError("the p-method shares one parameter set across particles")
    if C.n_in != P.constraints.n_in or C.n_eq != P.constraints.n_eq:
        F = SoftFormulation.create(F.kind, C, **{k: getattr(F, k) for k in ("c", "d_w", "mu", "delta", "growth", "shrink")},
                                   lam=F.lam, gamma=np.concatenate([F.gamma, np.zeros(C.n_in - len(F.gamma))]))

    def direction(X, F):
        return svgd_direction(X, p_log_target_grad(P, F, cfg, X, cache), kernel_for(P, X))

    def objective(F):
        def total(Y):
            Z = m(Y)
            return float(np.sum(P.alpha * P.f(Z) + soft_value(F, C, Z)))
        return total

    return _nested_loop(P, F, cfg, X, direction, objective, lambda Y: Y, m, C, "min", callback)
