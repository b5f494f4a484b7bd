"""Ground truth by rejection sampling, exact EMD between particle sets,
finite-difference gradient checks and multi-trial experiment matrices."""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .constraints import SoftFormulation, violation
from .errors import ContractError, InfeasibleTargetError
from .solvers import plain_svgd, solve_p, solve_q


@dataclass
class GroundTruthSet:
    samples: np.ndarray
    seed: int
    acceptance_rate: float


def rejection_sample(P, m, seed=0, scan=100_000, batch=100_000, max_proposals=10_000_000):
    """Exactly ``m`` draws from ``exp(-alpha f)`` restricted to the feasible set.

    Proposals are uniform on the (finite) box; a feasible proposal is accepted
    with probability ``exp(-alpha (f(x) - f_min))`` where ``f_min`` comes from a
    preliminary uniform scan.
    """
    lo, hi = P.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("rejection sampling needs finite box bounds")
    if P.constraints.n_eq:
        raise ValueError("rejection sampling cannot hit equality constraints")
    rng = np.random.default_rng(seed)

    def feasible(X):
        return np.all(P.constraints.g(X) <= 0, axis=1)

    U = rng.uniform(lo, hi, size=(scan, P.dim))
    ok = feasible(U)
    f_min = float(np.min(P.f(U[ok]))) if np.any(ok) else float(np.min(P.f(U)))

    accepted = []
    n_acc = 0
    proposals = 0
    while n_acc < m:
        X = rng.uniform(lo, hi, size=(batch, P.dim))
        u = rng.uniform(size=batch)
        keep = feasible(X) & (u < np.exp(-P.alpha * (P.f(X) - f_min)))
        accepted.append(X[keep])
        n_acc += int(keep.sum())
        proposals += batch
        if proposals >= max_proposals and n_acc / proposals < 1e-6:
            raise InfeasibleTargetError(f"acceptance rate {n_acc / proposals:.2e} after {proposals} proposals")
    return GroundTruthSet(np.concatenate(accepted)[:m], seed, n_acc / proposals)


def emd(A, B, cost=None):
    """Earth mover distance between equal-size point sets: the mean ground cost
    of the optimal one-to-one assignment. ``cost(A, B)`` returns the pairwise
    cost matrix (Euclidean distance by default)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape:
        raise ContractError(f"point sets must have equal shapes, got {A.shape} and {B.shape}")
    M = cdist(A, B) if cost is None else np.asarray(cost(A, B), dtype=float)
    rows, cols = linear_sum_assignment(M)
    return float(M[rows, cols].mean())


def finite_difference(value, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    fd = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = step
        fd.flat[k] = (value(x + e) - value(x - e)) / (2.0 * step)
    return fd


def grad_check(value, grad, points, step=1e-6):
    """Largest ``||grad(x) - fd(x)|| / max(1, ||fd(x)||)`` over ``points``."""
    worst = 0.0
    for x in points:
        fd = finite_difference(value, x, step)
        err = np.linalg.norm(np.asarray(grad(np.asarray(x, float)), float) - fd) / max(1.0, np.linalg.norm(fd))
        worst = max(worst, float(err))
    return worst


def problem_gradient_checks(P, points, step=1e-6):
    """Gradient-check errors of ``f`` and every constraint row of a problem."""
    out = {"f": grad_check(lambda x: float(P.f(x[None])[0]), lambda x: P.grad_f(x[None])[0], points, step)}
    C = P.constraints
    for kind, blocks in (("h", C.equalities), ("g", C.inequalities)):
        for b_idx, block in enumerate(blocks):
            for k in range(block.size):
                name = f"{kind}:{block.name or b_idx}" + (f"[{k}]" if block.size > 1 else "")
                out[name] = grad_check(lambda x, b=block, k=k: float(b.value(x[None])[0, k]),
                                       lambda x, b=block, k=k: b.jac(x[None])[0, k], points, step)
    return out


@dataclass
class MetricsRecord:
    problem: str
    method: str
    formulation: str
    seed: int
    n_particles: int
    emd: float | None
    total_gradient_steps: int
    outer_iterations: int
    max_abs_h: float
    max_pos_g: float
    converged: bool
    wall_time_s: float

    def as_dict(self):
        return asdict(self)


def run_trial(P, method, formulation, cfg, formulation_params=None, ground_truth=None, callback=None):
    """Solve one cell and summarize it. ``method`` is ``q``, ``p`` or
    ``unconstrained`` (plain SVGD for ``cfg.max_inner`` steps)."""
    params = dict(formulation_params or {})
    F = SoftFormulation.create(formulation, P.constraints, **params)
    t0 = time.perf_counter()
    if method == "q":
        report = solve_q(P, F, cfg, callback=callback)
        X, steps, outer, conv = report.particles, report.total_gradient_steps, report.outer_iterations, report.converged
    elif method == "p":
        report = solve_p(P, F, cfg, callback=callback)
        X, steps, outer, conv = report.particles, report.total_gradient_steps, report.outer_iterations, report.converged
    elif method == "unconstrained":
        rng = np.random.default_rng(cfg.seed)
        report = None
        X = plain_svgd(P, P.sample_init(rng, cfg.n_particles), cfg.max_inner, cfg.step, callback=callback)
        steps, outer, conv = cfg.max_inner, 0, False
    else:
        raise ValueError(f"unknown method {method!r}")
    wall = time.perf_counter() - t0
    V = violation(P.constraints, X)
    e = None
    if ground_truth is not None:
        e = emd(X, ground_truth[: len(X)]) if len(ground_truth) >= len(X) else None
    record = MetricsRecord(P.name, method, formulation, cfg.seed, cfg.n_particles, e, steps, outer,
                           V.max_abs_h, V.max_pos_g, conv, wall)
    return X, report, record


def trial_matrix(problems, methods, formulations, seeds, configure, ground_truth=None, n_jobs=1):
    """Run every (problem, method, formulation, seed) cell.

    ``problems`` maps names to :class:`Problem`; ``configure(name, method,
    formulation, seed)`` returns ``(SolveConfig, formulation_params)``;
    ``ground_truth`` optionally maps problem names to sample arrays for EMD.
    Nonconvergence is recorded, never raised. Records come back in cell order.
    """
    cells = list(itertools.product(problems, methods, formulations, seeds))

    def one(cell):
        name, method, form, seed = cell
        cfg, params = configure(name, method, form, seed)
        gt = None if ground_truth is None else ground_truth.get(name)
        return run_trial(problems[name], method, form, cfg, params, gt)[2]

    if n_jobs == 1:
        return [one(c) for c in cells]
    from joblib import Parallel, delayed

    return list(Parallel(n_jobs=n_jobs)(delayed(one)(c) for c in cells))
