"""Tuned default settings per problem, method and formulation.

A preset is a dict of config sections (``run``, ``problem``, ``solver``,
``step``, ``formulation``) in the same shape the command-line runner reads
from INI files, so any value here can be overridden from a config file.
"""

from __future__ import annotations

import copy

_BASE = {
    "toy2d": {
        "run": {"particles": 50, "seed": 0},
        "problem": {"alpha": 1.0},
        "solver": {"inner_tol": 1e-4, "outer_tol": 1e-3, "max_inner": 1000, "max_outer": 30},
        "step": {"eps0": 0.5, "min_eps": 1e-3},
        "formulation": {"c": 1.0, "d_w": 1.0},
        "ground_truth": {"seed": 1000},
    },
    "trajectory": {
        "run": {"particles": 20, "seed": 0},
        "problem": {"alpha": 10.0, "T": 20},
        "solver": {"inner_tol": 1e-4, "outer_tol": 1e-4, "max_inner": 1000, "max_outer": 20},
        "step": {"eps0": 0.1, "min_eps": 1e-3},
        "formulation": {"c": 1.0, "d_w": 1.0},
    },
    "ik": {
        "run": {"particles": 50, "seed": 0},
        # starts near the straight-up home pose; wide starts fold the elbow
        # into the joint limits, where the height constraint is unreachable
        "problem": {"alpha": 10.0, "init_spread": 1.0},
        "solver": {"inner_tol": 1e-4, "outer_tol": 1e-3, "max_inner": 2000, "max_outer": 30,
                   "max_total_steps": 20000},
        # large penalty gradients make long shared steps fling single particles;
        # a tiny floor keeps a failed line search from doing the same
        "step": {"eps0": 0.002, "min_eps": 1e-9},
        "formulation": {"c": 10.0, "d_w": 10.0},
    },
    "icp": {
        "run": {"particles": 100, "seed": 0},
        "problem": {"alpha": 50.0},
        "solver": {"inner_tol": 1e-6, "outer_tol": 1e-6, "max_inner": 200, "max_outer": 15},
        "step": {"eps0": 0.05, "min_eps": 1e-7},
        # an exterior penalty only reaches a 1e-6 violation once it outweighs
        # the kernel repulsion, so the inequality weights start stiff
        "formulation": {"c": 1e4, "d_w": 1e6},
    },
}

# (problem, method) specific adjustments
_METHOD = {
    # the disk lies inside the box, so the box adds nothing to the feasible
    # set; without the squashing map no particle can stall in a saturated corner
    ("toy2d", "p"): {"solver": {"mapping": "none"}},
}

_DEFAULT_FORMULATION = {"toy2d": "auglag", "trajectory": "auglag", "ik": "auglag", "icp": "quadpenalty"}


def default_formulation(problem, method="q"):
    return _DEFAULT_FORMULATION[problem]


def preset(problem, method="q", formulation=None):
    """Config sections for one (problem, method, formulation) cell."""
    if problem not in _BASE:
        raise KeyError(f"no preset for problem {problem!r}")
    cfg = copy.deepcopy(_BASE[problem])
    for section, values in _METHOD.get((problem, method), {}).items():
        cfg.setdefault(section, {}).update(values)
    cfg["run"].update({"problem": problem, "method": method,
                       "formulation": formulation or default_formulation(problem, method)})
    return cfg
