"""Command-line experiment runner.

Each subcommand starts from the tuned defaults in :mod:`presets`, applies an
optional INI config file and then command-line flags, runs the trial(s) and
writes ``<out>/<trial_id>/{particles.csv, metrics.json, scatter.svg}``.

Exit codes: 0 on success (including nonconvergence), 1 for an invalid
configuration or usage error, 2 when a solver raises.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import presets
from .constraints import KINDS, SoftFormulation
from .evaluation import problem_gradient_checks, rejection_sample, run_trial
from .problems import ik_problem, icp_problem, toy2d_problem, trajectory_problem
from .solvers import SolveConfig
from .svg import scatter_svg
from .svgd import StepControl

PROBLEMS = ("toy2d", "trajectory", "ik", "icp")
METHODS = ("q", "p", "unconstrained")
METRIC_KEYS = ("emd", "total_gradient_steps", "outer_iterations", "max_abs_h", "max_pos_g", "converged", "seed",
               "method", "formulation", "wall_time_s")

SECTION_KEYS = {
    "run": {"problem", "method", "formulation", "seed", "particles", "out"},
    "solver": {"inner_tol", "outer_tol", "max_inner", "max_outer", "theta_mode", "mapping", "max_total_steps"},
    "step": {"eps0", "beta", "max_backtracks", "min_eps"},
    "formulation": {"c", "d_w", "mu", "delta", "growth", "shrink"},
    "ground_truth": {"samples", "seed"},
    "matrix": {"methods", "formulations", "seeds", "jobs"},
}
PROBLEM_KEYS = {
    "toy2d": {"alpha", "bound"},
    "trajectory": {"start", "goal", "T", "obstacles", "alpha", "init_noise"},
    "ik": {"alpha", "z_target", "init_spread"},
    "icp": {"N", "d_max", "r", "seed", "alpha", "z_init", "kernel_bandwidth"},
}
BUILDERS = {"toy2d": toy2d_problem, "trajectory": trajectory_problem, "ik": ik_problem, "icp": icp_problem}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _literal(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def read_config(path):
    """Parse an INI file into ``{section: {key: value}}``; values are JSON
    literals where they parse as such and bare strings otherwise."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return {s: {k: _literal(v) for k, v in cp.items(s)} for s in cp.sections()}


def _merge(base, over):
    out = {k: dict(v) for k, v in base.items()}
    for section, values in over.items():
        out.setdefault(section, {}).update(values)
    return out


def validate(cfg):
    for section, values in cfg.items():
        if section == "problem":
            continue
        if section not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(values) - SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    run = cfg["run"]
    if run.get("problem") not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}")
    unknown = set(cfg.get("problem", {})) - PROBLEM_KEYS[run["problem"]]
    if unknown:
        raise ConfigError(f"unknown keys in [problem] for {run['problem']}: {sorted(unknown)}")
    if run.get("method") not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {run.get('method')!r}")
    if run.get("formulation") not in KINDS:
        raise ConfigError(f"formulation must be one of {KINDS}, got {run.get('formulation')!r}")
    if not isinstance(run.get("particles"), int) or run["particles"] < 1:
        raise ConfigError("particles must be a positive integer")
    if not isinstance(run.get("seed"), int):
        raise ConfigError("seed must be an integer")
    try:
        build_solve_config(cfg, run["seed"])
        P = build_problem(cfg)
        SoftFormulation.create(run["formulation"], P.constraints, **cfg.get("formulation", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def build_solve_config(cfg, seed):
    step = StepControl(**cfg.get("step", {}))
    return SolveConfig(n_particles=cfg["run"]["particles"], seed=seed, step=step, **cfg.get("solver", {}))


def build_problem(cfg):
    kwargs = dict(cfg.get("problem", {}))
    name = cfg["run"]["problem"]
    for key in ("start", "goal", "z_init"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if "obstacles" in kwargs:
        kwargs["obstacles"] = tuple((tuple(c), float(r)) for c, r in kwargs["obstacles"])
    return BUILDERS[name](**kwargs)


def trial_id(problem, method, formulation, particles, seed):
    return f"{problem}-{method}-{formulation}-n{particles}-s{seed}"


def _overlay(problem, P, X):
    circles, lines = [], []
    if problem == "toy2d":
        circles = [((0.0, 0.0), float(np.sqrt(2.0)))]
    elif problem == "trajectory":
        circles = [(tuple(c), r) for c, r in P.info["obstacles"]]
        start, goal, T = P.info["start"], P.info["goal"], P.info["T"]
        for x in X:
            lines.append(np.vstack([start, x.reshape(T, 2), goal]))
    return circles, lines


def write_trial(directory, problem, P, X, record, timing):
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "particles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["particle_id"] + [f"dim_{k}" for k in range(X.shape[1])])
        for i, row in enumerate(X):
            w.writerow([i] + [repr(float(v)) for v in row])
    metrics = metrics_dict(record, timing)
    with open(directory / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    circles, lines = _overlay(problem, P, X)
    (directory / "scatter.svg").write_text(scatter_svg(X, circles, lines), encoding="utf-8")
    return metrics


def metrics_dict(record, timing):
    d = record.as_dict()
    out = {k: d[k] for k in METRIC_KEYS if k != "wall_time_s"}
    out["wall_time_s"] = d["wall_time_s"] if timing else None
    for k in ("max_abs_h", "max_pos_g"):
        out[k] = float(out[k])
    out["converged"] = bool(out["converged"])
    return out


def _ground_truth(cfg, P):
    if cfg["run"]["problem"] != "toy2d":
        return None
    gt = cfg.get("ground_truth", {})
    m = int(gt.get("samples", cfg["run"]["particles"]))
    return rejection_sample(P, m, seed=int(gt.get("seed", 1000))).samples


def cell_config(overrides, method, formulation, seed):
    """Preset for one cell with the user's config file and flags on top."""
    name = overrides["run"]["problem"]
    cfg = _merge(presets.preset(name, method, formulation), overrides)
    cfg["run"].update({"method": method, "formulation": formulation, "seed": seed})
    return validate(cfg)


def _solve_cell(overrides, cell):
    method, form, seed = cell
    cfg = cell_config(overrides, method, form, seed)
    P = build_problem(cfg)
    gt_seed = cfg.get("ground_truth", {}).get("seed", 1000 + seed)
    gt = _ground_truth(_merge(cfg, {"ground_truth": {"seed": gt_seed}}), P)
    X, _, record = run_trial(P, method, form, build_solve_config(cfg, seed), cfg.get("formulation", {}), gt)
    return X, record


def run_cells(overrides, cells, timing, jobs=1):
    """Run (method, formulation, seed) cells, possibly in parallel; files are
    written afterwards, one trial directory at a time. Returns metric rows in
    cell order."""
    name = overrides["run"]["problem"]
    out = Path(overrides["run"]["out"])
    if jobs == 1 or len(cells) == 1:
        results = [_solve_cell(overrides, c) for c in cells]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(delayed(_solve_cell)(overrides, c) for c in cells)
    rows = []
    for (method, form, seed), (X, record) in zip(cells, results):
        cfg = cell_config(overrides, method, form, seed)
        P = build_problem(cfg)
        directory = out / trial_id(name, method, form, cfg["run"]["particles"], seed)
        rows.append(write_trial(directory, name, P, X, record, timing))
    return rows


def _gradcheck(args):
    rng = np.random.default_rng(args.seed)
    problems = {
        "toy2d": (toy2d_problem(), rng.uniform(-2, 2, (8, 2))),
        "trajectory": (trajectory_problem(), None),
        "ik": (ik_problem(), rng.uniform(-2.5, 2.5, (6, 6))),
        "icp": (icp_problem(N=32), None),
    }
    worst = 0.0
    for name, (P, pts) in problems.items():
        if pts is None:
            pts = P.sample_init(rng, 6)
        for key, err in problem_gradient_checks(P, pts).items():
            print(f"{name:10s} {key:24s} {err:.3e}")
            worst = max(worst, err)
    print(f"max relative error {worst:.3e}")
    return 0 if worst < 1e-4 else 1


def build_parser():
    parser = _Parser(prog="constrained-svgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in PROBLEMS + ("matrix",):
        p = sub.add_parser(name, help=f"run the {name} experiment" if name != "matrix" else "run a trial matrix")
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--particles", type=int)
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--formulation", choices=KINDS)
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--timing", action="store_true", help="record wall time (outputs are then not byte-identical)")
    g = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    g.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args):
    """User overrides (config file, then flags) and the list of cells to run.

    Every cell is validated against its merged preset before anything runs."""
    overrides = read_config(args.config) if args.config else {}
    run = overrides.setdefault("run", {})
    problem = args.command if args.command != "matrix" else run.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError("matrix runs need [run] problem = one of " + ", ".join(PROBLEMS))
    run["problem"] = problem
    for key, value in (("method", args.method), ("formulation", args.formulation), ("seed", args.seed),
                       ("particles", args.particles), ("out", args.out)):
        if value is not None:
            run[key] = value
    run.setdefault("out", "results")
    method = run.get("method", "q")
    form = run.get("formulation", presets.default_formulation(problem, method))
    seed = run.get("seed", 0)
    block = overrides.get("matrix", {}) if args.command == "matrix" else {}
    if args.command != "matrix" and "matrix" in overrides:
        raise ConfigError("[matrix] is only valid for the matrix subcommand")
    seeds = block.get("seeds", [seed])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = list(range(seeds))
    if not isinstance(seeds, list) or not all(isinstance(v, int) for v in seeds):
        raise ConfigError("matrix seeds must be a count or a list of integers")
    methods = block.get("methods", [method])
    forms = block.get("formulations", [form])
    if not isinstance(methods, list) or not isinstance(forms, list):
        raise ConfigError("matrix methods and formulations must be lists")
    cells = [(m, f, s) for m in methods for f in forms for s in seeds]
    for m, f, s in cells:
        cell_config(overrides, m, f, s)
    return overrides, cells


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gradcheck":
        return _gradcheck(args)
    try:
        overrides, cells = resolve_config(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        jobs = overrides.get("matrix", {}).get("jobs", 1) if args.command == "matrix" else 1
        rows = run_cells(overrides, cells, args.timing, jobs)
    except Exception as exc:  # any solver failure maps to exit code 2
        print(f"solver failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.command == "matrix":
        path = Path(overrides["run"]["out"]) / "metrics.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(METRIC_KEYS), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        print(f"wrote {len(rows)} rows to {path}")
    else:
        print(json.dumps(rows[0], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
