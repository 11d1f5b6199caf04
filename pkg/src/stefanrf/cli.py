"""Experiment runner: solve a benchmark (or user problem) and persist artifacts.

A run writes, under ``--output-dir``:

* ``summary.json``      -- losses, errors, epsilon, convexity verdict, terminations
* ``history_stage1.csv`` / ``history_stage2.csv`` -- per-iteration loss/rank/wall time
* ``errors.csv``        -- one row per stage with the error norms
* ``stage1_field_q*.json`` / ``stage1_boundary.json`` / ``stage2_composed.json``
* optional ``field_error_t*.csv`` grids and ``points.csv`` / ``system_*`` dumps

Configuration comes from a flat ``key = value`` file and/or flags; flags win.
Exit codes: 0 success, 2 configuration problems, 3 numerical divergence
(partial artifacts plus an error record are kept).
"""

from __future__ import annotations

import argparse
import csv
import importlib.util
import json
import sys
import time
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Optional

import numpy as np

from .assembly import LossWeights
from .benchmarks import (
    BenchmarkId,
    benchmark_defaults,
    build_test_grid,
    evaluate_errors,
    make_benchmark,
)
from .collocation import CollocationCounts, export_csv, sample_initial
from .convexity import diagnose
from .correction import (
    assemble_perturbation,
    assemble_perturbation_jacobian,
    compose,
    nl_hessian_builder,
    run_correction,
    save_composed,
)
from .errors import ConfigurationError, DivergenceError, SolverError
from .features import DerivSpec
from .gauss_newton import GNConfig, write_history_csv
from .nets import save_checkpoint
from .problems import validate
from .solve import seed_mix, solve_stage1

SCHEMA_VERSION = "1"


@dataclass
class RunConfig:
    benchmark: str = ""
    seed: int = 0
    neurons: Optional[int] = None
    boundary_neurons: Optional[int] = None
    stages: str = "both"  # "stage1" | "both"
    output_dir: str = "stefanrf_out"
    emit_fields: bool = False
    export_points: bool = False
    dump_system: bool = False

    n_interior: Optional[int] = None
    n_initial: Optional[int] = None
    n_boundary: Optional[int] = None
    n_interface: Optional[int] = None
    n_initial_interface: Optional[int] = None
    n_stefan: Optional[int] = None

    beta_pde: float = 1.0
    beta_initial: float = 1.0
    beta_boundary: float = 1.0
    beta_interface: float = 1.0
    beta_initial_interface: float = 1.0
    beta_stefan: float = 1.0

    max_iters: Optional[int] = None
    stage2_max_iters: Optional[int] = None
    svd_threshold: float = 1e-12
    svd_absolute: bool = False
    tolerance: float = 1e-12
    no_resample: bool = False
    interior_refresh: str = "full"
    reuse_stage1_points: bool = False
    epsilon_floor: float = 1e-30
    size_factor: int = 2


_BOOL_KEYS = {"emit_fields", "export_points", "dump_system", "svd_absolute", "no_resample", "reuse_stage1_points"}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` format; '#' starts a comment."""
    values = {}
    known = {f.name for f in dc_fields(RunConfig)}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = raw
    return values


def _coerce(key: str, raw: str):
    if key in _BOOL_KEYS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"key {key!r} expects a boolean, got {raw!r}")
    target = RunConfig.__dataclass_fields__[key].type
    if key in ("benchmark", "stages", "output_dir", "interior_refresh"):
        return raw
    if "float" in str(target):
        return float(raw)
    return int(raw)


def build_config(file_values: dict, cli_overrides: dict) -> RunConfig:
    config = RunConfig()
    for key, raw in file_values.items():
        setattr(config, key, _coerce(key, raw))
    for key, value in cli_overrides.items():
        if value is not None:
            setattr(config, key, value)
    if config.stages not in ("stage1", "both"):
        raise ConfigurationError(f"stages must be 'stage1' or 'both', got {config.stages!r}")
    if config.interior_refresh not in ("violators", "full"):
        raise ConfigurationError(f"interior_refresh must be 'violators' or 'full', got {config.interior_refresh!r}")
    if not config.benchmark:
        raise ConfigurationError("no benchmark given (flag --benchmark or config key 'benchmark')")
    return config


def _load_problem(config: RunConfig):
    """Benchmark id, or a path to a python file exporting build_problem()."""
    name = config.benchmark
    if name.endswith(".py"):
        path = Path(name)
        if not path.exists():
            raise ConfigurationError(f"problem file not found: {name}")
        spec = importlib.util.spec_from_file_location("stefanrf_user_problem", path)
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        if not hasattr(module, "build_problem"):
            raise ConfigurationError(f"{name} must define build_problem() -> StefanProblem")
        problem = module.build_problem()
        defaults = None
    else:
        problem = make_benchmark(name)
        defaults = benchmark_defaults(name)
    return problem, defaults


def _resolve_counts(config: RunConfig, m: int, h: int) -> CollocationCounts:
    base = CollocationCounts.from_sizes(m, h)
    return CollocationCounts(
        interior=config.n_interior or base.interior,
        initial=config.n_initial or base.initial,
        boundary=config.n_boundary or base.boundary,
        interface=config.n_interface or base.interface,
        initial_interface=config.n_initial_interface or base.initial_interface,
        stefan=config.n_stefan or base.stefan,
    )


def _weights(config: RunConfig, num_phases: int) -> LossWeights:
    rep = lambda w: (float(w),) * num_phases
    return LossWeights(
        pde=rep(config.beta_pde),
        initial=rep(config.beta_initial),
        boundary=rep(config.beta_boundary),
        interface=rep(config.beta_interface),
        initial_interface=float(config.beta_initial_interface),
        stefan=float(config.beta_stefan),
    )


def _emit_field_grids(problem, field_evals, boundary_eval, out_dir: Path, stage: str):
    """Point-wise error grids at three normalized times."""
    if problem.exact is None:
        return []
    t0, t1 = problem.time_interval
    written = []
    for frac in (0.2, 0.5, 0.8):
        t = t0 + frac * (t1 - t0)
        pts = _slice_points(problem, t)
        rows = []
        for q in range(problem.num_phases):
            exact = problem.exact.fields[q].eval(pts[q], DerivSpec.value(problem.field_dim))
            pred = field_evals[q].eval(pts[q], DerivSpec.value(problem.field_dim))
            for i in range(pts[q].shape[0]):
                rows.append([q + 1, *pts[q][i, :-1], t, exact[i], pred[i], abs(exact[i] - pred[i])])
        path = out_dir / f"{stage}_field_error_t{frac:.1f}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            coords = [f"c{i}" for i in range(problem.field_dim)]
            writer.writerow(["phase", *coords, "t", "exact", "pred", "abs_err"])
            writer.writerows(rows)
        written.append(path.name)
    return written


def _slice_points(problem, t: float):
    """Spatial grids inside each phase at one time, in field coordinates."""
    from .nets import ParamKind

    r_b = problem.exact.boundary
    out = []
    if problem.coords == "radial":
        params = np.array([[0.0, t]]) if problem.param_dim == 2 else np.array([[t]])
        r_t = float(r_b.eval(params, DerivSpec.value(problem.param_dim - 1))[0])
        r_max = float(np.sqrt(sum(max(abs(b[0]), abs(b[1])) ** 2 for b in problem.domain.bounds)))
        rr = np.linspace(r_t, r_max, 201)
        out.append(np.column_stack([rr, np.full_like(rr, t)]))
    elif problem.boundary_param is ParamKind.GRAPH:
        lo_y, hi_y = problem.domain.bounds[problem.graph_axis]
        ys = np.linspace(lo_y, hi_y, 101)
        params = np.column_stack([ys, np.full_like(ys, t)])
        r_vals = r_b.eval(params, DerivSpec.value(1))
        pts = []
        for y, r in zip(ys, r_vals):
            xs = np.linspace(problem.domain.bounds[0][0], r, 101)
            pts.append(np.column_stack([xs, np.full(101, y), np.full(101, t)]))
        out.append(np.concatenate(pts))
    else:
        r_t = float(r_b.eval(np.array([[t]]), DerivSpec.value(0))[0])
        x_lo, x_hi = problem.domain.bounds[0]
        for q in range(problem.num_phases):
            xs = np.linspace(x_lo, r_t, 201) if problem.phase_sides[q].value == "inside" else np.linspace(r_t, x_hi, 201)
            out.append(np.column_stack([xs, np.full_like(xs, t)]))
    while len(out) < problem.num_phases:
        out.append(out[0])
    return out


def run(config: RunConfig) -> int:
    """Execute one experiment; returns the process exit code."""
    try:
        problem, defaults = _load_problem(config)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    diagnostics = validate(problem)
    if diagnostics:
        for d in diagnostics:
            print(f"invalid problem: {d}", file=sys.stderr)
        return 2

    m = config.neurons or (defaults.neurons if defaults else None)
    h = config.boundary_neurons or (defaults.boundary_neurons if defaults else None)
    if m is None or h is None:
        print("error: user problems need --neurons and --boundary-neurons", file=sys.stderr)
        return 2
    stage1_iters = config.max_iters if config.max_iters is not None else (defaults.stage1_max_iters if defaults else 40)
    stage2_iters = (
        config.stage2_max_iters if config.stage2_max_iters is not None else (defaults.stage2_max_iters if defaults else 15)
    )

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = _resolve_counts(config, m, h)
    weights = _weights(config, problem.num_phases)
    grid = build_test_grid(problem) if problem.exact is not None else None

    summary = {
        "schema_version": SCHEMA_VERSION,
        "benchmark": config.benchmark,
        "seed": config.seed,
        "m": m,
        "h": h,
        "stages": config.stages,
        "artifacts": [],
    }
    errors_rows = []

    def finish(code=0):
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        if errors_rows:
            with open(out_dir / "errors.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["schema_version", "benchmark", "stage", "e_u_rel_l2", "e_R_rel_l2", "e_u_linf",
                     "seed", "M", "H", "runtime_s"]
                )
                writer.writerows(errors_rows)
            summary["artifacts"].append("errors.csv")
            (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        return code

    gn1 = GNConfig(
        max_iterations=stage1_iters,
        svd_threshold=config.svd_threshold,
        svd_threshold_relative=not config.svd_absolute,
        tolerance=config.tolerance,
        resample_each_iter=not config.no_resample,
    )

    t_start = time.perf_counter()
    try:
        stage1 = solve_stage1(
            problem, m, h, seed=config.seed, counts=counts, weights=weights, gn=gn1,
            u_weight_ranges=defaults.u_weight_ranges if defaults else None,
            u_bias_range=defaults.u_bias_range if defaults else (-1.0, 1.0),
            r_weight_range=defaults.r_weight_range if defaults else (-1.0, 1.0),
            r_bias_range=defaults.r_bias_range if defaults else (-1.0, 1.0),
            interior_refresh=config.interior_refresh,
        )
    except DivergenceError as exc:
        summary["error"] = {"stage": "stage1", "type": "divergence", "message": str(exc)}
        return max(finish(3), 3)
    stage1_runtime = time.perf_counter() - t_start

    write_history_csv(stage1.report, out_dir / "history_stage1.csv")
    summary["artifacts"].append("history_stage1.csv")
    for q, net in enumerate(stage1.fields):
        name = f"stage1_field_q{q + 1}.json"
        save_checkpoint(out_dir / name, net)
        summary["artifacts"].append(name)
    save_checkpoint(out_dir / "stage1_boundary.json", stage1.boundary)
    summary["artifacts"].append("stage1_boundary.json")

    stage1_errors = evaluate_errors(problem, grid, stage1.fields, stage1.boundary) if grid else None
    summary["stage1"] = {
        "loss": stage1.loss,
        "iterations": stage1.report.iterations_used,
        "termination": stage1.report.termination.value,
        "runtime_s": stage1_runtime,
        "notes": stage1.report.notes,
    }
    if stage1_errors:
        summary["stage1"].update(stage1_errors)
        errors_rows.append(
            [SCHEMA_VERSION, config.benchmark, "stage1", stage1_errors["e_u_rel_l2"],
             stage1_errors["e_R_rel_l2"], stage1_errors["e_u_linf"], config.seed, m, h, round(stage1_runtime, 3)]
        )
    if config.emit_fields:
        summary["artifacts"] += _emit_field_grids(problem, stage1.fields, stage1.boundary, out_dir, "stage1")
    if config.export_points:
        export_csv(stage1.colloc, out_dir / "points.csv")
        summary["artifacts"].append("points.csv")
    if config.dump_system:
        from .assembly import assemble_both, dump_system as dump

        stack, jac = assemble_both(problem, stage1.fields, stage1.boundary, stage1.colloc, weights)
        dump(stack, jac, out_dir / "system_stage1")
        summary["artifacts"] += ["system_stage1_T.npy", "system_stage1_J.npy", "system_stage1_header.json"]

    if config.stages == "stage1":
        return finish(0)

    gn2 = GNConfig(
        max_iterations=stage2_iters,
        svd_threshold=config.svd_threshold,
        svd_threshold_relative=not config.svd_absolute,
        tolerance=config.tolerance,
        resample_each_iter=not config.no_resample,
    )
    t_start = time.perf_counter()
    try:
        state, report2 = run_correction(
            problem, stage1, config=gn2, weights=weights,
            size_factor=config.size_factor, epsilon_floor=config.epsilon_floor,
            reuse_stage1_points=config.reuse_stage1_points, interior_refresh=config.interior_refresh,
        )
    except DivergenceError as exc:
        summary["error"] = {"stage": "stage2", "type": "divergence", "message": str(exc)}
        return max(finish(3), 3)
    stage2_runtime = time.perf_counter() - t_start

    write_history_csv(report2, out_dir / "history_stage2.csv")
    summary["artifacts"].append("history_stage2.csv")
    save_composed(out_dir / "stage2_composed.json", state)
    summary["artifacts"].append("stage2_composed.json")

    comp_fields, comp_boundary = compose(state)
    stage2_errors = evaluate_errors(problem, grid, comp_fields, comp_boundary) if grid else None
    xi_max = max(
        float(np.max(np.abs(f.coeffs))) for f in (*state.correction_fields, state.correction_boundary)
    )
    summary["epsilon"] = state.epsilon
    summary["stage2"] = {
        "loss": report2.final_loss,
        "iterations": report2.iterations_used,
        "termination": report2.termination.value,
        "runtime_s": stage2_runtime,
        "correction_coeff_max": xi_max,
        "notes": report2.notes,
    }
    if stage2_errors:
        summary["stage2"].update(stage2_errors)
        errors_rows.append(
            [SCHEMA_VERSION, config.benchmark, "stage2", stage2_errors["e_u_rel_l2"],
             stage2_errors["e_R_rel_l2"], stage2_errors["e_u_linf"], config.seed, m, h, round(stage2_runtime, 3)]
        )
    if config.emit_fields:
        summary["artifacts"] += _emit_field_grids(problem, comp_fields, comp_boundary, out_dir, "stage2")

    # convexity diagnostic at the solved correction, on a deterministic point set
    diag_colloc = sample_initial(
        problem, stage1.colloc.counts.doubled(), seed=seed_mix(config.seed, 4099), boundary=stage1.boundary
    )
    stack, _ = assemble_perturbation(problem, state, diag_colloc, weights)
    jac = assemble_perturbation_jacobian(problem, state, diag_colloc, weights)
    report = diagnose(jac.matrix, stack.values, nl_hessian_builder(problem, state, diag_colloc, weights), state.epsilon)
    summary["convexity"] = report.as_dict()

    return finish(0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stefanrf", description="Two-stage Stefan problem benchmark runner")
    parser.add_argument("--benchmark", help="benchmark id (%s) or path to a .py problem file" % ", ".join(b.value for b in BenchmarkId))
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--neurons", type=int, help="field network size M (default: published value)")
    parser.add_argument("--boundary-neurons", dest="boundary_neurons", type=int, help="boundary network size H")
    parser.add_argument("--stages", choices=["stage1", "both"])
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--emit-fields", dest="emit_fields", action="store_const", const=True)
    parser.add_argument("--export-points", dest="export_points", action="store_const", const=True)
    parser.add_argument("--dump-system", dest="dump_system", action="store_const", const=True)
    for key in ("n_interior", "n_initial", "n_boundary", "n_interface", "n_initial_interface", "n_stefan"):
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
    for key in ("beta_pde", "beta_initial", "beta_boundary", "beta_interface", "beta_initial_interface", "beta_stefan"):
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    parser.add_argument("--max-iters", dest="max_iters", type=int)
    parser.add_argument("--stage2-max-iters", dest="stage2_max_iters", type=int)
    parser.add_argument("--svd-threshold", dest="svd_threshold", type=float)
    parser.add_argument("--svd-absolute", dest="svd_absolute", action="store_const", const=True)
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--no-resample", dest="no_resample", action="store_const", const=True)
    parser.add_argument("--interior-refresh", dest="interior_refresh", choices=["violators", "full"])
    parser.add_argument("--reuse-stage1-points", dest="reuse_stage1_points", action="store_const", const=True)
    parser.add_argument("--epsilon-floor", dest="epsilon_floor", type=float)
    parser.add_argument("--size-factor", dest="size_factor", type=int)
    args = parser.parse_args(argv)

    try:
        file_values = parse_config_file(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k != "config"}
        config = build_config(file_values, overrides)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        return run(config)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
