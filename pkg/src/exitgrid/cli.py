"""Command-line entry point: solve, verify, simulate, and hypotheses.

Exit codes: 0 success / verification pass, 1 configuration or input error,
2 solver non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .config import ConfigError, RunConfig, parse_config_file
from .dynamics import BlowupError, integrate
from .grids import INTERIOR
from .hypotheses import check_h5_sampled, check_h6_escape
from .solvers import (
    EmptyTargetError,
    NonpositiveRHSError,
    NotConvergedError,
    solve_fast_marching,
    solve_value_iteration,
)
from .verify import check_side_condition, hjb_residual

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitgrid",
        description="Exit-time value-function solver, simulator, and verifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("solve", "compute a value field and write value.csv"),
        ("verify", "check a candidate field written in the value CSV format"),
        ("simulate", "integrate one controlled trajectory and write trajectory.csv"),
        ("hypotheses", "run the sampled positivity/affordability probes"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the run configuration")
        p.add_argument("--out", default=".", help="output directory (created if absent)")
        if name == "verify":
            p.add_argument("--candidate", default=None, help="candidate field CSV (overrides config)")
    return parser


def run_solve(cfg: RunConfig, out_dir: str) -> int:
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    scheme = cfg.scheme()
    if scheme == "fast_marching":
        rhs = problem.metadata.get("gradient_rhs")
        if rhs is None:
            raise ConfigError("fast_marching needs an instance with an isotropic gradient rhs")
        field = solve_fast_marching(rhs, problem.target, grid, exit_cost=problem.exit_cost)
        summary = "SOLVED scheme=fast_marching nodes={}".format(grid.n_nodes)
    else:
        field = solve_value_iteration(problem, grid, cfg.build_solver_params())
        summary = "SOLVED sweeps={} residual={:.3e}".format(
            field.meta["sweeps"], field.meta["last_update"]
        )
    io.ensure_dir(out_dir)
    io.field_to_csv(field, os.path.join(out_dir, "value.csv"))
    print(summary)
    return 0


def run_verify(cfg: RunConfig, out_dir: str, candidate_path: str | None) -> int:
    problem = cfg.build_problem()
    path = candidate_path or cfg.get("verify", "candidate")
    if path is None:
        raise ConfigError("verify needs a candidate field (--candidate or [verify] candidate)")
    try:
        field = io.field_from_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read candidate field: {exc}") from exc

    margin = cfg.get("verify", "target_margin", 0.0)
    lb_threshold = cfg.get("verify", "lower_bound_threshold", -1e-9)
    target_tol = cfg.get("verify", "target_value_tol", 1e-9)
    report = hjb_residual(field, problem, target_margin=margin,
                          side_condition_threshold=lb_threshold)
    sc = check_side_condition(field, lb_threshold, exit_cost=problem.exit_cost,
                              target_value_tol=target_tol)
    report.side_condition = sc

    threshold = cfg.get("verify", "residual_threshold", 0.0)
    if not threshold:
        h = float(np.max(field.grid.spacing))
        interior = field.values[(field.roles == INTERIOR) & field.finite_mask()]
        lip = 1.0
        if interior.size:
            grads = np.gradient(np.where(field.finite_mask(), field.values, np.nan),
                                *field.grid.spacing)
            grads = np.nan_to_num(np.stack(np.atleast_1d(grads)), nan=0.0)
            lip = max(1.0, float(np.nanmax(np.abs(grads))))
        threshold = 10.0 * h * lip

    ok = report.max_abs_residual <= threshold and sc.bounded_below_pass and sc.target_pass
    io.ensure_dir(out_dir)
    io.residual_report_to_csv(report, os.path.join(out_dir, "residual.csv"))
    line = "{} max_r={:.6e} min_w={:.6e} target_err={:.6e}".format(
        "PASS" if ok else "FAIL", report.max_abs_residual, sc.min_value, sc.target_max_abs
    )
    with open(os.path.join(out_dir, "verify_summary.txt"), "w") as fh:
        fh.write(line + "\n")
    print(line)
    return 0 if ok else 3


def run_simulate(cfg: RunConfig, out_dir: str) -> int:
    problem = cfg.build_problem()
    sec = cfg.require("simulate")
    for key in ("x0", "dt", "t_max"):
        if key not in sec:
            raise ConfigError(f"[simulate] needs {key}")
    signal = cfg.build_signal(problem.controls.control_dim)
    traj = integrate(
        problem,
        np.asarray(sec["x0"], dtype=float),
        signal,
        sec["dt"],
        sec["t_max"],
        stop_at_target=sec.get("stop_at_target", True),
    )
    io.ensure_dir(out_dir)
    io.trajectory_to_csv(traj, os.path.join(out_dir, "trajectory.csv"))
    if traj.exited:
        print(f"SIMULATED exit_time={traj.exit_time!r} cost={traj.final_cost!r}")
    else:
        print(f"SIMULATED exit_time=none cost={traj.final_cost!r}")
    return 0


def run_hypotheses(cfg: RunConfig, out_dir: str) -> int:
    problem = cfg.build_problem()
    sec = cfg.sections.get("hypotheses", {})
    check = sec.get("check", "h5")
    io.ensure_dir(out_dir)
    if check == "h5":
        report = check_h5_sampled(
            problem,
            n_states=sec.get("n_states", 100),
            n_signals=sec.get("n_signals", 10),
            horizon=sec.get("horizon", 1.0),
            seed=sec.get("seed", 0),
            n_steps=sec.get("n_steps", 128),
        )
        lines = [
            f"verdict {report.verdict}",
            f"samples {report.samples}",
            f"min_positive_cost {report.min_positive_cost!r}",
        ]
        for v in report.violations:
            lines.append(
                "violation x0={} signal={} cost={!r}".format(
                    " ".join(repr(float(c)) for c in v.x0), v.signal_desc, v.cost
                )
            )
        with open(os.path.join(out_dir, "h5_report.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(lines[0])
        return 0
    if check == "h6":
        horizons = sec.get("horizons")
        report = check_h6_escape(
            problem,
            horizons=None if horizons is None else list(horizons),
            steps_per_segment=sec.get("n_steps", 4096),
        )
        if not report.families:
            raise ConfigError("instance registers no escape families")
        for fam in report.families:
            path = os.path.join(out_dir, f"escape_{fam.name}.csv")
            with open(path, "w") as fh:
                fh.write("# horizon, cost\n")
                for T, c in zip(fam.horizons, fam.costs):
                    fh.write(f"{T!r},{c!r}\n")
            print(
                f"family {fam.name} verdict={fam.verdict} exponent={fam.exponent:.4f}"
                + (f" limit={fam.limit_estimate!r}" if fam.limit_estimate is not None else "")
            )
        return 0
    raise ConfigError(f"unknown hypotheses check {check!r}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config_file(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "solve":
            return run_solve(cfg, args.out)
        if args.command == "verify":
            return run_verify(cfg, args.out, args.candidate)
        if args.command == "simulate":
            return run_simulate(cfg, args.out)
        return run_hypotheses(cfg, args.out)
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, EmptyTargetError, NonpositiveRHSError, BlowupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
