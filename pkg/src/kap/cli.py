"""Command-line harness.

    kap run <experiment> [--config FILE] [--out DIR] [overrides]
    kap convergence <experiment> --grids 32,64,128 [overrides]
    kap compare A B --fields rho,u,T --norm l1 [--tol 0.02]

Exit codes: 0 success, 2 solver error, 3 config error, 4 comparison failure.
Thread count for the numba backend follows NUMBA_NUM_THREADS; set
KAP_BACKEND=numpy to force the pure-numpy kernels.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, KapError
from .experiments import (
    EXPERIMENTS,
    compare_runs,
    convergence_study,
    default_config,
    load_config,
    run_experiment,
)
from .io import write_error_record, write_series

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3
EXIT_COMPARE = 4

_OVERRIDE_FLAGS = {
    "scheme": ("--scheme", str, "time integrator"),
    "eps": ("--eps", float, "Knudsen number (or floor for the mixing field)"),
    "eps_kind": ("--eps-kind", str, "constant | mixing"),
    "dt": ("--dt", float, "fixed time step (linear_ode, porous_medium)"),
    "dt_factor": ("--dt-factor", float, "scale on the CFL time step"),
    "nu": ("--nu", float, "penalty over-estimation multiplier"),
    "n_x": ("--n-x", int, "spatial cells"),
    "n_v": ("--n-v", int, "velocity points per dimension"),
    "v_max": ("--v-max", float, "velocity truncation radius"),
    "t_end": ("--t-end", float, "final time"),
    "cfl": ("--cfl", float, "CFL factor for transport"),
    "output_interval": ("--output-interval", float, "diagnostics cadence"),
    "gamma": ("--gamma", float, "collision kernel exponent"),
    "quadrature_n": ("--quadrature-n", int, "kernel-mode quadrature order"),
}


def _add_overrides(p: argparse.ArgumentParser) -> None:
    for flag, typ, help_ in _OVERRIDE_FLAGS.values():
        p.add_argument(flag, type=typ, default=None, help=help_)
    p.add_argument("--snapshots", action="store_true", default=None, help="write distribution snapshots")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", default=None, help="output directory")


def _collect_overrides(args) -> dict:
    out = {}
    for name in _OVERRIDE_FLAGS:
        v = getattr(args, name)
        if v is not None:
            out[name] = v
    if args.snapshots is not None:
        out["snapshots"] = args.snapshots
    if args.out is not None:
        out["out_dir"] = args.out
    return out


def _build_config(args):
    overrides = _collect_overrides(args)
    if args.config:
        return load_config(args.config, experiment=getattr(args, "experiment", None), **overrides)
    return default_config(args.experiment, **overrides)


def cmd_run(args) -> int:
    try:
        cfg = _build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = run_experiment(cfg)
    except KapError as exc:
        write_error_record(cfg.out_dir, type(exc).__name__, str(exc), {"experiment": cfg.experiment})
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if cfg.experiment == "linear_ode" and outcome.get("overflow"):
        traj = outcome["trajectory"]
        write_error_record(
            cfg.out_dir, "Overflow", f"trajectory overflowed at step {traj.overflow_step}", {"scheme": cfg.scheme}
        )
        print(f"overflow flagged at step {traj.overflow_step}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"wrote {cfg.out_dir}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    try:
        cfg = _build_config(args)
        grids = [int(g) for g in args.grids.split(",")]
        if len(grids) < 2:
            raise ConfigError("need at least two grid sizes")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = convergence_study(cfg, grids)
    except KapError as exc:
        write_error_record(cfg.out_dir, type(exc).__name__, str(exc))
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rows = [
        [g, e1, eI]
        for g, e1, eI in zip(report.grids[1:], report.errors_l1, report.errors_linf)
    ]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "convergence.csv", ["n_x", "err_l1", "err_linf"], rows)
    print(
        f"eps={report.eps}: slope_l1={report.slope_l1:.3f} (resid {report.fit_residual_l1:.2e}) "
        f"slope_linf={report.slope_linf:.3f}"
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    fields = args.fields.split(",")
    try:
        report = compare_runs(args.run_a, args.run_b, fields=fields, norm=args.norm)
    except KapError as exc:
        print(f"compare error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    worst = 0.0
    for f, dists in report["fields"].items():
        for t, d in zip(report["times"], dists):
            print(f"t={t:g} {f}: {d:.4e}")
            worst = max(worst, d)
    if args.out:
        rows = []
        for k, t in enumerate(report["times"]):
            rows.append([t] + [report["fields"][f][k] for f in report["fields"]])
        write_series(args.out, ["t"] + list(report["fields"]), rows)
    if args.tol is not None and worst > args.tol:
        print(f"comparison failed: worst {worst:.4e} > tol {args.tol}", file=sys.stderr)
        return EXIT_COMPARE
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("experiment", choices=EXPERIMENTS)
    _add_overrides(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_conv = sub.add_parser("convergence", help="self-convergence ladder")
    p_conv.add_argument("experiment", choices=EXPERIMENTS)
    p_conv.add_argument("--grids", required=True, help="comma-separated n_x list, e.g. 32,64,128")
    _add_overrides(p_conv)
    p_conv.set_defaults(fn=cmd_convergence)

    p_cmp = sub.add_parser("compare", help="compare two run directories")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    p_cmp.add_argument("--fields", default="rho,u,T")
    p_cmp.add_argument("--norm", default="l1", choices=["l1", "linf"])
    p_cmp.add_argument("--tol", type=float, default=None)
    p_cmp.add_argument("--out", default=None, help="write distances to CSV")
    p_cmp.set_defaults(fn=cmd_compare)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
