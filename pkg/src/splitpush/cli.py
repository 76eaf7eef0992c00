"""Command-line harness.

Subcommands
-----------
check      structure probes: volume / time-symmetry / Poisson residuals
sweep      step-size sweep of an experiment against its reference orbit
longrun    windowed conservation record of one long integration
reference  reference orbit samples at the comparison times

``--experiment`` selects a built-in setup by name; ``--config`` loads a JSON
file with the same keys as ExperimentConfig (a built-in ``experiment`` name
plus overrides, or a fully spelled-out custom setup).

Exit codes: 0 success, 2 configuration error, 3 numerical failure (blow-up
or failed probes), 4 reference self-convergence failure.
"""

import argparse
import sys
from dataclasses import replace

from . import harness
from .harness import ConfigError, NumericalFailure, ReferenceConvergenceError
from .integrators import COMPOSITIONS, METHOD_IDS

FULL_SCALE_FACTOR = 100


def _add_config_args(parser):
    parser.add_argument("--experiment", metavar="NAME",
                        help="built-in experiment name: "
                             + ", ".join(harness.BUILTIN_EXPERIMENTS))
    parser.add_argument("--config", metavar="FILE",
                        help="JSON experiment configuration")
    parser.add_argument("--out", metavar="FILE",
                        help="output CSV path (default <experiment>_<cmd>.csv);"
                             " a .meta.json sidecar is written next to it")
    parser.add_argument("--full-scale", action="store_true",
                        help=f"run at {FULL_SCALE_FACTOR}x the desk-scale "
                             "horizon (sweep duration, longrun steps and "
                             "window); hours of compute, not for CI")


def _config_from_args(args):
    if (args.experiment is None) == (args.config is None):
        raise ConfigError("pass exactly one of --experiment or --config")
    if args.config is not None:
        return harness.load_config(args.config)
    return harness.builtin_experiment(args.experiment)


def _write_outputs(args, command, config, rows, meta):
    out = args.out or f"{config.experiment}_{command}.csv"
    harness.write_csv(out, rows)
    meta_path = harness.meta_path_for(out)
    harness.write_meta(meta_path, meta)
    print(f"wrote {out} ({len(rows)} rows) and {meta_path}")
    return out


def _cmd_check(args):
    rows = harness.run_check(h_factor=args.h_factor)
    n_fail = 0
    for r in rows:
        status = "ok" if r.ok else "FAIL"
        n_fail += not r.ok
        print(f"{r.field_kind:16s} {r.method:16s} {r.probe:9s} "
              f"{r.value:12.3e} <= {r.threshold:g}  {status}")
    print(f"{len(rows)} probes, {n_fail} failures")
    return 0 if n_fail == 0 else 3


def _cmd_sweep(args):
    config = _config_from_args(args)
    if args.full_scale:
        config = replace(config,
                         duration=config.duration * FULL_SCALE_FACTOR)
    result = harness.run_sweep(config)
    ref = result.reference
    _write_outputs(args, "sweep", config, result.rows, result.meta)
    print(f"reference: h_ref={ref.h_ref:.6g} deviation={ref.deviation:.3g} "
          f"refinements={ref.refinements}")
    return 0


def _cmd_longrun(args):
    config = _config_from_args(args)
    n_steps = args.steps
    window = args.window
    if args.full_scale:
        n_steps *= FULL_SCALE_FACTOR
        if window is not None:
            window *= FULL_SCALE_FACTOR
    if args.h is not None and args.h_factor is not None:
        raise ConfigError("pass at most one of --h or --h-factor")
    h = args.h
    h_factor = args.h_factor
    if h is None and h_factor is None:
        h_factor = 1.0
    result = harness.run_longrun(
        config, args.method, n_steps, window=window, h=h, h_factor=h_factor,
        fp_iters=args.fp_iters, composition=args.composition,
        inner=args.inner)
    _write_outputs(args, "longrun", config, result.rows, result.meta)
    print(f"method={args.method} h={result.h:.6g} steps={result.n_steps} "
          f"window={result.window} status={result.status}")
    if result.status != "ok":
        print(f"splitpush: integration left IEEE range after "
              f"{result.n_done} steps", file=sys.stderr)
        return 3
    return 0


def _cmd_reference(args):
    config = _config_from_args(args)
    ref = harness.make_reference(config)
    rows = harness.reference_rows(config, ref)
    meta = harness.reference_meta(config, ref)
    _write_outputs(args, "reference", config, rows, meta)
    print(f"h_ref={ref.h_ref:.6g} deviation={ref.deviation:.3g} "
          f"refinements={ref.refinements}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="splitpush",
        description="Splitting integrators for charged-particle motion: "
                    "structure checks, convergence sweeps, long-run "
                    "invariant tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="structure probes for the step maps")
    p.add_argument("--h-factor", type=float, default=0.02,
                   help="probe step in ideal-trap gyration periods "
                        "(default 0.02)")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sweep", help="step-size sweep against a reference")
    _add_config_args(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("longrun", help="windowed long-time conservation run")
    _add_config_args(p)
    p.add_argument("--method", required=True, choices=METHOD_IDS)
    p.add_argument("--steps", type=int, default=100_000,
                   help="number of steps (default 100000)")
    p.add_argument("--window", type=int, default=None,
                   help="steps per reduction window (default steps//1000)")
    p.add_argument("--h", type=float, default=None,
                   help="absolute step size")
    p.add_argument("--h-factor", type=float, default=None,
                   help="step size in local gyration periods at the start "
                        "position (default 1.0 when --h is not given)")
    p.add_argument("--fp-iters", type=int, default=None,
                   help="fixed-point sweeps for the implicit maps "
                        "(defaults per method)")
    p.add_argument("--composition", default="triple_jump",
                   choices=sorted(COMPOSITIONS),
                   help="substep table for the composed method")
    p.add_argument("--inner", default="impl_midpoint",
                   choices=("impl_midpoint", "impl_strang"),
                   help="mid-step map the composed method repeats")
    p.set_defaults(func=_cmd_longrun)

    p = sub.add_parser("reference",
                       help="write the reference orbit samples")
    _add_config_args(p)
    p.set_defaults(func=_cmd_reference)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"splitpush: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"splitpush: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ReferenceConvergenceError as exc:
        print(f"splitpush: reference did not converge: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
