"""Command-line harness: scenario generation, estimation, verification.

Subcommands:
    simulate        generate a synthetic scenario from a JSON spec
    estimate        fit shapes (and optionally forces) to a scenario log
    force           shorthand for estimate --mode shape+force
    verify          run the deterministic property suite
    jacobian-check  finite-difference report for the analytic Jacobians

Exit codes: 0 success, 1 validation failure, 2 verification failure,
3 I/O failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .estimation import estimate_log, write_estimates
from .jacobians import finite_difference_check
from .kinematics import InstrumentParams, random_shape_state
from .scenarios import ExperimentSpec, build_scenario, read_scenario, write_scenario
from .verify import render_report, run_verification

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_VERIFICATION = 2
EXIT_IO = 3


def _load_spec(args):
    if args.spec is not None:
        spec = ExperimentSpec.from_json_file(args.spec)
    else:
        spec = ExperimentSpec()
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)
    return spec


def cmd_simulate(args):
    spec = _load_spec(args)
    log = build_scenario(spec)
    stem = args.stem or f"{spec.kind}_seed{spec.seed}"
    sidecar = write_scenario(log, args.out, stem)
    print(f"wrote scenario '{stem}' ({log.n_samples} samples) -> {sidecar}")
    return EXIT_OK


def cmd_estimate(args, mode=None):
    log = read_scenario(args.log)
    mode = mode or args.mode
    result = estimate_log(log, model=args.model, mode=mode,
                          wrench_mode=args.wrench_mode)
    stem = args.stem or (Path(args.log).stem + f".{args.model}")
    est_path, summary_path = write_estimates(
        result, args.out, stem, write_shapes=(args.format == "csv"))
    if args.format == "json":
        print(json.dumps(result.summary, indent=2, sort_keys=True))
    else:
        print(f"wrote {est_path} and {summary_path}")
        print(json.dumps(result.summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_force(args):
    return cmd_estimate(args, mode="shape+force")


def cmd_verify(args):
    params = InstrumentParams()
    report = run_verification(params, seed=args.seed)
    text = render_report(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(f"wrote {out}")
    else:
        print(text, end="")
    for name in ("jacobian_fd", "energy_gradient", "cc_reduction",
                 "plant_mesh_convergence"):
        status = "pass" if report[name]["pass"] else "FAIL"
        print(f"{name}: {status}", file=sys.stderr)
    return EXIT_OK if report["all_pass"] else EXIT_VERIFICATION


def cmd_jacobian_check(args):
    params = InstrumentParams()
    rng = np.random.default_rng(args.seed)
    reports = []
    worst = {"max_abs_error_position": 0.0, "max_abs_error_rotation": 0.0,
             "max_abs_error_joint": 0.0}
    for _ in range(args.samples):
        state = random_shape_state(rng)
        rep = finite_difference_check(state, params, args.step).to_json_dict()
        for key in worst:
            worst[key] = max(worst[key], rep[key])
        reports.append(rep)
    out = {"seed": args.seed, "samples": args.samples, "step": args.step,
           "worst": worst}
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polybend",
        description="Shape and tip-force estimation for tendon-driven "
                    "continuum instruments, with synthetic validation scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    p_sim.add_argument("--spec", help="JSON experiment spec file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.add_argument("--stem", default=None, help="output file stem")
    p_sim.set_defaults(func=cmd_simulate)

    def add_estimate_args(p):
        p.add_argument("log", help="scenario sidecar JSON path")
        p.add_argument("--model", choices=("cc", "poly2"), default="poly2")
        p.add_argument("--wrench-mode", choices=("force-only", "min-norm"),
                       default="force-only",
                       help="tip-load recovery: pure-force least squares "
                            "(point contact) or minimum-norm wrench")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--stem", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_est = sub.add_parser("estimate", help="estimate shapes from a log")
    add_estimate_args(p_est)
    p_est.add_argument("--mode", choices=("shape", "shape+force"),
                       default="shape")
    p_est.set_defaults(func=cmd_estimate)

    p_force = sub.add_parser("force", help="estimate shapes and tip forces")
    add_estimate_args(p_force)
    p_force.set_defaults(func=cmd_force)

    p_ver = sub.add_parser("verify", help="run the property suite")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", default=None, help="report JSON path")
    p_ver.set_defaults(func=cmd_verify)

    p_jac = sub.add_parser("jacobian-check",
                           help="finite-difference Jacobian report")
    p_jac.add_argument("--seed", type=int, default=0)
    p_jac.add_argument("--samples", type=int, default=100)
    p_jac.add_argument("--step", type=float, default=1e-6)
    p_jac.add_argument("--out", default=None)
    p_jac.set_defaults(func=cmd_jacobian_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
