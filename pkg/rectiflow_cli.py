#!/usr/bin/env python3
"""rectiflow CLI

Install with: uv tool install rectiflow -e .
Run from anywhere: rectiflow rectify --problem problems/exponential.yaml --out out/

Exit codes: 0 ok, 1 hypothesis or verification failure, 2 numerical failure, 3 input error.
"""

import argparse
import sys
import time
from pathlib import Path

# Determine project root from this script's location
_script_path = Path(__file__).resolve()
_root = _script_path.parent
sys.path.insert(0, str(_root))

from rectiflow import __version__  # noqa: E402

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_NUMERICAL = 2
EXIT_INPUT = 3

LOG_LEVELS = ["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"]


def _load(args):
    from rectiflow.problem_file import load_problem

    return load_problem(args.problem).with_overrides(args.rtol, args.atol, args.samples)


def _command_echo(args) -> list:
    parts = [args.command]
    sub = getattr(args, "symmetry_command", None)
    if sub:
        parts.append(sub)
    return parts


def _finish(args, report, summary, started: float) -> int:
    """Write report.json, print the summary table, return the exit code."""
    from rectiflow.report import render_summary

    if args.timing:
        report.wall_time = time.perf_counter() - started
    path = report.write(Path(args.out))
    if not args.quiet:
        render_summary(report, summary)
        print(f"📝 Report written to {path}", file=sys.stderr)
    return report.exit_code


def _probe_box(problem):
    from rectiflow.errors import ProblemFileError
    from rectiflow.integrator import Box
    from rectiflow.rectify import default_probe_center

    if problem.probe_box is not None:
        return problem.probe_box
    box = Box.around(default_probe_center(problem.field.box), 0.5)
    if not box.is_subset_of(problem.field.box):
        raise ProblemFileError("probe.box is required for this domain")
    return box


def _probe_points(problem):
    from rectiflow.rectify import probe_grid

    return probe_grid(problem.window, _probe_box(problem), problem.probe_counts)


def _rectification(problem):
    from rectiflow.rectify import build_rectification

    return build_rectification(
        problem.field, problem.t0, problem.window, problem.tolerances, _probe_box(problem)
    )


def cmd_solve(args) -> int:
    """Integrate one Cauchy problem and write trajectory.csv."""
    import numpy as np

    from rectiflow.errors import ProblemFileError
    from rectiflow.integrator import integrate
    from rectiflow.report import TRAJECTORY_FILE, RunReport, space_header, write_csv

    started = time.perf_counter()
    problem = _load(args)
    spec = problem.solve
    t0 = args.t0 if args.t0 is not None else (spec.t0 if spec else None)
    x0 = args.x0 if args.x0 is not None else (spec.x0 if spec else None)
    t_target = args.t_target if args.t_target is not None else (spec.t_target if spec else None)
    if t0 is None or x0 is None or t_target is None:
        raise ProblemFileError("solve needs t0, x0 and t_target (problem 'solve' section or flags)")

    curve = integrate(problem.field, t0, x0, t_target, problem.tolerances)
    lo, hi = curve.time_range
    times = np.linspace(lo, hi, problem.solve_samples) if hi > lo else np.array([lo])
    if curve.direction == "backward":
        times = times[::-1]
    out = Path(args.out)
    write_csv(
        out / TRAJECTORY_FILE,
        ["t"] + space_header("x", problem.dimension),
        ([t] + curve.sample(t).tolist() for t in times),
    )

    termination = curve.termination
    exit_code = EXIT_OK if termination.reached else EXIT_HYPOTHESIS
    report = RunReport(
        _command_echo(args),
        problem.name,
        {
            "t0": float(t0),
            "x0": list(x0),
            "t_target": float(t_target),
            "termination": termination.to_dict(),
            "steps": len(curve.times) - 1,
            "final_time": curve.t_end,
            "final_state": curve.final_state,
        },
        exit_code,
    )
    summary = [
        ("termination", termination.kind.value),
        ("t*", termination.t_star if termination.t_star is not None else "-"),
        ("steps", len(curve.times) - 1),
        ("final state", ", ".join(f"{v:.10g}" for v in curve.final_state)),
    ]
    return _finish(args, report, summary, started)


def cmd_rectify(args) -> int:
    """Build Phi, verify it on the probe grid, write grids and residuals."""
    from rectiflow.errors import EvalError, ProbeFailed, TrajectoryError
    from rectiflow.report import (
        GRID_FORWARD_FILE,
        GRID_INVERSE_FILE,
        RESIDUALS_FILE,
        RunReport,
        space_header,
        write_csv,
    )
    from rectiflow.rectify import Rectification, verify_rectification

    started = time.perf_counter()
    problem = _load(args)
    n = problem.dimension
    out = Path(args.out)
    probe_failed = None
    try:
        rect = _rectification(problem)
    except ProbeFailed as exc:
        # keep going without the smoke probe so the failing points get listed
        print(f"❌ {exc}", file=sys.stderr)
        probe_failed = str(exc)
        rect = Rectification(problem.field, problem.t0, problem.window, problem.tolerances,
                             _probe_box(problem))

    points = _probe_points(problem)
    verification = verify_rectification(rect, points)
    nan = [float("nan")] * n

    forward_rows = []
    for t, x0 in points:
        try:
            _, x = rect.apply(t, x0)
            forward_rows.append([t] + x0.tolist() + x.tolist() + ["ok"])
        except (TrajectoryError, EvalError) as exc:
            forward_rows.append([t] + x0.tolist() + nan + [type(exc).__name__])
    write_csv(out / GRID_FORWARD_FILE,
              ["t"] + space_header("x0_", n) + space_header("x", n) + ["status"], forward_rows)

    by_point = {(r.t, r.x): r for r in verification.residuals}
    failed = {(f.t, f.x): f for f in verification.failures}
    inverse_rows, residual_rows = [], []
    for t, x in points:
        key = (t, tuple(x.tolist()))
        if key in by_point:
            r = by_point[key]
            inverse_rows.append([t] + list(r.x) + list(r.x0) + ["ok"])
            residual_rows.append([t] + list(r.x) + [r.pushforward, r.roundtrip,
                                                    r.finite_difference])
        else:
            inverse_rows.append([t] + list(key[1]) + nan + [failed[key].kind])
    write_csv(out / GRID_INVERSE_FILE,
              ["t"] + space_header("x", n) + space_header("x0_", n) + ["status"], inverse_rows)
    write_csv(out / RESIDUALS_FILE,
              ["t"] + space_header("x", n) + ["pushforward", "roundtrip", "finite_difference"],
              residual_rows)

    passed = probe_failed is None and verification.passed(
        problem.pushforward_threshold, problem.roundtrip_threshold
    )
    results = verification.to_dict()
    if probe_failed is not None:
        results["probe_failed"] = probe_failed
    results.update(
        {
            "t0": rect.t0,
            "window": list(rect.window),
            "field": problem.field.describe(),
            "verdict": "pass" if passed else "fail",
            "thresholds": {
                "pushforward": problem.pushforward_threshold,
                "roundtrip": problem.roundtrip_threshold,
            },
        }
    )
    report = RunReport(_command_echo(args), problem.name, results,
                       EXIT_OK if passed else EXIT_HYPOTHESIS)
    summary = [
        ("probes", verification.probed),
        ("max pushforward residual", verification.max_pushforward_residual),
        ("max round-trip residual", verification.max_roundtrip_residual),
        ("max finite-difference residual", verification.max_finite_difference_residual),
        ("failures", len(verification.failures)),
    ]
    return _finish(args, report, summary, started)


def _grid_residual(c, a, b, points) -> float:
    import numpy as np

    from rectiflow.symmetry import wreath_act

    worst = 0.0
    for t, x in points:
        ct, cx = wreath_act(c, t, x)
        at, ax = wreath_act(a, *wreath_act(b, t, x))
        worst = max(worst, abs(ct - at) + float(np.linalg.norm(cx - ax)))
    return worst


def _symmetry_compose(args, problem, started) -> int:
    from rectiflow.rectify import probe_grid
    from rectiflow.report import RunReport
    from rectiflow.symmetry import validate_element, wreath_compose

    a, b = problem.element(args.a), problem.element(args.b)
    c = wreath_compose(a, b)
    box = _probe_box(problem)
    points = probe_grid(problem.window, box, (10, 10))
    residual = _grid_residual(c, a, b, points)
    problems = validate_element(c, problem.window, box.grid(10))
    results = {"a": args.a, "b": args.b, "composed": c.to_dict(), "pointwise_residual": residual,
               "element_problems": problems}
    exit_code = EXIT_OK if residual <= 1e-9 else EXIT_HYPOTHESIS
    report = RunReport(_command_echo(args), problem.name, results, exit_code)
    summary = [("composed f", str(c.f)), ("composed g", ", ".join(str(e) for e in c.g)),
               ("pointwise residual", residual), ("element problems", len(problems))]
    return _finish(args, report, summary, started)


def _symmetry_conjugate(args, problem, started) -> int:
    from rectiflow.errors import EvalError, TrajectoryError
    from rectiflow.report import GRID_FORWARD_FILE, RunReport, space_header, write_csv
    from rectiflow.symmetry import conjugate_symmetry, is_trivial_symmetry_form

    n = problem.dimension
    alpha = problem.space_time_map(args.map)
    rect = _rectification(problem)
    points = _probe_points(problem)
    trivial = is_trivial_symmetry_form(alpha, points)
    conj = conjugate_symmetry(rect, alpha, points)
    rows, failures = [], 0
    for t, x in points:
        try:
            s, y = conj(t, x)
            rows.append([t] + x.tolist() + [s] + y.tolist() + ["ok"])
        except (TrajectoryError, EvalError) as exc:
            failures += 1
            rows.append([t] + x.tolist() + [float("nan")] * (n + 1) + [type(exc).__name__])
    write_csv(Path(args.out) / GRID_FORWARD_FILE,
              ["t"] + space_header("x", n) + ["t_image"] + space_header("x_image", n)
              + ["status"], rows)
    results = {"map": args.map, "alpha": alpha.describe(), "trivial_form": trivial.to_dict(),
               "points": len(points), "failures": failures}
    report = RunReport(_command_echo(args), problem.name, results, EXIT_OK)
    summary = [("alpha", alpha.describe()), ("trivial-form witness", trivial.witness),
               ("grid points", len(points)), ("failures", failures)]
    return _finish(args, report, summary, started)


def _symmetry_check(args, problem, started) -> int:
    from rectiflow.errors import ProblemFileError
    from rectiflow.report import RunReport
    from rectiflow.symmetry import conjugate_symmetry, is_symmetry

    if not problem.initial_conditions:
        raise ProblemFileError("symmetry.initial_conditions is empty")
    m = problem.space_time_map(args.map)
    if args.conjugate:
        m = conjugate_symmetry(_rectification(problem), m, _probe_points(problem))
    check = is_symmetry(m, problem.field, problem.initial_conditions, problem.window,
                        problem.tolerances, problem.symmetry_samples,
                        problem.symmetry_threshold)
    results = check.to_dict()
    results.update({"map": args.map, "conjugated": bool(args.conjugate),
                    "description": m.describe()})
    report = RunReport(_command_echo(args), problem.name, results,
                       EXIT_OK if check.passed else EXIT_HYPOTHESIS)
    summary = [("map", m.describe()), ("solutions", check.tested_solutions),
               ("max residual", check.max_residual),
               ("undefined transforms", check.undefined_transforms),
               ("verdict", check.verdict)]
    return _finish(args, report, summary, started)


def cmd_symmetry(args) -> int:
    """Wreath composition, conjugation through Phi, and symmetry checks."""
    started = time.perf_counter()
    problem = _load(args)
    handlers = {
        "compose": _symmetry_compose,
        "conjugate": _symmetry_conjugate,
        "check": _symmetry_check,
    }
    return handlers[args.symmetry_command](args, problem, started)


def cmd_diagnose(args) -> int:
    """Probe condition (L), invariance of I x M and uniqueness."""
    from rectiflow.diagnostics import (
        estimate_lipschitz,
        estimate_lipschitz_growth,
        probe_invariance,
        probe_uniqueness,
    )
    from rectiflow.report import RunReport

    started = time.perf_counter()
    problem = _load(args)
    diag = problem.diagnostics
    region = diag.region or _probe_box(problem)
    profile = estimate_lipschitz(problem.field, problem.window, region, diag.time_samples,
                                 diag.space_samples, diag.radii, diag.growth_factor,
                                 diag.growth_steps)
    ics = diag.invariance_ics or [
        (problem.t0, x) for x in _probe_box(problem).grid(problem.probe_counts[1])
    ]
    invariance = probe_invariance(problem.field, problem.window, ics, problem.tolerances)
    uniqueness = [
        probe_uniqueness(problem.field, u.point, diag.radii, u.candidates)
        for u in diag.uniqueness
    ]
    growth = None
    if diag.growth_center is not None and diag.growth_half_widths:
        growth = estimate_lipschitz_growth(problem.field, problem.window, diag.growth_center,
                                           diag.growth_half_widths,
                                           growth_factor=diag.growth_factor,
                                           growth_steps=diag.growth_steps)

    flags = []
    if profile.flagged:
        flags.append("lipschitz")
    if invariance.escapes:
        flags.append("invariance")
    if any(u.flagged for u in uniqueness):
        flags.append("uniqueness")
    if growth is not None and growth.unbounded:
        flags.append("growth")

    results = {
        "lipschitz": profile.to_dict(),
        "invariance": invariance.to_dict(),
        "uniqueness": [u.to_dict() for u in uniqueness],
        "flags": flags,
        "verdict": "no violation detected on probes" if not flags else "violations detected",
    }
    if growth is not None:
        results["growth"] = growth.to_dict()
    report = RunReport(_command_echo(args), problem.name, results,
                       EXIT_HYPOTHESIS if flags else EXIT_OK)
    summary = [
        ("sup Lipschitz estimate", profile.sup_estimate),
        ("quotient growth flagged", profile.flagged),
        ("invariance", invariance.verdict),
        ("escapes", len(invariance.escapes)),
        ("uniqueness flags", sum(1 for u in uniqueness if u.flagged)),
        ("flags", ", ".join(flags) or "none"),
    ]
    if growth is not None:
        summary.insert(2, ("growth over boxes", growth.verdict))
    return _finish(args, report, summary, started)


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 3), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", "-p", required=True, help="Problem file (YAML)")
    common.add_argument("--out", "-o", default="out", help="Output directory (default: out)")
    common.add_argument("--rtol", type=float, help="Relative tolerance override")
    common.add_argument("--atol", type=float, help="Absolute tolerance override")
    common.add_argument("--samples", type=int, help="Sample count override (trajectories, symmetry checks)")
    common.add_argument("--log-level", choices=LOG_LEVELS, help="Set logging level (default: ERROR)")
    common.add_argument("--timing", action="store_true", help="Record wall time in report.json")
    common.add_argument("--quiet", "-q", action="store_true", help="No summary table on stderr")

    parser = _Parser(description="Global rectification of ODEs and their symmetries")
    parser.add_argument("--version", action="version", version=f"rectiflow {__version__}")
    subparsers = parser.add_subparsers(dest="command")

    # === solve subcommand ===
    solve_parser = subparsers.add_parser("solve", parents=[common], help="Integrate one Cauchy problem")
    solve_parser.add_argument("--t0", type=float, help="Initial time (default: problem solve.t0)")
    solve_parser.add_argument("--x0", type=float, nargs="+", help="Initial state")
    solve_parser.add_argument("--t-target", type=float, help="Target time")
    solve_parser.set_defaults(func=cmd_solve)

    # === rectify subcommand ===
    rectify_parser = subparsers.add_parser("rectify", parents=[common], help="Build and verify Phi")
    rectify_parser.set_defaults(func=cmd_rectify)

    # === symmetry subcommand ===
    symmetry_parser = subparsers.add_parser("symmetry", help="Wreath elements and symmetries")
    symmetry_sub = symmetry_parser.add_subparsers(dest="symmetry_command", required=True)
    compose_parser = symmetry_sub.add_parser("compose", parents=[common], help="Compose two wreath elements")
    compose_parser.add_argument("a", help="Wreath element applied second")
    compose_parser.add_argument("b", help="Wreath element applied first")
    conjugate_parser = symmetry_sub.add_parser(
        "conjugate", parents=[common], help="Sample Phi ∘ alpha ∘ Phi^-1 on the probe grid"
    )
    conjugate_parser.add_argument("map", help="Named map or wreath element (alpha)")
    check_parser = symmetry_sub.add_parser("check", parents=[common], help="Check the symmetry property")
    check_parser.add_argument("map", help="Named map or wreath element")
    check_parser.add_argument("--conjugate", action="store_true", help="Check Phi ∘ map ∘ Phi^-1 instead")
    symmetry_parser.set_defaults(func=cmd_symmetry)

    # === diagnose subcommand ===
    diagnose_parser = subparsers.add_parser("diagnose", parents=[common], help="Probe the hypotheses")
    diagnose_parser.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    """Main CLI entry point."""
    from rectiflow.errors import RectiflowError
    from rectiflow.logging_config import setup_logging

    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_INPUT

    setup_logging(args.log_level)
    try:
        return args.func(args)
    except RectiflowError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
