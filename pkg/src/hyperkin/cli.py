"""Command-line entry point: ``hyperkin {fk,ik,damage,bench}``.

Exit codes: 0 success/converged, 2 not converged, 3 input error,
4 self-check failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .bench import dynamic_slope, loglog_slope, run_bench, write_csv
from .config import ArmConfig, load_config
from .errors import HyperkinError, InvalidArgument, NoFunctionalDofs, SelfCheckFailure
from .kinematics import classic_forward
from .meta import ControllerState, mark_damaged, solve_with_escalation
from .sectors import count_dofs, decompose, expand_configuration, reduced_forward
from .transforms import HomTransform

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT, EXIT_SELF_CHECK = 0, 2, 3, 4
FK_DIVERGENCE_LIMIT = 1e-6

log = logging.getLogger("hyperkin")


def read_numbers(text_or_path: str) -> np.ndarray:
    """Numbers from a file path, or from the string itself (comma/space separated)."""
    path = Path(text_or_path)
    text = path.read_text() if path.is_file() else text_or_path
    tokens = text.replace(",", " ").split()
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise InvalidArgument(f"could not read numbers from {text_or_path!r}: {exc}") from None


def parse_target(text_or_path: str) -> HomTransform:
    """12 numbers (rotation row-major, translation) or 7 (translation, quaternion x y z w)."""
    v = read_numbers(text_or_path)
    if v.size == 12:
        rotation, translation = v[:9].reshape(3, 3), v[9:]
        target = HomTransform.from_parts(rotation, translation)
        if not target.is_valid(1e-6):
            raise InvalidArgument("target rotation is not orthonormal with det +1")
        return target
    if v.size == 7:
        quat = v[3:]
        if abs(np.linalg.norm(quat) - 1.0) > 1e-6:
            raise InvalidArgument("target quaternion is not unit length")
        return HomTransform.from_parts(Rotation.from_quat(quat).as_matrix(), v[:3])
    raise InvalidArgument(f"target needs 12 or 7 numbers, got {v.size}")


def _initial_q(config: ArmConfig, state: ControllerState, q_arg: str | None) -> np.ndarray:
    """Physical starting configuration; a reduced vector is expanded first."""
    layout = state.layout
    decomp = decompose(layout)
    if q_arg is None:
        return expand_configuration(decomp, layout, np.zeros(decomp.size))
    v = read_numbers(q_arg)
    if v.size == 2 * config.num_links:
        # projection rejects angles the body constraints cannot represent
        return expand_configuration(decomp, layout, decompose(layout, v).initial)
    if v.size == decomp.size:
        return expand_configuration(decomp, layout, v)
    raise InvalidArgument(
        f"configuration needs {2 * config.num_links} (full) or {decomp.size} (reduced) values, got {v.size}")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _print_matrix(name: str, t: HomTransform, out) -> None:
    for r, row in enumerate(t.matrix):
        print(f"{name}[{r}]=" + " ".join(_fmt(x) for x in row), file=out)


def cmd_fk(args, out) -> int:
    config = load_config(args.config)
    state = config.controller_state()
    layout = state.layout
    q = _initial_q(config, state, args.q)
    decomp = decompose(layout, q)
    classic = classic_forward(layout, q)
    reduced = reduced_forward(decomp, layout, decomp.initial)
    gap = classic.max_abs_diff(reduced)
    _print_matrix("classic", classic, out)
    _print_matrix("reduced", reduced, out)
    print(f"max_abs_diff={_fmt(gap)}", file=out)
    if not gap <= FK_DIVERGENCE_LIMIT:
        raise SelfCheckFailure(f"classic and reduced FK differ by {gap:.3e}")
    return EXIT_OK


def _write_trajectory(path: str, attempts) -> None:
    width = max(len(Q) for _, report in attempts for Q in (report.trajectory or []))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "state"] + [f"Q{j}" for j in range(width)])
        iteration = 0
        for a, report in attempts:
            for Q in report.trajectory or []:
                writer.writerow([iteration, a] + [_fmt(x) for x in Q] + [""] * (width - len(Q)))
                iteration += 1


def _solve_and_report(config: ArmConfig, state: ControllerState, q0, args, out):
    settings = config.settings
    if args.position_only:
        settings = replace(settings, position_only=True)
    target = parse_target(args.target)
    result = solve_with_escalation(state, q0, target, settings, record_trajectory=bool(args.trajectory_out))
    report = result.report
    control, mobile = count_dofs(result.decomposition)
    lines = {
        "status": report.status.value,
        "iterations": sum(r.iterations for _, r in result.attempts),
        "final_iterations": report.iterations,
        "position_error": _fmt(report.final_error[0]),
        "orientation_error": _fmt(report.final_error[1]),
        "state": result.state.a,
        "k": result.state.k,
        "restructures": result.restructures,
        "control_vars": control,
        "mobile_joints": mobile,
        "q": " ".join(_fmt(x) for x in result.q),
    }
    for key, value in lines.items():
        print(f"{key}={value}", file=out)
    if args.trajectory_out:
        _write_trajectory(args.trajectory_out, result.attempts)
    return result


def cmd_ik(args, out) -> int:
    config = load_config(args.config)
    state = config.controller_state()
    q0 = _initial_q(config, state, args.q)
    result = _solve_and_report(config, state, q0, args, out)
    return EXIT_OK if result.report.converged else EXIT_NOT_CONVERGED


def parse_links(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise InvalidArgument(f"--links expects comma-separated link indices, got {text!r}") from None


def cmd_damage(args, out) -> int:
    config = load_config(args.config)
    state = config.controller_state()
    q0 = _initial_q(config, state, args.q)
    links = parse_links(args.links)
    for link in links:
        if not 1 <= link <= config.num_links:
            raise InvalidArgument(f"link {link} outside 1..{config.num_links}")
        state = mark_damaged(state, link, (q0[2 * link - 2], q0[2 * link - 1]))
    if not state.layout.functional_links:
        raise NoFunctionalDofs("no-functional-dofs: every link is damaged")
    frozen = dict(state.layout.frozen)
    print("damaged=" + ",".join(str(i) for i in state.layout.damaged_links), file=out)
    result = _solve_and_report(config, state, q0, args, out)
    for link, (phi, theta) in frozen.items():
        if result.q[2 * link - 2] != phi or result.q[2 * link - 1] != theta:
            raise SelfCheckFailure(f"frozen angles of damaged link {link} changed during the solve")
    print("frozen_check=ok", file=out)
    return EXIT_OK if result.report.converged else EXIT_NOT_CONVERGED


def cmd_bench(args, out) -> int:
    sizes = parse_links(args.links)
    if not sizes or any(n < 2 for n in sizes):
        raise InvalidArgument("--links needs one or more sizes >= 2")
    if args.repeats < 3:
        raise InvalidArgument("--repeats must be at least 3")
    if args.states != "all" and not args.states.isdigit():
        raise InvalidArgument(f"--states expects 'all' or a state index, got {args.states!r}")
    states = args.states if args.states == "all" else int(args.states)
    records = []
    for n in sizes:
        recs = run_bench(n, states=states, repeats=args.repeats, seed=args.seed, naive=args.naive)
        records += recs
        slope = dynamic_slope(recs)
        print(f"num_links={n} dynamic_loglog_slope={slope:.4f}", file=out)
        for r in recs:
            log.info("%s state=%s dofs=%d t_step=%.3e", r.method, r.state, r.control_vars, r.t_step_s)
    if args.naive and len(sizes) > 1:
        naive = [r for r in records if r.method == "classic_naive" and not r.skipped]
        slope = loglog_slope([r.control_vars for r in naive], [r.t_step_s for r in naive])
        print(f"classic_naive_loglog_slope={slope:.4f}", file=out)
    if args.out:
        write_csv(records, args.out)
    else:
        write_csv(records, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="arm configuration file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="hyperkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fk = sub.add_parser("fk", parents=[common], help="end-effector pose, classic and reduced")
    fk.add_argument("--q", help="configuration (file or numbers): 2N full angles or the reduced vector")
    fk.set_defaults(func=cmd_fk, needs_config=True)

    for name, func, helptext in (("ik", cmd_ik, "solve to a target pose"),
                                 ("damage", cmd_damage, "lock links at their current angles, then solve")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("target", help="12 numbers (R row-major, t) or 7 (t, qx qy qz qw); file or inline")
        p.add_argument("--q", help="initial configuration (default: straight arm)")
        p.add_argument("--position-only", action="store_true")
        p.add_argument("--trajectory-out", help="CSV of iteration, state and Q per step")
        if name == "damage":
            p.add_argument("--links", required=True, help="comma-separated link indices to damage")
        p.set_defaults(func=func, needs_config=True)

    bench = sub.add_parser("bench", parents=[common], help="classic vs dynamic per-step timing")
    bench.add_argument("--links", default="16", help="number of links; comma-separated for several sizes")
    bench.add_argument("--states", default="all", help="'all' or one state index")
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--naive", action="store_true", help="also time the O(N^2) textbook Jacobian")
    bench.set_defaults(func=cmd_bench, needs_config=False)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.needs_config and not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return EXIT_INPUT
    out = open(args.out, "w") if args.out and args.command != "bench" else sys.stdout
    try:
        return args.func(args, out)
    except SelfCheckFailure as exc:
        print(f"self-check failure: {exc}", file=sys.stderr)
        return EXIT_SELF_CHECK
    except (HyperkinError, OSError) as exc:
        kind = type(exc).__name__
        label = {"MalformedLayout": "malformed-layout", "NoFunctionalDofs": "no-functional-dofs",
                 "ConfigError": "config-error", "InconsistentConfiguration": "inconsistent-configuration"}
        print(f"error ({label.get(kind, kind)}): {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
