"""Per-step timing of the classic and the sector-reduced IK step.

A step is FK + Jacobian + DLS solve + Euler update, timed phase by phase with
``time.perf_counter`` (monotonic). Each measurement is the median over
``repeats`` runs after one discarded warmup run.
"""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, SelfCheckFailure
from .ik import SolverSettings, classic_jacobian, classic_jacobian_naive, dls_velocity, reduced_jacobian
from .kinematics import ArmLayout, classic_forward, classic_frames
from .meta import ControllerState, halving_step, initial_state
from .sectors import count_dofs, decompose, expand_configuration, reduced_forward, sector_frames
from .transforms import HomTransform, pose_error

CSV_COLUMNS = ("method", "state", "num_links", "active_dofs", "control_vars",
               "t_fk_s", "t_jac_s", "t_dls_s", "t_step_s", "repeats", "skipped")

GATE_TOLERANCE = 1e-9


@dataclass
class BenchRecord:
    method: str  # "classic", "classic_naive" or "dynamic"
    state: Optional[int]  # None for classic baselines
    num_links: int
    active_dofs: int  # joint variables that move (count_dofs mobile joints)
    control_vars: int  # columns of the Jacobian
    t_fk_s: float = math.nan
    t_jac_s: float = math.nan
    t_dls_s: float = math.nan
    t_step_s: float = math.nan
    repeats: int = 0
    skipped: bool = False


def bench_configuration(decomp, layout: ArmLayout, rng: np.random.Generator) -> np.ndarray:
    """Random reduced configuration with every body inside the closed-form domain."""
    Q = rng.uniform(-0.5, 0.5, decomp.size)
    for s in decomp.sectors:
        if s.has_body:
            Q[s.offset + 2] = rng.uniform(-1.0, 1.0) * min(0.5, 3.0 / s.body_count)
    return Q


def _target_near(pose: HomTransform) -> HomTransform:
    m = pose.matrix.copy()
    m[:3, 3] += (0.1, -0.05, 0.05)
    return HomTransform(m)


def _time_phases(phases: Sequence[Callable], repeats: int) -> tuple[list[float], float]:
    """Run the chained phases ``repeats + 1`` times; medians of all but the first run."""
    samples = [[] for _ in phases]
    totals = []
    for r in range(repeats + 1):
        value = None
        run = []
        for fn in phases:
            t0 = time.perf_counter()
            value = fn(value)
            run.append(time.perf_counter() - t0)
        if r:
            for i, t in enumerate(run):
                samples[i].append(t)
            totals.append(sum(run))
    return [statistics.median(s) for s in samples], statistics.median(totals)


def _dynamic_phases(decomp, layout, Q, target, settings):
    def fk(_):
        return sector_frames(decomp, layout, Q)

    def jac(frames):
        return frames, reduced_jacobian(decomp, layout, Q, frames=frames)

    def dls(args):
        frames, J = args
        rate = dls_velocity(J.matrix, pose_error(frames.end, target).vector, settings.damping)
        return Q + rate * settings.dt

    return fk, jac, dls


def _classic_phases(layout, q, target, settings, naive: bool):
    def fk(_):
        return classic_frames(layout, q)

    def jac(frames):
        J = classic_jacobian_naive(layout, q) if naive else classic_jacobian(layout, q, frames=frames)
        return frames, J

    def dls(args):
        frames, J = args
        rate = dls_velocity(J.matrix, pose_error(frames.end, target).vector, settings.damping)
        return q + rate * settings.dt

    return fk, jac, dls


def _record(method, state, n, active, control, phases, repeats) -> BenchRecord:
    (t_fk, t_jac, t_dls), t_step = _time_phases(phases, repeats)
    return BenchRecord(method, state, n, active, control, t_fk, t_jac, t_dls, t_step, repeats)


def controller_states(num_links: int, link_length: float = 1.0) -> list[ControllerState]:
    states = [initial_state(num_links, link_length)]
    while not states[-1].fully_articulated:
        states.append(halving_step(states[-1]))
    return states


def run_bench(
    num_links: int,
    states: str | int = "all",
    repeats: int = 5,
    seed: int = 0,
    naive: bool = False,
    classic: bool = True,
    link_length: float = 1.0,
    settings: SolverSettings | None = None,
) -> list[BenchRecord]:
    """Classic baseline(s) followed by one dynamic record per controller state.

    Every dynamic state first passes the FK gate (reduced vs classic on the
    expanded configuration, max-abs <= 1e-9); a failing state raises
    ``SelfCheckFailure`` before any of its timings are recorded.
    """
    if num_links < 2:
        raise InvalidArgument("benchmark needs at least 2 links")
    if repeats < 3:
        raise InvalidArgument("benchmark needs at least 3 repeats")
    settings = settings or SolverSettings.for_arm(num_links, link_length)
    rng = np.random.default_rng(seed)
    records: list[BenchRecord] = []
    n = num_links

    try:
        all_states = controller_states(n, link_length)
    except MemoryError:
        return [BenchRecord("dynamic", None, n, 0, 0, skipped=True)]
    if states == "all":
        chosen = list(range(len(all_states)))
    else:
        a = int(states)
        if not 0 <= a < len(all_states):
            raise InvalidArgument(f"state must be in 0..{len(all_states) - 1}")
        chosen = [a]

    full = all_states[-1].layout
    full_decomp = decompose(full)
    q_classic = expand_configuration(full_decomp, full, bench_configuration(full_decomp, full, rng))
    target = _target_near(classic_forward(full, q_classic))
    baselines = []
    if classic:
        baselines.append(("classic", False))
    if naive:
        baselines.append(("classic_naive", True))
    for method, is_naive in baselines:
        try:
            phases = _classic_phases(full, q_classic, target, settings, is_naive)
            records.append(_record(method, None, n, 2 * n, 2 * n, phases, repeats))
        except MemoryError:
            records.append(BenchRecord(method, None, n, 2 * n, 2 * n, skipped=True))

    for a in chosen:
        layout = all_states[a].layout
        decomp = decompose(layout)
        control, mobile = count_dofs(decomp)
        try:
            Q = bench_configuration(decomp, layout, rng)
            gap = reduced_forward(decomp, layout, Q).max_abs_diff(
                classic_forward(layout, expand_configuration(decomp, layout, Q)))
            if not gap <= GATE_TOLERANCE:
                raise SelfCheckFailure(f"state {a}: reduced and classic FK differ by {gap:.3e}")
            phases = _dynamic_phases(decomp, layout, Q, target, settings)
            records.append(_record("dynamic", a, n, mobile, control, phases, repeats))
        except MemoryError:
            records.append(BenchRecord("dynamic", a, n, mobile, control, skipped=True))
    return records


def loglog_slope(x: Iterable[float], y: Iterable[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(list(x), float)), np.log(np.asarray(list(y), float))
    if lx.size < 2:
        return math.nan
    return float(np.polyfit(lx, ly, 1)[0])


def dynamic_slope(records: Sequence[BenchRecord]) -> float:
    """Slope of step time against Jacobian width across the dynamic states."""
    rows = [r for r in records if r.method == "dynamic" and not r.skipped]
    return loglog_slope([r.control_vars for r in rows], [r.t_step_s for r in rows])


def write_csv(records: Sequence[BenchRecord], path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in records:
            row = asdict(r)
            row["state"] = "" if r.state is None else r.state
            row["skipped"] = int(r.skipped)
            for key in ("t_fk_s", "t_jac_s", "t_dls_s", "t_step_s"):
                row[key] = "" if math.isnan(row[key]) else f"{row[key]:.9g}"
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[BenchRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(BenchRecord(
                method=row["method"],
                state=int(row["state"]) if row["state"] else None,
                num_links=int(row["num_links"]),
                active_dofs=int(row["active_dofs"]),
                control_vars=int(row["control_vars"]),
                **{k: float(row[k]) if row[k] else math.nan for k in ("t_fk_s", "t_jac_s", "t_dls_s", "t_step_s")},
                repeats=int(row["repeats"]),
                skipped=bool(int(row["skipped"])),
            ))
    return out

