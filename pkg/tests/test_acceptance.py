"""Acceptance criteria, one test each, every one reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also collected in the terminal summary.
"""
import math
import time

import numpy as np

from hyperkin.bench import loglog_slope, run_bench
from hyperkin.ik import (
    SolverSettings,
    classic_jacobian,
    damped_pseudo_inverse,
    reduced_jacobian,
    solve_to_pose,
)
from hyperkin.kinematics import ArmLayout, classic_forward
from hyperkin.meta import halving_step, initial_state, restructure, solve_with_escalation, state_count
from hyperkin.meta import state_from_layout
from hyperkin.sectors import (
    body_transform_closed,
    body_transform_iterative,
    chord_length,
    count_dofs,
    decompose,
    expand_configuration,
    reduced_forward,
)
from oracles import (
    fd_position_orientation,
    max_relative_column_error,
    planar_chain_sum,
    random_frozen,
    random_modes,
)

DAMAGED16 = (1, -1, -1, 1, 0, 0, 0, 0, -1, 1, 1, 0, 0, 0, -1, 1)


def test_oracle_equivalence(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for n in (4, 16, 64, 256):
        for _ in range(100):
            modes = random_modes(rng, n, damage_rate=float(rng.uniform(0, 0.3)), body_rate=float(rng.uniform(0, 0.9)))
            layout = ArmLayout(n, float(rng.uniform(0.1, 2.0)), modes, random_frozen(rng, modes))
            decomp = decompose(layout)
            Q = rng.uniform(-math.pi, math.pi, decomp.size)
            q = expand_configuration(decomp, layout, Q)
            worst = max(worst, reduced_forward(decomp, layout, Q).max_abs_diff(classic_forward(layout, q)))
    elapsed = time.perf_counter() - start
    criterion("1 oracle equivalence", worst <= 1e-9 and elapsed <= 60,
              f"max abs error {worst:.2e} (<= 1e-9), {elapsed:.1f} s (<= 60 s)")


def test_closed_form_body(criterion):
    rng = np.random.default_rng(7)
    worst_body = worst_chord = 0.0
    for u in range(1, 51):
        bound = math.pi if u == 1 else 2 * math.pi / (u - 1)
        thetas = rng.uniform(-1, 1, 50) * bound
        thetas[0] = 0.0
        for theta in thetas:
            closed = body_transform_closed(theta, u, 1.0)
            worst_body = max(worst_body, closed.max_abs_diff(body_transform_iterative(theta, u, 1.0)))
            y, z = planar_chain_sum(theta, u, 1.0)
            worst_chord = max(worst_chord, abs(abs(chord_length(theta, u, 1.0)) - math.hypot(y, z)))
    criterion("2 closed-form body", worst_body <= 1e-9 and worst_chord <= 1e-12,
              f"transform error {worst_body:.2e} (<= 1e-9), chord error {worst_chord:.2e} (<= 1e-12)")


def test_jacobian_correctness(criterion):
    rng = np.random.default_rng(3)
    worst_classic = worst_reduced = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 65))
        d = float(rng.uniform(0.2, 1.5))
        modes = random_modes(rng, n)
        layout = ArmLayout(n, d, modes, random_frozen(rng, modes))
        decomp = decompose(layout)
        Q = rng.uniform(-1.0, 1.0, decomp.size)
        J = reduced_jacobian(decomp, layout, Q).matrix
        fd = fd_position_orientation(lambda x: reduced_forward(decomp, layout, x).matrix, Q, h=1e-6)
        worst_reduced = max(worst_reduced, max_relative_column_error(J, fd))

        heads = ArmLayout.all_heads(n, d)
        q = rng.uniform(-math.pi, math.pi, 2 * n)
        J = classic_jacobian(heads, q).matrix
        fd = fd_position_orientation(lambda x: classic_forward(heads, x).matrix, q, h=1e-6)
        worst_classic = max(worst_classic, max_relative_column_error(J, fd))
    criterion("3 jacobian vs finite differences", max(worst_classic, worst_reduced) <= 1e-5,
              f"classic {worst_classic:.2e}, reduced {worst_reduced:.2e} (<= 1e-5)")


def test_ik_convergence(criterion):
    n, d = 8, 1.0
    layout = ArmLayout.all_heads(n, d)
    decomp = decompose(layout)
    settings = SolverSettings.for_arm(n, d, max_iterations=2000)
    rng = np.random.default_rng(11)
    converged, times = 0, []
    for _ in range(100):
        target = classic_forward(layout, rng.uniform(-math.pi, math.pi, 2 * n))
        report = solve_to_pose(decomp, layout, np.zeros(2 * n), target, settings)
        converged += report.converged and report.iterations <= 2000
        times.append(report.wall_time)
    median = float(np.median(times))
    criterion("4 IK convergence", converged >= 95 and median <= 1.0,
              f"{converged}/100 converged (>= 95), median {median * 1e3:.1f} ms per solve (<= 1 s)")


def test_damaged_layout_counts(criterion):
    layout = ArmLayout(16, 1.0, DAMAGED16, {i: (0.0, 0.0) for i in (2, 3, 9, 15)})
    decomp = decompose(layout)
    control, mobile = count_dofs(decomp)
    ok = len(decomp.damaged) == 4 and len(decomp.sectors) == 5 and mobile == 17 and control == 12
    criterion("5 four-damaged-link layout", ok,
              f"{len(decomp.damaged)} damaged, {len(decomp.sectors)} sectors, "
              f"mobile_joints {mobile}, control_vars {control}")


def test_meta_controller(criterion):
    states = [initial_state(16)]
    while not states[-1].fully_articulated:
        states.append(halving_step(states[-1]))
    ks = [s.k for s in states]
    monotone = all(a.heads <= b.heads for a, b in zip(states, states[1:]))
    ok_states = (len(states) == 5 == state_count(16) and ks == [16, 8, 4, 2, 1] and monotone
                 and states[0].heads == {1} and states[1].heads == {1, 9}
                 and states[-1].heads == set(range(1, 17)))

    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(100):
        a = trial % 4
        layout = states[a].layout
        decomp = decompose(layout)
        Q = rng.uniform(-1.0, 1.0, decomp.size)
        q = expand_configuration(decomp, layout, Q)
        before = reduced_forward(decomp, layout, Q)
        new = restructure(layout, q, states[a + 1].modes)
        worst = max(worst, reduced_forward(new.decomposition, new.layout, new.Q).max_abs_diff(before))
    criterion("6 meta-controller", ok_states and worst <= 1e-12,
              f"k sequence {ks}, monotone heads {monotone}, state 1 heads {sorted(states[1].heads)}, "
              f"restructure pose change {worst:.2e} (<= 1e-12)")


def test_damage_tolerance(criterion):
    rng = np.random.default_rng(50)
    settings = SolverSettings.for_arm(16, 1.0, position_only=True)
    converged, frozen_ok = 0, True
    for _ in range(50):
        frozen = {i: (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5))) for i in (2, 3, 9, 15)}
        layout = ArmLayout(16, 1.0, DAMAGED16, frozen)
        decomp = decompose(layout)
        target = reduced_forward(decomp, layout, rng.uniform(-0.8, 0.8, decomp.size))
        q0 = expand_configuration(decomp, layout, np.zeros(decomp.size))
        result = solve_with_escalation(state_from_layout(layout), q0, target, settings)
        converged += result.report.converged
        for link, (phi, theta) in frozen.items():
            frozen_ok &= result.q[2 * link - 2] == phi and result.q[2 * link - 1] == theta
            frozen_ok &= result.state.layout.frozen[link] == (phi, theta)
    criterion("7 damage tolerance", frozen_ok and converged >= 45,
              f"frozen angles bit-identical {frozen_ok}, {converged}/50 position-only solves converged (>= 45)")


def test_scaling(criterion):
    start = time.perf_counter()
    run_bench(250, repeats=3, naive=True)  # warm caches and allocator; discarded

    big = run_bench(2000, repeats=5, seed=1)
    classic = next(r for r in big if r.method == "classic")
    state0 = next(r for r in big if r.method == "dynamic" and r.state == 0)
    ratio = state0.t_step_s / classic.t_step_s

    sizes = (250, 500, 1000, 2000)
    naive = []
    for n in sizes:
        (rec,) = [r for r in run_bench(n, states=0, repeats=5, naive=True, classic=False)
                  if r.method == "classic_naive"]
        naive.append(rec)
    slope = loglog_slope([r.control_vars for r in naive], [r.t_step_s for r in naive])
    elapsed = time.perf_counter() - start
    criterion("8 scaling", ratio <= 0.05 and 1.7 <= slope <= 2.5 and elapsed <= 600,
              f"state-0 / classic step time at N=2000 = {ratio:.4f} (<= 0.05), naive log-log slope "
              f"{slope:.3f} (in [1.7, 2.5]), bench {elapsed:.0f} s (<= 600 s)")


def test_dls_properties(criterion):
    rng = np.random.default_rng(9)
    worst_residual, ratios = 0.0, []
    for _ in range(20):
        J = rng.normal(size=(6, int(rng.integers(12, 60))))
        for k in (0.1, 1e-2, 1e-3):
            X = damped_pseudo_inverse(J, k)
            worst_residual = max(worst_residual, np.max(np.abs((J @ J.T + k * k * np.eye(6)) @ X.T - J)))
        e1 = np.max(np.abs(J @ damped_pseudo_inverse(J, 1e-2) - np.eye(6)))
        e2 = np.max(np.abs(J @ damped_pseudo_inverse(J, 1e-3) - np.eye(6)))
        ratios.append(e1 / e2)
    ok = worst_residual <= 1e-10 and all(50 <= r <= 200 for r in ratios)
    criterion("9 DLS properties", ok,
              f"normal-equation residual {worst_residual:.2e} (<= 1e-10), "
              f"k ratio range [{min(ratios):.1f}, {max(ratios):.1f}] (within [50, 200])")
