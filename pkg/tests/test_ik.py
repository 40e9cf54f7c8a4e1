import math
from dataclasses import replace

import numpy as np
import pytest

from hyperkin.errors import InvalidArgument, InvalidState, SingularSystem
from hyperkin.ik import (
    SolverSettings,
    Status,
    classic_jacobian,
    classic_jacobian_naive,
    damped_pseudo_inverse,
    dls_velocity,
    expanded_solution,
    finite_difference_jacobian,
    ik_step,
    reduced_jacobian,
    solve_to_pose,
)
from hyperkin.kinematics import ArmLayout, classic_forward, classic_frames
from hyperkin.sectors import Sector, decompose, expand_configuration, reduced_forward, sector_frames
from hyperkin.transforms import HomTransform, Twist
from oracles import fd_position_orientation, max_relative_column_error, random_frozen, random_modes

DAMAGED16 = (1, -1, -1, 1, 0, 0, 0, 0, -1, 1, 1, 0, 0, 0, -1, 1)


def _random_layout(rng, n):
    modes = random_modes(rng, n)
    return ArmLayout(n, float(rng.uniform(0.3, 1.5)), modes, random_frozen(rng, modes))


# --- Jacobians ---------------------------------------------------------------

def test_classic_jacobian_matches_fd():
    rng = np.random.default_rng(8)
    layout = ArmLayout.all_heads(8)
    for _ in range(10):
        q = rng.uniform(-math.pi, math.pi, 16)
        J = classic_jacobian(layout, q).matrix
        fd = fd_position_orientation(lambda x: classic_forward(layout, x).matrix, q)
        assert max_relative_column_error(J, fd) <= 1e-5


def test_naive_jacobian_equals_cached():
    rng = np.random.default_rng(4)
    layout = ArmLayout(6, 1.0, (1, 0, -1, 1, 1, 0), {3: (0.2, 0.4)})
    q = rng.uniform(-2, 2, 12)
    np.testing.assert_allclose(classic_jacobian_naive(layout, q).matrix, classic_jacobian(layout, q).matrix,
                               atol=1e-12)


def test_straight_arm_twist_columns_have_no_linear_part():
    layout = ArmLayout.all_heads(6)
    J = classic_jacobian(layout, np.zeros(12)).matrix
    np.testing.assert_allclose(J[:3, 0::2], 0.0, atol=1e-15)
    theta_axes = J[3:, 1::2]
    assert np.allclose(theta_axes, theta_axes[:, :1])


def test_reduced_jacobian_matches_fd_on_random_layouts():
    rng = np.random.default_rng(21)
    for _ in range(30):
        layout = _random_layout(rng, int(rng.integers(1, 40)))
        decomp = decompose(layout)
        if decomp.size == 0:
            continue
        Q = rng.uniform(-1.5, 1.5, decomp.size)
        J = reduced_jacobian(decomp, layout, Q).matrix
        fd = fd_position_orientation(lambda x: reduced_forward(decomp, layout, x).matrix, Q)
        assert max_relative_column_error(J, fd) <= 1e-5
        # the package's own FD agrees with the independent one
        assert max_relative_column_error(finite_difference_jacobian(decomp, layout, Q).matrix, fd) <= 1e-6


def test_reduced_equals_classic_for_all_heads():
    layout = ArmLayout.all_heads(10)
    q = np.random.default_rng(3).uniform(-3, 3, 20)
    Jr = reduced_jacobian(decompose(layout), layout, q).matrix
    assert np.array_equal(Jr, classic_jacobian(layout, q).matrix)


def test_single_body_link_column_is_that_joints_column():
    layout = ArmLayout(3, 1.0, (1, 0, 1))
    decomp = decompose(layout)
    Q = np.array([0.3, -0.4, 0.7, 0.2, 0.5])
    q = expand_configuration(decomp, layout, Q)
    Jc = classic_jacobian(layout, q).matrix
    Jr = reduced_jacobian(decomp, layout, Q).matrix
    np.testing.assert_allclose(Jr[:, 2], Jc[:, 3], atol=1e-14)


def test_last_joint_reading_fails_fd():
    layout = ArmLayout(8, 1.0, (1, 0, 0, 0, 0, 0, 0, 0))
    decomp = decompose(layout)
    Q = np.array([0.4, 0.3, 0.2])
    fd = finite_difference_jacobian(decomp, layout, Q).matrix
    assert max_relative_column_error(reduced_jacobian(decomp, layout, Q).matrix, fd) <= 1e-5
    assert max_relative_column_error(reduced_jacobian(decomp, layout, Q, body_column="last").matrix, fd) > 0.1


def test_stale_frames_rejected():
    layout = ArmLayout.all_heads(4)
    q = np.zeros(8)
    frames = classic_frames(layout, q)
    with pytest.raises(InvalidState):
        classic_jacobian(layout, q + 0.1, frames=frames)
    decomp = decompose(layout)
    sframes = sector_frames(decomp, layout, q)
    with pytest.raises(InvalidState):
        reduced_jacobian(decomp, layout, q + 0.1, frames=sframes)


def test_fd_negative_control_gives_zero_column():
    layout = ArmLayout.all_heads(3)
    decomp = decompose(layout)
    # one extra slot that no sector reads
    corrupt = replace(decomp, size=decomp.size + 1)
    Q = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    fd = finite_difference_jacobian(corrupt, layout, Q).matrix
    assert np.array_equal(fd[:, -1], np.zeros(6))
    assert np.all(np.linalg.norm(fd[:, :-1], axis=0) > 0)


# --- damped least squares ----------------------------------------------------

def test_dls_identity_k_zero():
    np.testing.assert_allclose(damped_pseudo_inverse(np.eye(6), 0.0), np.eye(6), atol=1e-15)


def test_dls_normal_equation():
    rng = np.random.default_rng(7)
    for _ in range(20):
        J = rng.normal(size=(6, int(rng.integers(6, 30))))
        k = float(rng.uniform(1e-3, 1))
        X = damped_pseudo_inverse(J, k)
        assert np.max(np.abs((J @ J.T + k * k * np.eye(6)) @ X.T - J)) <= 1e-10


def test_dls_minimizes_damped_objective():
    rng = np.random.default_rng(12)
    J = rng.normal(size=(6, 12))
    u = rng.normal(size=6)
    k = 0.1
    qdot = damped_pseudo_inverse(J, k) @ u

    def g(v):
        return float(np.sum((u - J @ v) ** 2) + k * k * np.sum(v**2))

    best = g(qdot)
    for _ in range(1000):
        assert g(qdot + rng.normal(scale=rng.choice([1e-4, 1e-2, 1]), size=12)) >= best


def test_dls_velocity_matches_pseudo_inverse():
    rng = np.random.default_rng(2)
    J = rng.normal(size=(6, 9))
    u = rng.normal(size=6)
    np.testing.assert_allclose(dls_velocity(J, u, 0.2), damped_pseudo_inverse(J, 0.2) @ u, atol=1e-12)


def test_dls_singular_without_damping():
    J = np.zeros((6, 4))
    J[0, 0] = 1.0
    with pytest.raises(SingularSystem):
        damped_pseudo_inverse(J, 0.0)
    damped_pseudo_inverse(J, 0.1)


def test_dls_negative_damping_rejected():
    with pytest.raises(InvalidArgument):
        damped_pseudo_inverse(np.eye(6), -0.1)


def test_dls_limit_is_second_order():
    rng = np.random.default_rng(30)
    J = rng.normal(size=(6, 10))
    e1 = np.max(np.abs(J @ damped_pseudo_inverse(J, 1e-2) - np.eye(6)))
    e2 = np.max(np.abs(J @ damped_pseudo_inverse(J, 1e-3) - np.eye(6)))
    assert 50 <= e1 / e2 <= 200


# --- stepping and solving ----------------------------------------------------

def test_ik_step_zero_twist():
    Q = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    Q2 = ik_step(Q, np.eye(6), Twist.zero(), SolverSettings())
    assert np.array_equal(Q2, Q)


def test_ik_step_identity_jacobian():
    u = Twist(np.array([0.1, -0.2, 0.3]), np.array([0.05, 0.0, -0.1]))
    s = SolverSettings(damping=0.0, dt=1.0, step_clamp=1e9)
    np.testing.assert_allclose(ik_step(np.zeros(6), np.eye(6), u, s), u.vector, atol=1e-15)


def test_ik_step_clamps_rate():
    s = SolverSettings(damping=0.0, dt=2.0, step_clamp=0.5)
    step = ik_step(np.zeros(6), np.eye(6), np.array([3.0, 4.0, 0, 0, 0, 0]), s)
    assert abs(np.linalg.norm(step) - 1.0) < 1e-15


def test_ik_step_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        ik_step(np.zeros(5), np.eye(6), Twist.zero(), SolverSettings())


def test_ik_step_moves_end_effector_along_requested_direction():
    layout = ArmLayout(6, 1.0, (1, 0, 0, 0, 0, 0))
    decomp = decompose(layout)
    Q = np.array([0.3, 0.2, 0.25])
    before = reduced_forward(decomp, layout, Q).translation
    J = reduced_jacobian(decomp, layout, Q).position_rows()
    direction = J.matrix @ np.array([0.3, -0.5, 0.8])
    direction /= np.linalg.norm(direction)
    Q2 = ik_step(Q, J, direction * 1e-6, SolverSettings(damping=1e-4))
    moved = reduced_forward(decomp, layout, Q2).translation - before
    assert np.dot(moved, direction) / np.linalg.norm(moved) > 0.999


def test_solve_at_target_takes_zero_iterations():
    layout = ArmLayout.all_heads(8)
    decomp = decompose(layout)
    Q0 = np.random.default_rng(0).uniform(-1, 1, 16)
    report = solve_to_pose(decomp, layout, Q0, reduced_forward(decomp, layout, Q0), SolverSettings.for_arm(8, 1.0))
    assert report.status is Status.CONVERGED and report.iterations == 0


def test_solve_reaches_random_reachable_targets():
    layout = ArmLayout.all_heads(8)
    decomp = decompose(layout)
    settings = SolverSettings.for_arm(8, 1.0)
    rng = np.random.default_rng(99)
    converged = 0
    for _ in range(20):
        target = reduced_forward(decomp, layout, rng.uniform(-math.pi, math.pi, 16))
        report = solve_to_pose(decomp, layout, np.zeros(16), target, settings)
        if report.converged:
            converged += 1
            assert report.final_error[0] <= settings.position_tolerance
            assert report.final_error[1] <= settings.orientation_tolerance
    assert converged >= 18


def test_unreachable_target_never_converges():
    layout = ArmLayout.all_heads(8)
    decomp = decompose(layout)
    target = HomTransform.from_parts(np.eye(3), [0.0, 0.0, 16.0])
    report = solve_to_pose(decomp, layout, np.zeros(16), target, SolverSettings.for_arm(8, 1.0))
    assert report.status in (Status.STALLED, Status.MAX_ITERATIONS)


def test_max_iterations_status():
    layout = ArmLayout.all_heads(8)
    decomp = decompose(layout)
    target = reduced_forward(decomp, layout, np.full(16, 1.0))
    s = SolverSettings.for_arm(8, 1.0, max_iterations=2)
    report = solve_to_pose(decomp, layout, np.zeros(16), target, s)
    assert report.status is Status.MAX_ITERATIONS and report.iterations == 2


def test_damaged_angles_survive_solve():
    frozen = {i: (0.3 * i, -0.1 * i) for i in (2, 3, 9, 15)}
    layout = ArmLayout(16, 1.0, DAMAGED16, frozen)
    decomp = decompose(layout)
    rng = np.random.default_rng(1)
    target = reduced_forward(decomp, layout, rng.uniform(-0.5, 0.5, decomp.size))
    s = SolverSettings.for_arm(16, 1.0, position_only=True)
    report = solve_to_pose(decomp, layout, np.zeros(decomp.size), target, s, record_trajectory=True)
    assert report.converged
    assert len(report.trajectory) == report.iterations + 1
    q = expanded_solution(decomp, layout, report)
    for link, (phi, theta) in frozen.items():
        assert q[2 * link - 2] == phi and q[2 * link - 1] == theta


def test_settings_validation():
    with pytest.raises(InvalidArgument):
        SolverSettings(damping=-1)
    with pytest.raises(InvalidArgument):
        SolverSettings(dt=0)
    assert SolverSettings.for_arm(16, 0.5).position_tolerance == pytest.approx(8e-4)


def test_sector_columns():
    s = Sector(first_link=4, body_count=4, offset=2)
    assert list(s.links) == [4, 5, 6, 7, 8] and s.width == 3
    assert Sector(first_link=1, body_count=0, offset=0).width == 2
