"""Jacobians, damped least squares and the iterate-to-pose loop."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InvalidArgument, SingularSystem
from .kinematics import (
    ArmLayout,
    Mode,
    bend_axis,
    classic_frames,
    effective_angles,
    require_fresh,
    revolute_columns,
    twist_axis,
)
from .sectors import (
    SectorDecomposition,
    check_reduced,
    expand_configuration,
    frames_for,
    reduced_forward,
    sector_frames,
)
from .transforms import HomTransform, Twist, bend_translation, pose_error, rotation_log, twist_rotation


@dataclass(frozen=True, eq=False)
class Jacobian:
    matrix: np.ndarray  # 6 x m
    column_labels: tuple

    @property
    def shape(self):
        return self.matrix.shape

    def position_rows(self) -> "Jacobian":
        return Jacobian(self.matrix[:3], self.column_labels)


@dataclass(frozen=True)
class SolverSettings:
    damping: float = 0.1
    dt: float = 1.0
    max_iterations: int = 2000
    position_tolerance: float = 1e-4
    orientation_tolerance: float = 1e-3
    stall_window: int = 50
    stall_epsilon: float = 1e-12
    step_clamp: float = 0.5
    position_only: bool = False

    def __post_init__(self):
        if not self.damping >= 0:
            raise InvalidArgument("damping must be non-negative")
        for name in ("dt", "position_tolerance", "orientation_tolerance", "step_clamp"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.max_iterations < 1 or self.stall_window < 1:
            raise InvalidArgument("max_iterations and stall_window must be positive")
        if not self.stall_epsilon >= 0:
            raise InvalidArgument("stall_epsilon must be non-negative")

    @classmethod
    def for_arm(cls, num_links: int, link_length: float, **overrides) -> "SolverSettings":
        """Defaults with the position tolerance scaled to the arm, 1e-4 * N * d."""
        overrides.setdefault("position_tolerance", 1e-4 * num_links * link_length)
        return cls(**overrides)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    STALLED = "Stalled"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class SolveReport:
    status: Status
    iterations: int
    final_error: tuple[float, float]  # (position, orientation)
    Q: np.ndarray
    trajectory: Optional[list[np.ndarray]] = None
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def classic_jacobian(layout: ArmLayout, q, frames=None) -> Jacobian:
    """One column per functional joint; damaged links contribute none."""
    if frames is None:
        frames = classic_frames(layout, q)
    else:
        require_fresh(frames.config, q)
    p_end = frames.end.translation
    axes, points, labels = [], [], []
    for i, mode in enumerate(layout.modes):
        if mode is Mode.DAMAGED:
            continue
        p = frames.entering[i].translation
        axes += [twist_axis(frames.entering[i]), bend_axis(frames.twisted[i])]
        points += [p, p]
        labels += [(i + 1, "phi"), (i + 1, "theta")]
    if not axes:
        return Jacobian(np.zeros((6, 0)), ())
    return Jacobian(revolute_columns(np.array(axes), np.array(points), p_end), tuple(labels))


def classic_jacobian_naive(layout: ArmLayout, q) -> Jacobian:
    """Textbook variant: each joint frame is re-multiplied from the base (O(N^2))."""
    angles = effective_angles(layout, q)
    d = layout.link_length
    twists = [twist_rotation(angles[2 * i]).matrix for i in range(layout.num_links)]
    links = [a1 @ bend_translation(angles[2 * i + 1], d).matrix for i, a1 in enumerate(twists)]
    end = np.eye(4)
    for a in links:
        end = end @ a
    p_end = end[:3, 3]
    axes, points, labels = [], [], []
    for i, mode in enumerate(layout.modes):
        if mode is Mode.DAMAGED:
            continue
        t = np.eye(4)
        for a in links[:i]:
            t = t @ a
        twisted = t @ twists[i]
        axes += [-t[:3, 2], -twisted[:3, 0]]
        points += [t[:3, 3], t[:3, 3]]
        labels += [(i + 1, "phi"), (i + 1, "theta")]
    return Jacobian(revolute_columns(np.array(axes), np.array(points), p_end), tuple(labels))


def _body_point_sum(theta_b: float, u: int, d: float) -> np.ndarray:
    """Sum of the u body joint positions in the frame where the body starts.

    Joint j sits at the end of j-1 bent links, so the y-z sum is
    ``d * sum_{k=1}^{u-1} (u - k) (sin kθ, cos kθ)``.
    """
    if u == 1:
        return np.zeros(3)
    k = np.arange(1, u)
    w = (u - k).astype(float)
    return d * np.array([0.0, np.dot(w, np.sin(k * theta_b)), np.dot(w, np.cos(k * theta_b))])


def _last_body_point(theta_b: float, u: int, d: float) -> np.ndarray:
    k = np.arange(1, u)
    return d * np.array([0.0, np.sin(k * theta_b).sum(), np.cos(k * theta_b).sum()])


def reduced_jacobian(
    decomp: SectorDecomposition, layout: ArmLayout, Q, frames=None, body_column: str = "sum"
) -> Jacobian:
    """Columns ``head_phi, head_theta[, body_theta]`` per sector.

    A body bend drives all of its u joints at once, so its column is the sum
    of their elementary columns (``body_column="sum"``). ``"last"`` keeps only
    the last body joint's column, for comparison.
    """
    if body_column not in ("sum", "last"):
        raise InvalidArgument(f"body_column must be 'sum' or 'last', got {body_column!r}")
    Q = check_reduced(decomp, Q)
    frames = frames_for(decomp, layout, Q, frames)
    d = layout.link_length
    p_end = frames.end.translation
    m = decomp.size
    axes = np.zeros((m, 3))
    points = np.zeros((m, 3))
    body_cols = []
    for t, s in enumerate(decomp.sectors):
        k = s.offset
        base, twisted, start = frames.base[t], frames.twisted[t], frames.after_head[t]
        axes[k] = twist_axis(base)
        axes[k + 1] = bend_axis(twisted)
        points[k] = points[k + 1] = base.translation
        if s.has_body:
            body_cols.append((k, s, start))
            axes[k + 2] = bend_axis(start)
            points[k + 2] = start.translation  # overwritten below
    out = revolute_columns(axes, points, p_end)
    if body_cols:
        # body columns: one lever arm per body, then a single batched cross product
        idx = np.array([k + 2 for k, _, _ in body_cols])
        counts = np.array([float(s.body_count) for _, s, _ in body_cols])
        levers = np.empty((len(body_cols), 3))
        for row, (k, s, start) in enumerate(body_cols):
            theta_b, u = Q[k + 2], s.body_count
            r, p0 = start.rotation, start.translation
            if body_column == "sum":
                offset = _body_point_sum(theta_b, u, d)
                levers[row] = u * (p_end - p0) - (r @ offset if u > 1 else 0.0)
            else:
                offset = _last_body_point(theta_b, u, d)
                levers[row] = p_end - p0 - (r @ offset if u > 1 else 0.0)
        a = axes[idx]
        scale = counts[:, None] if body_column == "sum" else 1.0
        out[:3, idx] = np.cross(a, levers).T
        out[3:, idx] = (scale * a).T
    return Jacobian(out, tuple(decomp.column_labels()))


def finite_difference_jacobian(decomp: SectorDecomposition, layout: ArmLayout, Q, h: float = 1e-6) -> Jacobian:
    """Central differences of position and of the relative-rotation vector."""
    if not h > 0:
        raise InvalidArgument("finite-difference step must be positive")
    Q = check_reduced(decomp, Q)
    out = np.empty((6, decomp.size))
    for j in range(decomp.size):
        qp, qm = Q.copy(), Q.copy()
        qp[j] += h
        qm[j] -= h
        tp = reduced_forward(decomp, layout, qp)
        tm = reduced_forward(decomp, layout, qm)
        out[:3, j] = (tp.translation - tm.translation) / (2 * h)
        out[3:, j] = rotation_log(tp.rotation @ tm.rotation.T) / (2 * h)
    return Jacobian(out, tuple(decomp.column_labels()))


def _matrix(J) -> np.ndarray:
    return J.matrix if isinstance(J, Jacobian) else np.asarray(J, dtype=float)


def _factor(J: np.ndarray, k: float):
    if k < 0 or not math.isfinite(k):
        raise InvalidArgument(f"damping must be a non-negative finite number, got {k}")
    a = J @ J.T
    a[np.diag_indices_from(a)] += k * k
    try:
        return scipy.linalg.cho_factor(a, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularSystem("J Jᵀ + k²I is not positive definite") from None


def damped_pseudo_inverse(J, k: float) -> np.ndarray:
    """``Jᵀ (J Jᵀ + k² I)⁻¹`` through a Cholesky solve of the small square system."""
    J = _matrix(J)
    factor = _factor(J, k)
    return scipy.linalg.cho_solve(factor, J, check_finite=False).T


def dls_velocity(J, u_e, k: float) -> np.ndarray:
    """Joint rates ``J* u_e`` without forming J* (one solve against the twist)."""
    J = _matrix(J)
    u_e = np.asarray(u_e, dtype=float)
    return J.T @ scipy.linalg.cho_solve(_factor(J, k), u_e, check_finite=False)


def _twist_vector(u_e, rows: int) -> np.ndarray:
    vec = u_e.vector if isinstance(u_e, Twist) else np.asarray(u_e, dtype=float)
    if vec.shape == (6,) and rows == 3:
        vec = vec[:3]
    if vec.shape != (rows,):
        raise InvalidArgument(f"twist has shape {vec.shape}, Jacobian has {rows} rows")
    return vec


def ik_step(Q, J, u_e, settings: SolverSettings) -> np.ndarray:
    """One Euler step ``Q + clamp(J* u_e) * dt``; the clamp bounds the rate norm."""
    Q = np.asarray(Q, dtype=float)
    Jm = _matrix(J)
    if Jm.shape[1] != Q.shape[0]:
        raise InvalidArgument(f"Jacobian has {Jm.shape[1]} columns for {Q.shape[0]} variables")
    rate = dls_velocity(Jm, _twist_vector(u_e, Jm.shape[0]), settings.damping)
    norm = np.linalg.norm(rate)
    if norm > settings.step_clamp:
        rate *= settings.step_clamp / norm
    return Q + rate * settings.dt


def _errors(current: HomTransform, target: HomTransform) -> tuple[Twist, float, float]:
    e = pose_error(current, target)
    return e, float(np.linalg.norm(e.linear)), float(np.linalg.norm(e.angular))


def solve_to_pose(
    decomp: SectorDecomposition,
    layout: ArmLayout,
    Q0,
    target: HomTransform,
    settings: SolverSettings = SolverSettings(),
    record_trajectory: bool = False,
) -> SolveReport:
    """Iterate FK -> pose error -> Jacobian -> DLS -> step until a stop condition.

    Damaged links never enter Q, so their angles cannot change.
    """
    start = time.perf_counter()
    Q = check_reduced(decomp, Q0).copy()
    trajectory = [Q.copy()] if record_trajectory else None
    history: list[float] = []
    status = Status.MAX_ITERATIONS
    iterations = 0
    while True:
        frames = sector_frames(decomp, layout, Q)
        e, pos_err, ori_err = _errors(frames.end, target)
        done = pos_err <= settings.position_tolerance and (
            settings.position_only or ori_err <= settings.orientation_tolerance
        )
        if done:
            status = Status.CONVERGED
            break
        score = pos_err if settings.position_only else pos_err + ori_err
        history.append(score)
        if len(history) > settings.stall_window:
            if history[-settings.stall_window - 1] - min(history[-settings.stall_window:]) < settings.stall_epsilon:
                status = Status.STALLED
                break
        if iterations >= settings.max_iterations:
            status = Status.MAX_ITERATIONS
            break
        if decomp.size == 0:
            status = Status.STALLED
            break
        J = reduced_jacobian(decomp, layout, Q, frames=frames)
        if settings.position_only:
            J = J.position_rows()
        Q = ik_step(Q, J, e, settings)
        iterations += 1
        if record_trajectory:
            trajectory.append(Q.copy())
    return SolveReport(status, iterations, (pos_err, ori_err), Q, trajectory, time.perf_counter() - start)


def expanded_solution(decomp: SectorDecomposition, layout: ArmLayout, report: SolveReport) -> np.ndarray:
    return expand_configuration(decomp, layout, report.Q)
