"""Online restructuring of the arm's mode vector.

The halving controller starts with one sector spanning the whole arm and, each
time the solver fails, halves the longest allowed sector until every
functional link is a head. Heads are never demoted, so the current physical
pose is always representable after a split.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidTransition, NoFunctionalDofs, NoFurtherStates
from .ik import SolveReport, SolverSettings, Status, solve_to_pose
from .kinematics import ArmLayout, Mode
from .sectors import SectorDecomposition, decompose, expand_configuration, project_configuration
from .transforms import HomTransform


@dataclass(frozen=True)
class ControllerState:
    """Failure count ``a``, current sector bound ``k`` and the layout it produced.

    ``history`` holds the ``(k, modes)`` pairs of earlier states, oldest first.
    """

    a: int
    k: int
    layout: ArmLayout
    history: tuple[tuple[int, tuple[Mode, ...]], ...] = ()

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self.layout.modes

    @property
    def heads(self) -> set[int]:
        return set(self.layout.head_links)

    @property
    def fully_articulated(self) -> bool:
        return self.k <= 1


def _repair(modes: list[Mode]) -> list[Mode]:
    # a body cannot start right after a damaged link or at the base
    for i, m in enumerate(modes):
        if m is Mode.BODY and (i == 0 or modes[i - 1] is Mode.DAMAGED):
            modes[i] = Mode.HEAD
    return modes


def initial_state(num_links: int, link_length: float = 1.0,
                  frozen: Optional[Mapping[int, tuple[float, float]]] = None) -> ControllerState:
    """State 0 (k = N): link 1 heads a single sector, damaged links overlaid."""
    frozen = dict(frozen or {})
    modes = [Mode.HEAD] + [Mode.BODY] * (num_links - 1)
    for link in frozen:
        if not 1 <= link <= num_links:
            raise InvalidArgument(f"damaged link {link} outside 1..{num_links}")
        modes[link - 1] = Mode.DAMAGED
    layout = ArmLayout(num_links, link_length, tuple(_repair(modes)), frozen)
    return ControllerState(0, num_links, layout)


def max_sector_length(layout: ArmLayout) -> int:
    return max((s.body_count + 1 for s in decompose(layout).sectors), default=1)


def state_from_layout(layout: ArmLayout) -> ControllerState:
    """Adopt an arbitrary layout; k is its longest sector (head plus body)."""
    return ControllerState(0, max_sector_length(layout), layout)


def halving_rule(previous: Sequence[Mode], k_next: int) -> list[Mode]:
    """Modes of the next state, evaluated only against ``previous``.

    A link becomes (or stays) a head if it is link 1, was a head, sits on the
    grid ``(i - 1) mod k_next == 0``, or directly follows a damaged link.
    Damaged links are kept as they are.
    """
    n = len(previous)
    out = []
    for i in range(1, n + 1):
        prev = previous[i - 1]
        if prev is Mode.DAMAGED:
            out.append(Mode.DAMAGED)
        elif (
            i == 1
            or prev is Mode.HEAD
            or (i - 1) % k_next == 0
            or previous[i - 2] is Mode.DAMAGED
        ):
            out.append(Mode.HEAD)
        else:
            out.append(Mode.BODY)
    return out


def halving_step(state: ControllerState) -> ControllerState:
    if state.k <= 1:
        raise NoFurtherStates("every functional link is already a head")
    k_next = state.k // 2
    modes = halving_rule(state.modes, k_next)
    return ControllerState(
        a=state.a + 1,
        k=k_next,
        layout=state.layout.with_modes(modes),
        history=state.history + ((state.k, state.modes),),
    )


def coarsen(state: ControllerState) -> ControllerState:
    """Return to the previous state's modes. Never invoked automatically.

    Moving the physical arm onto the coarser structure is the caller's job;
    ``restructure(..., allow_demotion=True)`` rejects poses that do not fit it.
    """
    if not state.history:
        raise NoFurtherStates("no coarser state recorded")
    k, modes = state.history[-1]
    return ControllerState(state.a - 1, k, state.layout.with_modes(modes), state.history[:-1])


def state_sequence(num_links: int) -> list[int]:
    ks = [num_links]
    while ks[-1] > 1:
        ks.append(ks[-1] // 2)
    return ks


def state_count(num_links: int) -> int:
    """Number of distinct structures the halving controller visits, floor(log2 N) + 1."""
    if num_links < 1:
        raise InvalidArgument("num_links must be positive")
    return len(state_sequence(num_links))


def mark_damaged(state: ControllerState, link: int, frozen: tuple[float, float]) -> ControllerState:
    """Lock ``link`` at ``frozen`` (its current physical angles).

    A body link right after the damaged one is promoted to head so the
    remaining body stays well formed.
    """
    layout = state.layout
    if not 1 <= link <= layout.num_links:
        raise InvalidArgument(f"link {link} outside 1..{layout.num_links}")
    if layout.modes[link - 1] is Mode.DAMAGED:
        return state
    modes = list(layout.modes)
    modes[link - 1] = Mode.DAMAGED
    if link < layout.num_links and modes[link] is Mode.BODY:
        modes[link] = Mode.HEAD
    new_frozen = {**layout.frozen, link: (float(frozen[0]), float(frozen[1]))}
    return replace(
        state,
        layout=layout.with_modes(modes, new_frozen),
        history=state.history + ((state.k, state.modes),),
    )


class Restructured(NamedTuple):
    layout: ArmLayout
    decomposition: SectorDecomposition
    Q: np.ndarray


def restructure(layout: ArmLayout, q_physical, new_modes: Sequence[int],
                allow_demotion: bool = False) -> Restructured:
    """Switch to ``new_modes`` while keeping the arm exactly where it is.

    New heads take over their current (0, theta_body) angles, so the reduced
    configuration reproduces ``q_physical`` and the end-effector pose.
    """
    damaged = {i for i, m in enumerate(new_modes, start=1) if int(m) == Mode.DAMAGED}
    if damaged != set(layout.damaged_links):
        raise InvalidTransition("damage changes go through mark_damaged, not restructure")
    new_layout = layout.with_modes(new_modes)
    lost = set(layout.head_links) - set(new_layout.head_links)
    if lost and not allow_demotion:
        raise InvalidTransition(f"links {sorted(lost)} would stop being heads")
    decomp = decompose(new_layout)
    Q = project_configuration(new_layout, q_physical)
    return Restructured(new_layout, decomp, Q)


def failure_detector(report: SolveReport, settings: SolverSettings | None = None) -> bool:
    return report.status in (Status.STALLED, Status.MAX_ITERATIONS)


@dataclass
class EscalationResult:
    report: SolveReport
    state: ControllerState
    decomposition: SectorDecomposition
    q: np.ndarray  # physical configuration after the last attempt
    restructures: int
    attempts: list[tuple[int, SolveReport]]  # (state index a, report)


def solve_with_escalation(state: ControllerState, q_physical, target: HomTransform,
                          settings: SolverSettings, record_trajectory: bool = False) -> EscalationResult:
    """Solve; on failure split every sector in half and retry from where the arm stopped.

    Performs at most ``state_count(N) - 1`` restructures.
    """
    layout = state.layout
    if not layout.functional_links:
        raise NoFunctionalDofs("every link is damaged")
    decomp = decompose(layout, q_physical)
    Q = decomp.initial
    attempts = []
    restructures = 0
    while True:
        report = solve_to_pose(decomp, layout, Q, target, settings, record_trajectory)
        attempts.append((state.a, report))
        q = expand_configuration(decomp, layout, report.Q)
        if not failure_detector(report, settings) or state.fully_articulated:
            return EscalationResult(report, state, decomp, q, restructures, attempts)
        state = halving_step(state)
        layout, decomp, Q = restructure(layout, q, state.modes)
        restructures += 1
