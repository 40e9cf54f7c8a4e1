"""Arm description and the classic, fully articulated direct kinematics.

Link indices are 1-based everywhere in the public API (link 1 is attached to
the base). A full configuration ``q`` is a flat array
``[phi_1, theta_1, ..., phi_N, theta_N]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidState
from .transforms import IDENTITY, HomTransform, bend_translation, twist_rotation


class Mode(IntEnum):
    DAMAGED = -1
    BODY = 0
    HEAD = 1


@dataclass(frozen=True)
class ArmLayout:
    """N equal links of length ``link_length`` with a per-link mode.

    ``frozen`` maps every damaged link index to its locked (phi, theta).
    """

    num_links: int
    link_length: float
    modes: tuple[Mode, ...]
    frozen: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.num_links) != self.num_links or self.num_links < 1:
            raise InvalidArgument(f"num_links must be a positive integer, got {self.num_links}")
        if not (math.isfinite(self.link_length) and self.link_length > 0):
            raise InvalidArgument(f"link_length must be positive, got {self.link_length}")
        try:
            modes = tuple(Mode(int(m)) for m in self.modes)
        except ValueError as exc:
            raise InvalidArgument(f"mode values must be -1, 0 or 1: {exc}") from None
        if len(modes) != self.num_links:
            raise InvalidArgument(f"expected {self.num_links} modes, got {len(modes)}")
        object.__setattr__(self, "modes", modes)

        frozen = {int(k): (float(v[0]), float(v[1])) for k, v in dict(self.frozen).items()}
        damaged = {i for i, m in enumerate(modes, start=1) if m is Mode.DAMAGED}
        if set(frozen) != damaged:
            raise InvalidArgument(
                f"frozen angles given for links {sorted(frozen)} but damaged links are {sorted(damaged)}"
            )
        for angles in frozen.values():
            if not all(math.isfinite(a) for a in angles):
                raise InvalidArgument("frozen angles must be finite")
        object.__setattr__(self, "frozen", frozen)

    @classmethod
    def all_heads(cls, num_links: int, link_length: float = 1.0) -> "ArmLayout":
        return cls(num_links, link_length, (Mode.HEAD,) * num_links)

    def with_modes(self, modes: Sequence[int], frozen: Mapping[int, tuple[float, float]] | None = None):
        return ArmLayout(self.num_links, self.link_length, tuple(modes), self.frozen if frozen is None else frozen)

    @property
    def damaged_links(self) -> list[int]:
        return [i for i, m in enumerate(self.modes, start=1) if m is Mode.DAMAGED]

    @property
    def head_links(self) -> list[int]:
        return [i for i, m in enumerate(self.modes, start=1) if m is Mode.HEAD]

    @property
    def functional_links(self) -> list[int]:
        return [i for i, m in enumerate(self.modes, start=1) if m is not Mode.DAMAGED]


def check_full_configuration(layout: ArmLayout, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.shape[0] != 2 * layout.num_links:
        raise InvalidArgument(f"expected {2 * layout.num_links} joint angles, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidArgument("joint angles must be finite")
    return q


def effective_angles(layout: ArmLayout, q) -> np.ndarray:
    """``q`` with every damaged link's slots replaced by its frozen angles."""
    q = check_full_configuration(layout, q).copy()
    for link, (phi, theta) in layout.frozen.items():
        q[2 * link - 2] = phi
        q[2 * link - 1] = theta
    return q


@dataclass(frozen=True, eq=False)
class ChainFrames:
    """Per-link frames of one classic forward pass.

    ``entering[i]`` is the frame before link ``i + 1`` (``entering[0]`` is the
    base, ``entering[N]`` the end-effector); ``twisted[i]`` is
    ``entering[i]`` after that link's twist.
    """

    config: np.ndarray
    entering: tuple[HomTransform, ...]
    twisted: tuple[HomTransform, ...]

    @property
    def end(self) -> HomTransform:
        return self.entering[-1]


def classic_frames(layout: ArmLayout, q) -> ChainFrames:
    angles = effective_angles(layout, q)
    d = layout.link_length
    t = IDENTITY
    entering = [t]
    twisted = []
    for i in range(layout.num_links):
        t = t @ twist_rotation(angles[2 * i])
        twisted.append(t)
        t = t @ bend_translation(angles[2 * i + 1], d)
        entering.append(t)
    return ChainFrames(np.array(q, dtype=float), tuple(entering), tuple(twisted))


def classic_forward(layout: ArmLayout, q) -> HomTransform:
    """End-effector pose as the ordered product of every link's twist and bend."""
    return classic_frames(layout, q).end


def require_fresh(cached_config: np.ndarray, config) -> None:
    if not np.array_equal(cached_config, np.asarray(config, dtype=float)):
        raise InvalidState("cached frames were computed for a different configuration")


# Signed joint axes follow from the link matrices: twist rotates about -z of the
# entering frame, bend about -x of the twisted frame.
def twist_axis(frame: HomTransform) -> np.ndarray:
    return -frame.matrix[:3, 2]


def bend_axis(frame: HomTransform) -> np.ndarray:
    return -frame.matrix[:3, 0]


def revolute_columns(axes: np.ndarray, points: np.ndarray, p_end: np.ndarray) -> np.ndarray:
    """6 x m block ``[a x (p_e - p); a]`` for m revolute joints."""
    axes = np.asarray(axes, dtype=float).reshape(-1, 3)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    linear = np.cross(axes, p_end - points)
    return np.vstack([linear.T, axes.T])
