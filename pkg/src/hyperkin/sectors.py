"""Sector decomposition of the arm and the reduced direct kinematics.

A sector is a head link (free twist and bend) followed by ``u`` body links
that all have zero twist and share one bend angle. Damaged links are locked
at constant angles and split the arm between sectors. The reduced
configuration ``Q`` holds, per sector, ``phi_head, theta_head`` and, if the
sector has a body, ``theta_body``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import InconsistentConfiguration, InvalidArgument, MalformedLayout
from .kinematics import ArmLayout, Mode, check_full_configuration, require_fresh
from .transforms import IDENTITY, HomTransform, bend_translation, twist_rotation

log = logging.getLogger(__name__)

# chord series is used below this |theta| to avoid dividing by sin(theta/2) ~ 0
_SMALL_ANGLE = 1e-6


@dataclass(frozen=True)
class Sector:
    first_link: int
    body_count: int
    offset: int  # position of phi_head in Q

    @property
    def has_body(self) -> bool:
        return self.body_count > 0

    @property
    def width(self) -> int:
        return 3 if self.has_body else 2

    @property
    def links(self) -> range:
        return range(self.first_link, self.first_link + self.body_count + 1)


@dataclass(frozen=True, eq=False)
class SectorDecomposition:
    """The sector list (``sectors``), damaged links (``damaged``) and the Q -> q map.

    ``correspondence[j]`` lists the 0-based q slots driven by ``Q[j]``.
    ``plan`` is the link-ordered product recipe: a ``Sector`` or a constant
    transform for each run of consecutive damaged links.
    """

    num_links: int
    sectors: tuple[Sector, ...]
    damaged: tuple[int, ...]
    size: int
    correspondence: tuple[tuple[int, ...], ...]
    plan: tuple[Union[Sector, HomTransform], ...]
    initial: Optional[np.ndarray] = None

    def records(self, Q) -> list[tuple]:
        """Sector records ``(i, u, phi_h, theta_h, theta_b)``; theta_b is None without a body."""
        Q = check_reduced(self, Q)
        out = []
        for s in self.sectors:
            theta_b = Q[s.offset + 2] if s.has_body else None
            out.append((s.first_link, s.body_count, Q[s.offset], Q[s.offset + 1], theta_b))
        return out

    def column_labels(self) -> list[tuple[int, str]]:
        labels = []
        for t, s in enumerate(self.sectors):
            labels += [(t, "head_phi"), (t, "head_theta")]
            if s.has_body:
                labels.append((t, "body_theta"))
        return labels


def _scan_sectors(layout: ArmLayout) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    current = None  # index into runs of the sector still accepting body links
    for i, mode in enumerate(layout.modes, start=1):
        if mode is Mode.HEAD:
            runs.append((i, 0))
            current = len(runs) - 1
        elif mode is Mode.BODY:
            if current is None:
                where = "at the start of the arm" if i == 1 else f"after damaged link {i - 1}"
                raise MalformedLayout(f"body link {i} is not preceded by a head ({where})")
            first, u = runs[current]
            runs[current] = (first, u + 1)
        else:
            current = None
    return runs


def decompose(layout: ArmLayout, q=None) -> SectorDecomposition:
    """Split ``layout`` into sectors and damaged links.

    If ``q`` is given it must satisfy the body constraints; the projected
    reduced configuration is stored as ``initial``.
    """
    runs = _scan_sectors(layout)
    d = layout.link_length
    sectors = []
    correspondence: list[tuple[int, ...]] = []
    offset = 0
    for first, u in runs:
        s = Sector(first, u, offset)
        sectors.append(s)
        correspondence.append((2 * first - 2,))
        correspondence.append((2 * first - 1,))
        if u:
            correspondence.append(tuple(2 * j - 1 for j in range(first + 1, first + u + 1)))
        offset += s.width

    by_first = {s.first_link: s for s in sectors}
    plan: list[Union[Sector, HomTransform]] = []
    fixed = None
    i = 1
    while i <= layout.num_links:
        if i in by_first:
            if fixed is not None:
                plan.append(fixed)
                fixed = None
            s = by_first[i]
            plan.append(s)
            i += s.body_count + 1
        else:
            phi, theta = layout.frozen[i]
            b = damaged_transform(phi, theta, d)
            fixed = b if fixed is None else fixed @ b
            i += 1
    if fixed is not None:
        plan.append(fixed)

    decomp = SectorDecomposition(
        num_links=layout.num_links,
        sectors=tuple(sectors),
        damaged=tuple(layout.damaged_links),
        size=offset,
        correspondence=tuple(correspondence),
        plan=tuple(plan),
    )
    if q is not None:
        Q = _project(decomp, layout, q)
        decomp = replace(decomp, initial=Q)
    return decomp


def check_reduced(decomp: SectorDecomposition, Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 1 or Q.shape[0] != decomp.size:
        raise InvalidArgument(f"expected {decomp.size} reduced variables, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise InvalidArgument("reduced configuration must be finite")
    return Q


def head_transform(phi_h: float, theta_h: float, d: float) -> HomTransform:
    return twist_rotation(phi_h) @ bend_translation(theta_h, d)


def damaged_transform(Phi: float, Theta: float, d: float) -> HomTransform:
    return twist_rotation(Phi) @ bend_translation(Theta, d)


def chord_length(theta_b: float, u: int, d: float) -> float:
    """Signed distance spanned by ``u`` equal links with equal bends ``theta_b``.

    This is ``d * sin(u θ/2) / sin(θ/2)``, the projection of the chained link
    vectors onto the direction ``(u + 1) θ / 2``. Its magnitude is the chord.
    """
    if u < 1:
        raise InvalidArgument(f"body needs at least one link, got u={u}")
    if u == 1:
        return float(d)
    half = 0.5 * theta_b
    if abs(theta_b) < _SMALL_ANGLE:
        return d * u * (1.0 - (u * u - 1) * half * half / 6.0)
    return d * math.sin(u * half) / math.sin(half)


def chord_length_recursive(theta_b: float, u: int, d: float, constant_angle: bool = False) -> float:
    """Law-of-cosines recursion for the chord (unsigned).

    Adding link z to a chord of z-1 links turns by ``z θ/2``. With
    ``constant_angle=True`` the recursion uses the constant angle ``(u + 1) θ/2``
    at every step instead, which does not reproduce the chained links for
    u > 2; it is kept for comparison only.
    """
    if u == 1:
        return float(d)
    x = math.sqrt(2.0 * d * d * (1.0 + math.cos(theta_b)))
    for z in range(3, u + 1):
        turn = (u + 1) * theta_b / 2 if constant_angle else z * theta_b / 2
        x = math.sqrt(max(0.0, x * x + d * d + 2.0 * x * d * math.cos(turn)))
    return x


def body_transform_iterative(theta_b: float, u: int, d: float) -> HomTransform:
    if u < 1:
        raise InvalidArgument(f"body needs at least one link, got u={u}")
    step = bend_translation(theta_b, d)
    t = step
    for _ in range(u - 1):
        t = t @ step
    return t


def closed_form_domain(theta_b: float, u: int) -> bool:
    return (u - 1) * abs(theta_b) < 2.0 * math.pi


def body_transform_closed(theta_b: float, u: int, d: float, diagnostics: dict | None = None) -> HomTransform:
    """Whole body as one matrix: a bend by ``u θ`` and a chord translation.

    Outside ``(u - 1)|θ| < 2π`` the iterative product is returned instead and
    ``diagnostics["fallback"]`` is set when a dict is passed.
    """
    if u < 1:
        raise InvalidArgument(f"body needs at least one link, got u={u}")
    if not closed_form_domain(theta_b, u):
        log.debug("closed-form body outside its domain (u=%d, theta=%g); using product", u, theta_b)
        if diagnostics is not None:
            diagnostics["fallback"] = True
        return body_transform_iterative(theta_b, u, d)
    if diagnostics is not None:
        diagnostics["fallback"] = False
    direction = theta_b + (u - 1) * theta_b / 2
    total = u * theta_b
    chord = chord_length(theta_b, u, d)
    c, s = math.cos(total), math.sin(total)
    return HomTransform(
        np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, c, s, chord * math.sin(direction)],
                [0.0, -s, c, chord * math.cos(direction)],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    )


@dataclass(frozen=True, eq=False)
class SectorFrames:
    """Frames of one reduced forward pass, per sector.

    ``base`` precedes the head, ``twisted`` follows the head twist,
    ``after_head`` follows the head bend (the body starts there).
    """

    config: np.ndarray
    base: tuple[HomTransform, ...]
    twisted: tuple[HomTransform, ...]
    after_head: tuple[HomTransform, ...]
    end: HomTransform


def sector_frames(decomp: SectorDecomposition, layout: ArmLayout, Q) -> SectorFrames:
    Q = check_reduced(decomp, Q)
    d = layout.link_length
    t = IDENTITY
    base, twisted, after_head = [], [], []
    for item in decomp.plan:
        if isinstance(item, HomTransform):
            t = t @ item
            continue
        k = item.offset
        base.append(t)
        t = t @ twist_rotation(Q[k])
        twisted.append(t)
        t = t @ bend_translation(Q[k + 1], d)
        after_head.append(t)
        if item.has_body:
            t = t @ body_transform_closed(Q[k + 2], item.body_count, d)
    return SectorFrames(Q.copy(), tuple(base), tuple(twisted), tuple(after_head), t)


def reduced_forward(decomp: SectorDecomposition, layout: ArmLayout, Q) -> HomTransform:
    """End-effector pose from the reduced configuration, in link order."""
    return sector_frames(decomp, layout, Q).end


def expand_configuration(decomp: SectorDecomposition, layout: ArmLayout, Q) -> np.ndarray:
    Q = check_reduced(decomp, Q)
    if decomp.num_links != layout.num_links:
        raise InvalidArgument("decomposition and layout disagree on the number of links")
    q = np.zeros(2 * layout.num_links)
    for j, slots in enumerate(decomp.correspondence):
        q[list(slots)] = Q[j]
    for link, (phi, theta) in layout.frozen.items():
        q[2 * link - 2] = phi
        q[2 * link - 1] = theta
    return q


def _project(decomp: SectorDecomposition, layout: ArmLayout, q, tol: float = 1e-12) -> np.ndarray:
    q = check_full_configuration(layout, q)
    Q = np.empty(decomp.size)
    for s in decomp.sectors:
        i, k = s.first_link, s.offset
        Q[k] = q[2 * i - 2]
        Q[k + 1] = q[2 * i - 1]
        if not s.has_body:
            continue
        theta_b = q[2 * i + 1]
        for j in s.links[1:]:
            if abs(q[2 * j - 2]) > tol:
                raise InconsistentConfiguration(f"body link {j} has nonzero twist {q[2 * j - 2]!r}")
            if abs(q[2 * j - 1] - theta_b) > tol:
                raise InconsistentConfiguration(
                    f"body link {j} bends by {q[2 * j - 1]!r}, sector {i} body bends by {theta_b!r}"
                )
        Q[k + 2] = theta_b
    return Q


def project_configuration(layout: ArmLayout, q) -> np.ndarray:
    """Reduced configuration of a full one; inverse of ``expand_configuration``."""
    return _project(decompose(layout), layout, q)


def count_dofs(decomp: SectorDecomposition) -> tuple[int, int]:
    """(independent control variables, physically moving joint variables)."""
    mobile = sum(2 + s.body_count for s in decomp.sectors)
    return decomp.size, mobile


def frames_for(decomp: SectorDecomposition, layout: ArmLayout, Q, frames: SectorFrames | None) -> SectorFrames:
    if frames is None:
        return sector_frames(decomp, layout, Q)
    require_fresh(frames.config, Q)
    return frames
