"""Flat ``key: value`` arm configuration files.

Grammar (one entry per line, ``#`` starts a comment, blank lines ignored)::

    num_links: <int>                       required
    link_length: <float>                   default 1.0
    damping: <float>                       default 0.1
    dt: <float>                            default 1.0
    position_tolerance: <float>            default 1e-4 * num_links * link_length
    orientation_tolerance: <float>         default 1e-3
    max_iterations: <int>                  default 2000
    stall_window: <int>                    default 50
    stall_epsilon: <float>                 default 1e-12
    step_clamp: <float>                    default 0.5
    seed: <int>                            default 0
    H: <int>,<int>,...                     num_links values in {-1, 0, 1}
    frozen.<link>: <phi>, <theta>          one line per damaged link

Without an ``H`` line the arm starts in the halving controller's first state
(link 1 heads one sector), with any ``frozen.*`` links overlaid as damaged.
Keys are case-sensitive; unknown or repeated keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ik import SolverSettings
from .kinematics import ArmLayout
from .meta import ControllerState, initial_state, state_from_layout

_FLOAT_KEYS = ("link_length", "damping", "dt", "position_tolerance", "orientation_tolerance",
               "stall_epsilon", "step_clamp")
_INT_KEYS = ("num_links", "max_iterations", "stall_window", "seed")


@dataclass
class ArmConfig:
    num_links: int
    link_length: float = 1.0
    settings: SolverSettings = field(default_factory=SolverSettings)
    modes: Optional[tuple[int, ...]] = None
    frozen: dict[int, tuple[float, float]] = field(default_factory=dict)
    seed: int = 0

    def controller_state(self) -> ControllerState:
        if self.modes is None:
            return initial_state(self.num_links, self.link_length, self.frozen)
        return state_from_layout(ArmLayout(self.num_links, self.link_length, self.modes, self.frozen))

    def layout(self) -> ArmLayout:
        return self.controller_state().layout


def _number(key: str, text: str, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from None


def parse_config(text: str) -> ArmConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key: value', got {line!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        known = key in _FLOAT_KEYS or key in _INT_KEYS or key == "H" or key.startswith("frozen.")
        if not known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value

    if "num_links" not in raw:
        raise ConfigError("missing required key 'num_links'")
    values = {}
    for key in _FLOAT_KEYS:
        if key in raw:
            values[key] = _number(key, raw[key], float)
    for key in _INT_KEYS:
        if key in raw:
            values[key] = _number(key, raw[key], int)

    n = values["num_links"]
    d = values.get("link_length", 1.0)
    modes = None
    if "H" in raw:
        modes = tuple(_number("H", v.strip(), int) for v in raw["H"].split(","))
    frozen = {}
    for key, value in raw.items():
        if not key.startswith("frozen."):
            continue
        link = _number(key, key[len("frozen."):], int)
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"{key}: expected '<phi>, <theta>'")
        frozen[link] = (_number(key, parts[0], float), _number(key, parts[1], float))

    setting_keys = ("damping", "dt", "position_tolerance", "orientation_tolerance", "max_iterations",
                    "stall_window", "stall_epsilon", "step_clamp")
    settings = SolverSettings.for_arm(n, d, **{k: values[k] for k in setting_keys if k in values})
    config = ArmConfig(n, d, settings, modes, frozen, values.get("seed", 0))
    config.controller_state()  # validates H, frozen angles and sector structure
    return config


def load_config(path) -> ArmConfig:
    return parse_config(Path(path).read_text())


def format_config(config: ArmConfig) -> str:
    s = config.settings
    lines = [
        f"num_links: {config.num_links}",
        f"link_length: {config.link_length!r}",
        f"damping: {s.damping!r}",
        f"dt: {s.dt!r}",
        f"position_tolerance: {s.position_tolerance!r}",
        f"orientation_tolerance: {s.orientation_tolerance!r}",
        f"max_iterations: {s.max_iterations}",
        f"stall_window: {s.stall_window}",
        f"stall_epsilon: {s.stall_epsilon!r}",
        f"step_clamp: {s.step_clamp!r}",
        f"seed: {config.seed}",
    ]
    if config.modes is not None:
        lines.append("H: " + ",".join(str(int(m)) for m in config.modes))
    for link in sorted(config.frozen):
        phi, theta = config.frozen[link]
        lines.append(f"frozen.{link}: {phi!r}, {theta!r}")
    return "\n".join(lines) + "\n"
