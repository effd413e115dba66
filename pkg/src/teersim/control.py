"""Four-mode joint-space velocity controller.

Each delivery step runs under a control mode that enables only the joints
that step needs; stick/D-pad/trigger inputs map linearly to clamped joint
velocity commands. Commanded device-sheath roll injects automatic axial
dither. A manual-emulation path mirrors sequential single-handle operation
with no gating and no cart locks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import (
    DOF_NAMES,
    FLEXURE_DOFS,
    ROLL_DOFS,
    SessionConfig,
    SpeedLimits,
)
from .disturbance import (
    DisturbanceState,
    dither_mm,
    relief_factor,
    step_coupling,
    step_dither,
    step_torsion,
)
from .hid import GamepadFrame, MalformedFrameError
from .kinematics import JointState

# step id -> control mode (four modes cover the eight delivery steps)
STEP_MODE = {1: 1, 2: 2, 3: 3, 4: 4, 5: 4, 6: 4, 7: 4, 8: 4}


@dataclass(frozen=True)
class ControlMode:
    id: int
    enabled_dofs: frozenset[str]
    trigger_translation_set: frozenset[str]  # subset of {"ts", "is", "ds"}


MODES: dict[int, ControlMode] = {
    1: ControlMode(
        id=1,
        enabled_dofs=frozenset({"ts_bend", "ts_rotation", "ts_translation"}),
        trigger_translation_set=frozenset({"ts", "is", "ds"}),
    ),
    2: ControlMode(
        id=2,
        enabled_dofs=frozenset({"ts_rotation", "is_bend_ml", "is_translation"}),
        trigger_translation_set=frozenset({"is", "ds"}),
    ),
    3: ControlMode(
        id=3,
        enabled_dofs=frozenset({"ts_rotation", "is_translation", "is_bend_ml", "is_bend_ap"}),
        trigger_translation_set=frozenset({"is", "ds"}),
    ),
    4: ControlMode(
        id=4,
        enabled_dofs=frozenset({"ts_rotation", "ds_translation", "ds_rotation_cmd"}),
        trigger_translation_set=frozenset(),
    ),
}

# Triggers translate the carts of the whole set in unison. Insertions are
# relative to the parent sheath, so unison cart motion changes only the
# outermost sheath of the set; the nested carts follow and keep their
# relative insertions.
_TRIGGER_ORDER = ("ts", "is", "ds")
_TRIGGER_DOF = {"ts": "ts_translation", "is": "is_translation", "ds": "ds_translation"}


def trigger_dof(mode: ControlMode) -> str | None:
    """Relative-insertion joint the trigger group actually drives."""
    for sheath in _TRIGGER_ORDER:
        if sheath in mode.trigger_translation_set:
            return _TRIGGER_DOF[sheath]
    return None


@dataclass(frozen=True)
class VelocityCommand:
    ts_translation: float = 0.0
    ts_rotation: float = 0.0
    ts_bend: float = 0.0
    is_translation: float = 0.0
    is_bend_ml: float = 0.0
    is_bend_ap: float = 0.0
    ds_translation: float = 0.0
    ds_rotation_cmd: float = 0.0
    dither_requested: bool = False

    def rate(self, dof: str) -> float:
        return getattr(self, dof)

    def rates(self) -> dict[str, float]:
        return {dof: getattr(self, dof) for dof in DOF_NAMES}

    def is_zero(self) -> bool:
        return all(getattr(self, dof) == 0.0 for dof in DOF_NAMES)


ZERO_COMMAND = VelocityCommand()


def map_gamepad(
    frame: GamepadFrame,
    mode: ControlMode,
    limits: SpeedLimits,
    invert_ap: bool = False,
) -> VelocityCommand:
    """Translate a gamepad frame into gated, clamped joint velocities.

    Left stick: transseptal bend (x) and roll (y). Right stick:
    intermediate medial-lateral (x) and anterior-posterior (y) flexure.
    D-pad: device sheath translation (up/down) and roll (left/right),
    active in mode 4 where it also requests dither. Triggers advance and
    retract the mode's translation group in unison.
    """
    for v in frame.axes():
        if not math.isfinite(v):
            raise MalformedFrameError("gamepad frame contains non-finite axes")

    rates = dict.fromkeys(DOF_NAMES, 0.0)
    rates["ts_bend"] = frame.left_stick[0] * limits.flexure
    rates["ts_rotation"] = frame.left_stick[1] * limits.roll
    rates["is_bend_ml"] = frame.right_stick[0] * limits.flexure
    ap = -frame.right_stick[1] if invert_ap else frame.right_stick[1]
    rates["is_bend_ap"] = ap * limits.flexure

    if mode.id == 4:
        rates["ds_translation"] = (int(frame.dpad_up) - int(frame.dpad_down)) * limits.translation
        rates["ds_rotation_cmd"] = (int(frame.dpad_right) - int(frame.dpad_left)) * limits.roll

    group_dof = trigger_dof(mode)
    if group_dof is not None:
        rates[group_dof] = (frame.trigger_right - frame.trigger_left) * limits.translation

    for dof in DOF_NAMES:
        if dof not in mode.enabled_dofs:
            rates[dof] = 0.0

    cmd = VelocityCommand(
        **rates,
        dither_requested=(mode.id == 4 and rates["ds_rotation_cmd"] != 0.0),
    )
    return clamp(cmd, limits)


def clamp(cmd: VelocityCommand, limits: SpeedLimits) -> VelocityCommand:
    """Componentwise saturation to the configured speed limits. Idempotent."""
    clamped = {}
    for dof in DOF_NAMES:
        lim = limits.for_dof(dof)
        clamped[dof] = max(-lim, min(lim, getattr(cmd, dof)))
    return VelocityCommand(**clamped, dither_requested=cmd.dither_requested)


@dataclass(frozen=True)
class ManualAction:
    """One handle adjustment: a single joint rate, optionally hand-dithered.

    Mirrors sequential single-handle operation; dof None is an idle hold.
    """

    dof: str | None = None
    rate: float = 0.0
    hand_dither: bool = False

    def __post_init__(self) -> None:
        if self.dof is not None and self.dof not in DOF_NAMES:
            raise ValueError(f"unknown joint {self.dof!r}")


NO_ACTION = ManualAction()


def joint_bounds(dof: str, config: SessionConfig) -> tuple[float, float]:
    geo = config.geometry
    sheath = {"ts": geo.transseptal, "is": geo.intermediate, "ds": geo.device}[dof[:2]]
    if dof.endswith("translation"):
        return 0.0, sheath.max_stroke
    if dof in FLEXURE_DOFS:
        return -sheath.max_bend, sheath.max_bend
    return -geo.rotation_range, geo.rotation_range


def _integrate(js: JointState, cmd: VelocityCommand, dt: float, config: SessionConfig) -> tuple[
    JointState, dict[str, float]
]:
    """Euler step with limit saturation; returns realized per-joint rates."""
    new = js.copy()
    applied: dict[str, float] = {}
    for dof in DOF_NAMES:
        rate = cmd.rate(dof)
        if rate == 0.0:
            applied[dof] = 0.0
            continue
        lo, hi = joint_bounds(dof, config)
        before = getattr(js, dof)
        after = max(lo, min(hi, before + rate * dt))
        setattr(new, dof, after)
        applied[dof] = (after - before) / dt
    return new, applied


def _step_disturbance(
    dist: DisturbanceState,
    applied: dict[str, float],
    ds_cart_locked: bool,
    dithering: bool,
    dt: float,
    config: SessionConfig,
) -> DisturbanceState:
    dist = step_coupling(
        abs(applied["is_bend_ml"]) + abs(applied["is_bend_ap"]),
        ds_cart_locked,
        dt,
        dist,
        config.friction,
    )
    dist = step_torsion(
        applied["ds_rotation_cmd"],
        applied["ds_translation"],
        dithering,
        dt,
        dist,
        config.friction,
        relief=relief_factor(config.dither.amplitude_mm, config.dither, config.friction),
    )
    return step_dither(dithering, dt, dist, config.dither)


def step_robotic(
    js: JointState,
    dist: DisturbanceState,
    cmd: VelocityCommand,
    dt: float,
    config: SessionConfig,
) -> tuple[JointState, DisturbanceState]:
    """Integrate one robotic tick.

    Carts of sheaths with no commanded translation hold position
    (servo-locked), which is what suppresses coupled extension.
    """
    new_js, applied = _integrate(js, cmd, dt, config)
    ds_cart_locked = cmd.ds_translation == 0.0
    new_dist = _step_disturbance(dist, applied, ds_cart_locked, cmd.dither_requested, dt, config)
    return new_js, new_dist


def step_manual(
    js: JointState,
    dist: DisturbanceState,
    action: ManualAction,
    dt: float,
    config: SessionConfig,
) -> tuple[JointState, DisturbanceState]:
    """Integrate one manual tick: no gating, no cart locks.

    The unpowered device sheath is free to be dragged, so coupling is
    always live; dither happens only when the hand provides it.
    """
    rates = dict.fromkeys(DOF_NAMES, 0.0)
    if action.dof is not None:
        lim = config.limits.for_dof(action.dof)
        rates[action.dof] = max(-lim, min(lim, action.rate))
    cmd = VelocityCommand(**rates)
    new_js, applied = _integrate(js, cmd, dt, config)
    new_dist = _step_disturbance(dist, applied, False, action.hand_dither, dt, config)
    return new_js, new_dist


def set_mode(current: ControlMode, button: str, config: SessionConfig) -> ControlMode:
    """Mode bound to a face button; selectable in any order."""
    return MODES[config.binding_for(button)]


class ModeGate:
    """Stateful wrapper for live sessions: mode changes zero in-flight
    commands until a fresh input frame arrives."""

    def __init__(self, config: SessionConfig, initial_mode: int = 1) -> None:
        self.config = config
        self.mode = MODES[initial_mode]
        self._suppress_until: float | None = None

    def select(self, button: str, now: float) -> ControlMode:
        new_mode = set_mode(self.mode, button, self.config)
        if new_mode.id != self.mode.id:
            self._suppress_until = now
        self.mode = new_mode
        return new_mode

    def command(self, frame: GamepadFrame) -> VelocityCommand:
        if self._suppress_until is not None:
            if frame.timestamp <= self._suppress_until:
                return ZERO_COMMAND
            self._suppress_until = None
        return map_gamepad(frame, self.mode, self.config.limits, self.config.invert_ap)
