"""Session configuration: geometry, friction, limits, phantom, rates.

Every tunable the simulator uses lives here so that a config hash pins a
trial log to the exact numbers that produced it. Values load from JSON and
merge over the shipped defaults.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

DT = 0.01  # fixed simulation timestep, s (100 Hz tick)

DOF_NAMES = (
    "ts_translation",
    "ts_rotation",
    "ts_bend",
    "is_translation",
    "is_bend_ml",
    "is_bend_ap",
    "ds_translation",
    "ds_rotation_cmd",
)

FLEXURE_DOFS = ("ts_bend", "is_bend_ml", "is_bend_ap")
ROLL_DOFS = ("ts_rotation", "ds_rotation_cmd")
TRANSLATION_DOFS = ("ts_translation", "is_translation", "ds_translation")


@dataclass(frozen=True)
class SheathGeometry:
    """Per-sheath constant-curvature geometry, mm/deg."""

    bend_section_length: float
    outer_radius: float
    max_stroke: float
    max_bend: float  # 0 disables the bend DOF (rigid sheath)


@dataclass(frozen=True)
class SystemGeometry:
    transseptal: SheathGeometry = SheathGeometry(
        bend_section_length=80.0, outer_radius=8.0, max_stroke=150.0, max_bend=180.0
    )
    intermediate: SheathGeometry = SheathGeometry(
        bend_section_length=60.0, outer_radius=6.0, max_stroke=150.0, max_bend=120.0
    )
    device: SheathGeometry = SheathGeometry(
        bend_section_length=120.0, outer_radius=4.0, max_stroke=150.0, max_bend=0.0
    )
    # femoral entry pose in the world frame: position + z-y-x Euler, deg
    base_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    base_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation_range: float = 720.0  # axial roll joints saturate at +/- this, deg


@dataclass(frozen=True)
class FrictionParams:
    """Inter-sheath friction model constants.

    k_couple and release_gain are calibrated against the canonical
    motion-problem scripts (see scenarios.py); tau_static and dither_relief
    are the shipped stick-slip constants.
    """

    k_couple: float = 6.0 / 90.0  # mm of dragged extension per deg of flexure
    tau_static: float = 30.0  # deg of windup held by static friction
    dither_relief: float = 0.2  # threshold multiplier at reference dither amplitude
    release_gain: float = math.log(15.0) / 80.0  # per mm of translation
    extension_cap: float = 10.0  # mm, maximum inadvertent extension
    windup_cap: float = 45.0  # deg, hard limit on stored twist


@dataclass(frozen=True)
class DitherSpec:
    amplitude_mm: float = 2.5
    frequency_hz: float = 2.2


@dataclass(frozen=True)
class SpeedLimits:
    flexure: float = 5.46  # deg/s
    roll: float = 14.56  # deg/s
    translation: float = 6.0  # mm/s

    def for_dof(self, dof: str) -> float:
        if dof in FLEXURE_DOFS:
            return self.flexure
        if dof in ROLL_DOFS:
            return self.roll
        return self.translation


@dataclass(frozen=True)
class PhantomConfig:
    """Mitral valve phantom placement and dimensions (world frame, mm).

    The annulus frame is frozen from the canonical robotic delivery run so
    the shipped scripts land on the segment targets; regenerate with
    `teersim calibrate`.
    """

    center: tuple[float, float, float] = (47.711064589967285, -13.455766280855405, 155.53522937279512)
    axis: tuple[float, float, float] = (0.6807257094429104, -0.2088433770656964, 0.7021591774985039)
    u_axis: tuple[float, float, float] = (-0.016410047088159293, 0.9532799453719239, 0.3014313371195314)
    semi_axis_u: float = 19.0
    semi_axis_v: float = 15.0
    coaptation_chord: float = 30.0
    coaptation_sagitta: float = 4.0
    atrium_radius: float = 50.0


@dataclass(frozen=True)
class InitialJoints:
    """Start-of-trial joint values: clip extended from the transseptal
    sheath in a standard orientation inside the left atrium."""

    ts_translation: float = 100.0
    ts_rotation: float = 0.0
    ts_bend: float = 20.0
    is_translation: float = 25.0
    is_bend_ml: float = 0.0
    is_bend_ap: float = 0.0
    ds_translation: float = 15.0
    ds_rotation_cmd: float = 0.0


@dataclass(frozen=True)
class SessionConfig:
    geometry: SystemGeometry = field(default_factory=SystemGeometry)
    friction: FrictionParams = field(default_factory=FrictionParams)
    dither: DitherSpec = field(default_factory=DitherSpec)
    limits: SpeedLimits = field(default_factory=SpeedLimits)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    initial_joints: InitialJoints = field(default_factory=InitialJoints)
    mode_bindings: tuple[tuple[str, int], ...] = (("X", 1), ("Y", 2), ("A", 3), ("B", 4))
    tick_rate: float = 100.0
    snapshot_rate: float = 30.0
    deadzone: float = 0.05
    invert_ap: bool = False
    stale_input_s: float = 0.1  # driver frames older than this are dropped

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate

    def binding_for(self, button: str) -> int:
        for name, mode_id in self.mode_bindings:
            if name == button:
                return mode_id
        raise KeyError(f"no mode bound to button {button!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _merge(base: Any, override: Any) -> Any:
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for k, v in override.items():
            out[k] = _merge(base.get(k), v) if k in base else v
        return out
    return override


def _build(cls: type, data: dict[str, Any]) -> Any:
    kwargs: dict[str, Any] = {}
    for name, f in cls.__dataclass_fields__.items():  # type: ignore[attr-defined]
        if name not in data:
            continue
        v = data[name]
        sub = {
            "geometry": SystemGeometry,
            "friction": FrictionParams,
            "dither": DitherSpec,
            "limits": SpeedLimits,
            "phantom": PhantomConfig,
            "initial_joints": InitialJoints,
            "transseptal": SheathGeometry,
            "intermediate": SheathGeometry,
            "device": SheathGeometry,
        }.get(name)
        if sub is not None and isinstance(v, dict):
            kwargs[name] = _build(sub, v)
        elif isinstance(v, list):
            kwargs[name] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        else:
            kwargs[name] = v
    return cls(**kwargs)


def load_config(path: str | Path | None = None) -> SessionConfig:
    """Default config, optionally overridden by a JSON file (deep merge)."""
    if path is None:
        return SessionConfig()
    data = json.loads(Path(path).read_text())
    merged = _merge(SessionConfig().to_dict(), data)
    return _build(SessionConfig, merged)
