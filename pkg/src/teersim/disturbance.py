"""Hidden plant dynamics between the nested sheaths.

Two phenomena: flexing the intermediate sheath drags the device sheath
forward unless its cart is servo-locked (coupled extension), and proximal
roll of the device sheath charges torsional windup across static friction
that slips at a threshold and shakes loose during translation (stick-slip
twist). Axial dither lowers the friction threshold while active.

Deterministic by design: identical command streams produce bit-identical
trajectories. Variability in the experiments comes from the command
scripts, not the plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .config import DitherSpec, FrictionParams

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DisturbanceState:
    windup: float = 0.0  # deg, stored twist = ds_rotation_cmd - distal_roll
    distal_roll: float = 0.0  # deg, actual clip roll
    coupled_extension: float = 0.0  # mm, uncommanded device-sheath extension
    dither_active: bool = False
    dither_phase: float = 0.0  # rad


def relief_factor(amplitude_mm: float, spec: DitherSpec, friction: FrictionParams) -> float:
    """Friction-threshold multiplier for a given dither amplitude.

    Equals 1 at zero amplitude (dither does nothing) and friction.dither_relief
    at the reference amplitude; monotone decreasing in amplitude.
    """
    if amplitude_mm <= 0.0:
        return 1.0
    ratio = amplitude_mm / spec.amplitude_mm
    return 1.0 / (1.0 + ratio * (1.0 / friction.dither_relief - 1.0))


def step_coupling(
    is_bend_rate: float,
    ds_cart_locked: bool,
    dt: float,
    state: DisturbanceState,
    friction: FrictionParams,
) -> DisturbanceState:
    """Accumulate device-sheath drag from intermediate-sheath flexure.

    A servo-locked cart holds the sheath; otherwise friction drags it
    forward proportionally to flexure activity, saturating at the cap.
    """
    if ds_cart_locked or is_bend_rate == 0.0:
        return state
    ext = state.coupled_extension + friction.k_couple * abs(is_bend_rate) * dt
    return replace(state, coupled_extension=min(ext, friction.extension_cap))


def step_torsion(
    ds_roll_rate: float,
    ds_trans_rate: float,
    dithering: bool,
    dt: float,
    state: DisturbanceState,
    friction: FrictionParams,
    relief: float | None = None,
) -> DisturbanceState:
    """Stick-slip twist transfer between commanded and distal roll.

    Commanded roll charges windup; the distal end slips only past the
    effective threshold (lowered while dithering) and then rides it.
    Translation shakes stored windup out into the distal roll at a rate
    proportional to translation speed - the unintended rotation.
    """
    if relief is None:
        relief = friction.dither_relief
    w = state.windup + ds_roll_rate * dt
    d = state.distal_roll

    tau_eff = friction.tau_static * (relief if dithering else 1.0)
    if abs(w) > tau_eff:
        slip = w - math.copysign(tau_eff, w)
        d += slip
        w -= slip

    if ds_trans_rate != 0.0 and w != 0.0:
        released = friction.release_gain * abs(ds_trans_rate) * w * dt
        if abs(released) > abs(w):
            released = w
        d += released
        w -= released

    if abs(w) > friction.windup_cap:
        slip = w - math.copysign(friction.windup_cap, w)
        d += slip
        w -= slip

    return replace(state, windup=w, distal_roll=d)


def dither_offset(t: float, spec: DitherSpec) -> float:
    """Axial dither displacement (mm) at time t since dither onset."""
    return spec.amplitude_mm * math.sin(TWO_PI * spec.frequency_hz * t)


def step_dither(
    dithering: bool, dt: float, state: DisturbanceState, spec: DitherSpec
) -> DisturbanceState:
    """Advance the dither oscillator; phase restarts when dither engages."""
    if not dithering:
        if state.dither_active or state.dither_phase != 0.0:
            return replace(state, dither_active=False, dither_phase=0.0)
        return state
    return replace(
        state,
        dither_active=True,
        dither_phase=state.dither_phase + TWO_PI * spec.frequency_hz * dt,
    )


def dither_mm(state: DisturbanceState, spec: DitherSpec) -> float:
    """Current dither displacement of the device sheath, mm."""
    if not state.dither_active:
        return 0.0
    return spec.amplitude_mm * math.sin(state.dither_phase)
