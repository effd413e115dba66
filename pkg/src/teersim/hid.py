"""Gamepad input abstraction.

Producers (browser cockpit, scripted synthetic input) emit normalized
GamepadFrames; the controller consumes nothing else, so the core never
touches an OS input device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class MalformedFrameError(ValueError):
    """Raised for frames carrying non-finite axis values."""


@dataclass(frozen=True)
class GamepadFrame:
    left_stick: tuple[float, float] = (0.0, 0.0)
    right_stick: tuple[float, float] = (0.0, 0.0)
    dpad_up: bool = False
    dpad_down: bool = False
    dpad_left: bool = False
    dpad_right: bool = False
    trigger_left: float = 0.0
    trigger_right: float = 0.0
    button_x: bool = False
    button_y: bool = False
    button_a: bool = False
    button_b: bool = False
    timestamp: float = 0.0

    def axes(self) -> tuple[float, ...]:
        return (*self.left_stick, *self.right_stick, self.trigger_left, self.trigger_right)

    def mode_buttons(self) -> dict[str, bool]:
        return {"X": self.button_x, "Y": self.button_y, "A": self.button_a, "B": self.button_b}


def _dead(v: float, deadzone: float) -> float:
    if not math.isfinite(v):
        raise MalformedFrameError(f"non-finite axis value {v!r}")
    v = max(-1.0, min(1.0, v))
    return 0.0 if abs(v) < deadzone else v


def normalize(
    raw_axes: dict[str, float],
    raw_buttons: dict[str, bool] | None = None,
    deadzone: float = 0.05,
    timestamp: float = 0.0,
) -> GamepadFrame:
    """Build a GamepadFrame from raw device values.

    Axes are clamped to [-1, 1] and zeroed inside the deadzone (values at
    or past the deadzone pass through unchanged, so normalizing an
    already-normalized frame is a no-op). Triggers clamp to [0, 1].
    """
    raw_buttons = raw_buttons or {}
    lt = _dead(raw_axes.get("lt", 0.0), deadzone)
    rt = _dead(raw_axes.get("rt", 0.0), deadzone)
    return GamepadFrame(
        left_stick=(_dead(raw_axes.get("lx", 0.0), deadzone), _dead(raw_axes.get("ly", 0.0), deadzone)),
        right_stick=(_dead(raw_axes.get("rx", 0.0), deadzone), _dead(raw_axes.get("ry", 0.0), deadzone)),
        dpad_up=bool(raw_buttons.get("up", False)),
        dpad_down=bool(raw_buttons.get("down", False)),
        dpad_left=bool(raw_buttons.get("left", False)),
        dpad_right=bool(raw_buttons.get("right", False)),
        trigger_left=max(0.0, lt),
        trigger_right=max(0.0, rt),
        button_x=bool(raw_buttons.get("x", False)),
        button_y=bool(raw_buttons.get("y", False)),
        button_a=bool(raw_buttons.get("a", False)),
        button_b=bool(raw_buttons.get("b", False)),
        timestamp=timestamp,
    )


class ButtonEdge:
    """Edge detector for the mode buttons: a held button fires once."""

    def __init__(self) -> None:
        self._held: set[str] = set()

    def presses(self, frame: GamepadFrame) -> list[str]:
        pressed = {name for name, down in frame.mode_buttons().items() if down}
        fresh = sorted(pressed - self._held)
        self._held = pressed
        return fresh


def frame_to_dict(frame: GamepadFrame) -> dict:
    return {
        "left_stick": list(frame.left_stick),
        "right_stick": list(frame.right_stick),
        "dpad": {
            "up": frame.dpad_up,
            "down": frame.dpad_down,
            "left": frame.dpad_left,
            "right": frame.dpad_right,
        },
        "triggers": [frame.trigger_left, frame.trigger_right],
        "buttons": {
            "X": frame.button_x,
            "Y": frame.button_y,
            "A": frame.button_a,
            "B": frame.button_b,
        },
        "timestamp": frame.timestamp,
    }


def frame_from_dict(data: dict) -> GamepadFrame:
    dpad = data.get("dpad", {})
    buttons = data.get("buttons", {})
    trig = data.get("triggers", [0.0, 0.0])
    frame = GamepadFrame(
        left_stick=tuple(data.get("left_stick", (0.0, 0.0))),
        right_stick=tuple(data.get("right_stick", (0.0, 0.0))),
        dpad_up=bool(dpad.get("up", False)),
        dpad_down=bool(dpad.get("down", False)),
        dpad_left=bool(dpad.get("left", False)),
        dpad_right=bool(dpad.get("right", False)),
        trigger_left=float(trig[0]),
        trigger_right=float(trig[1]),
        button_x=bool(buttons.get("X", False)),
        button_y=bool(buttons.get("Y", False)),
        button_a=bool(buttons.get("A", False)),
        button_b=bool(buttons.get("B", False)),
        timestamp=float(data.get("timestamp", 0.0)),
    )
    for v in frame.axes():
        if not math.isfinite(v):
            raise MalformedFrameError(f"non-finite axis value {v!r}")
    return frame
