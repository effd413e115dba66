"""Trial orchestration: scripted runs, logging, timings, metrics, replay.

A trial executes a command script (timed gamepad frames for the robotic
path, timed single-handle actions for the manual path) on the plant at the
fixed tick rate, recording every tick and event to a JSON-lines log. All
reported metrics are computed from logs, so a replayed log yields the
same numbers as the live run. Scripted runs are fully deterministic.
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .config import DOF_NAMES, SessionConfig
from .control import (
    MODES,
    STEP_MODE,
    ManualAction,
    VelocityCommand,
    ZERO_COMMAND,
    joint_bounds,
    map_gamepad,
    set_mode,
    step_manual,
    step_robotic,
)
from .disturbance import DisturbanceState, dither_mm
from .hid import GamepadFrame, frame_from_dict
from .kinematics import JointState, Pose, chain_fk
from .phantom import PlacementScore, build_phantom, hull_volume, score_placement


class ScriptError(ValueError):
    """Command script is malformed or references a gated joint."""


class MalformedLogError(ValueError):
    """Trial log violates the marker or ordering invariants."""


LOG_FORMAT = 1

# column layout of a tick record (kept flat for compact JSON lines)
TICK_COLUMNS = (
    "t",
    *DOF_NAMES,
    "clip_arms",  # 0 closed / 1 open
    "grippers",  # 0 up / 1 down
    "clip",  # 0 attached / 1 released
    "windup",
    "distal_roll",
    "coupled_extension",
    "dither_active",
    "dither_mm",
    "ds_total_mm",  # physical device sheath extension: joint + coupling + dither
    *(f"cmd_{dof}" for dof in DOF_NAMES),
    "dither_requested",
    "mode",  # 0 for the manual path
)
_COL = {name: i for i, name in enumerate(TICK_COLUMNS)}

_ARMS = {"closed": 0, "open": 1}
_GRIP = {"up": 0, "down": 1}
_CLIP = {"attached": 0, "released": 1}
_ARMS_R = {v: k for k, v in _ARMS.items()}
_GRIP_R = {v: k for k, v in _GRIP.items()}
_CLIP_R = {v: k for k, v in _CLIP.items()}


@dataclass
class Script:
    """A command script: header plus an ordered entry list.

    Entry kinds: mark, mode, frame, action, wait, set, perturb.
    """

    header: dict
    entries: list[dict]

    @property
    def control(self) -> str:
        return self.header["control"]

    @property
    def target(self) -> str | None:
        return self.header.get("target")

    def validate(self) -> None:
        if self.control not in ("manual", "robotic"):
            raise ScriptError(f"unknown control path {self.control!r}")
        for e in self.entries:
            kind = e.get("kind")
            if kind not in ("mark", "mode", "frame", "action", "wait", "set", "perturb"):
                raise ScriptError(f"unknown entry kind {kind!r}")
            if kind == "frame" and self.control != "robotic":
                raise ScriptError("frame entries belong to the robotic path")
            if kind in ("action",) and self.control != "manual":
                raise ScriptError("action entries belong to the manual path")
            if kind == "mode" and self.control != "robotic":
                raise ScriptError("mode entries belong to the robotic path")

    def dumps(self) -> str:
        return json.dumps(
            {"header": self.header, "entries": self.entries}, sort_keys=True, indent=1
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Script":
        data = json.loads(Path(path).read_text())
        script = cls(header=data["header"], entries=data["entries"])
        script.validate()
        return script


class TrialLog:
    """Timestamped stream of ticks and events plus an identifying header."""

    def __init__(self, header: dict):
        self.header = header
        self.records: list[tuple[str, object]] = []  # emission order
        self.ticks: list[list] = []
        self.events: list[dict] = []

    @property
    def dt(self) -> float:
        return self.header["dt"]

    def append_tick(self, row: list) -> None:
        self.ticks.append(row)
        self.records.append(("tick", row))

    def append_event(self, event: dict) -> None:
        self.events.append(event)
        self.records.append(("event", event))

    def dumps(self) -> str:
        lines = [json.dumps({"header": self.header}, sort_keys=True, separators=(",", ":"))]
        for kind, payload in self.records:
            lines.append(json.dumps({kind: payload}, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TrialLog":
        lines = text.splitlines()
        if not lines:
            raise MalformedLogError("empty log")
        first = json.loads(lines[0])
        if "header" not in first:
            raise MalformedLogError("first line is not a header")
        log = cls(first["header"])
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "tick" in rec:
                log.append_tick(rec["tick"])
            elif "event" in rec:
                log.append_event(rec["event"])
            else:
                raise MalformedLogError(f"unknown record {line[:60]!r}")
        return log

    @classmethod
    def load(cls, path: str | Path) -> "TrialLog":
        return cls.loads(Path(path).read_text())

    # -- accessors ---------------------------------------------------------

    def column(self, name: str) -> np.ndarray:
        i = _COL[name]
        return np.array([row[i] for row in self.ticks], dtype=float)

    def times(self) -> np.ndarray:
        return self.column("t")

    def joint_state_at(self, i: int) -> JointState:
        row = self.ticks[i]
        js = JointState(*(row[_COL[dof]] for dof in DOF_NAMES))
        js.clip_arms = _ARMS_R[int(row[_COL["clip_arms"]])]
        js.grippers = _GRIP_R[int(row[_COL["grippers"]])]
        js.clip = _CLIP_R[int(row[_COL["clip"]])]
        return js

    def clip_pose_at(self, i: int, config: SessionConfig) -> Pose:
        row = self.ticks[i]
        js = self.joint_state_at(i)
        extension = row[_COL["coupled_extension"]] + row[_COL["dither_mm"]]
        return chain_fk(
            js, config.geometry, distal_roll_deg=row[_COL["distal_roll"]], ds_extension_mm=extension
        ).clip

    def find_events(self, kind: str, step: int | None = None) -> list[dict]:
        out = []
        for e in self.events:
            if e["kind"] != kind:
                continue
            if step is not None and e.get("step") != step:
                continue
            out.append(e)
        return out

    def event_tick(self, kind: str, step: int | None = None, occurrence: int = 0) -> int:
        """Index of the last tick recorded at or before the event."""
        matches = self.find_events(kind, step)
        if occurrence >= len(matches):
            raise MalformedLogError(f"no event {kind} (step={step}, occurrence={occurrence})")
        return min(matches[occurrence]["i"], len(self.ticks)) - 1


# -- runner ----------------------------------------------------------------


def _tick_row(
    t: float,
    js: JointState,
    dist: DisturbanceState,
    cmd: VelocityCommand,
    mode_id: int,
    config: SessionConfig,
) -> list:
    dither = dither_mm(dist, config.dither)
    return [
        t,
        js.ts_translation,
        js.ts_rotation,
        js.ts_bend,
        js.is_translation,
        js.is_bend_ml,
        js.is_bend_ap,
        js.ds_translation,
        js.ds_rotation_cmd,
        _ARMS[js.clip_arms],
        _GRIP[js.grippers],
        _CLIP[js.clip],
        dist.windup,
        dist.distal_roll,
        dist.coupled_extension,
        int(dist.dither_active),
        dither,
        js.ds_translation + dist.coupled_extension + dither,
        cmd.ts_translation,
        cmd.ts_rotation,
        cmd.ts_bend,
        cmd.is_translation,
        cmd.is_bend_ml,
        cmd.is_bend_ap,
        cmd.ds_translation,
        cmd.ds_rotation_cmd,
        int(cmd.dither_requested),
        mode_id,
    ]


def initial_joint_state(config: SessionConfig) -> JointState:
    ij = config.initial_joints
    return JointState(
        ts_translation=ij.ts_translation,
        ts_rotation=ij.ts_rotation,
        ts_bend=ij.ts_bend,
        is_translation=ij.is_translation,
        is_bend_ml=ij.is_bend_ml,
        is_bend_ap=ij.is_bend_ap,
        ds_translation=ij.ds_translation,
        ds_rotation_cmd=ij.ds_rotation_cmd,
    )


def run_trial(script: Script, config: SessionConfig) -> TrialLog:
    """Execute a command script tick by tick; returns the complete log.

    Robotic scripts move through control modes and are gated; an entry
    whose declared intent is gated by the active mode raises ScriptError.
    Manual scripts run ungated. Identical script + config always produce a
    byte-identical log.
    """
    script.validate()
    robotic = script.control == "robotic"
    dt = config.dt
    log = TrialLog(
        {
            "format": LOG_FORMAT,
            "kind": "teersim-trial-log",
            "name": script.header.get("name", "unnamed"),
            "control": script.control,
            "target": script.target,
            "seed": script.header.get("seed"),
            "dt": dt,
            "config_hash": config.hash(),
        }
    )

    js = initial_joint_state(config)
    dist = DisturbanceState()
    mode = MODES[1]
    n = 0  # tick counter
    in_correction = False

    def emit(kind: str, **data) -> None:
        log.append_event({"i": n, "t": n * dt, "kind": kind, **data})

    def run_ticks(n_ticks: int, cmd: VelocityCommand | None, action: ManualAction | None) -> None:
        nonlocal js, dist, n
        for _ in range(n_ticks):
            if robotic:
                js, dist = step_robotic(js, dist, cmd, dt, config)
                row_cmd = cmd
            else:
                js, dist = step_manual(js, dist, action, dt, config)
                lim = config.limits.for_dof(action.dof) if action.dof else 0.0
                rate = max(-lim, min(lim, action.rate)) if action.dof else 0.0
                row_cmd = (
                    VelocityCommand(**{action.dof: rate}) if action.dof else ZERO_COMMAND
                )
            n += 1
            log.append_tick(_tick_row(n * dt, js, dist, row_cmd, mode.id if robotic else 0, config))

    for entry in script.entries:
        kind = entry["kind"]
        if kind == "mark":
            step = entry.get("step")
            if entry["event"] == "step_start" and robotic and not in_correction:
                required = STEP_MODE[step]
                if mode.id != required:
                    raise ScriptError(
                        f"step {step} requires mode {required}, controller is in mode {mode.id}"
                    )
            if entry["event"] == "correction_start":
                in_correction = True
            elif entry["event"] == "correction_end":
                in_correction = False
            emit(entry["event"], **({"step": step} if step is not None else {}))
        elif kind == "mode":
            new_mode = set_mode(mode, entry["button"], config)
            if new_mode.id != mode.id:
                mode = new_mode
                emit("mode_change", mode=mode.id)
                # mode changes zero in-flight commands for one tick
                run_ticks(1, ZERO_COMMAND, None)
            else:
                emit("mode_change", mode=mode.id)
        elif kind == "frame":
            frame = frame_from_dict(entry["frame"])
            cmd = map_gamepad(frame, mode, config.limits, config.invert_ap)
            for dof in entry.get("intend", []):
                if dof not in mode.enabled_dofs:
                    raise ScriptError(f"script moves {dof} but mode {mode.id} gates it")
                if cmd.rate(dof) == 0.0:
                    raise ScriptError(f"script intends {dof} but the frame commands no rate")
            run_ticks(round(entry["duration"] / dt), cmd, None)
        elif kind == "action":
            action = ManualAction(
                dof=entry.get("dof"),
                rate=entry.get("rate", 0.0),
                hand_dither=entry.get("dither", False),
            )
            run_ticks(round(entry["duration"] / dt), None, action)
        elif kind == "wait":
            if robotic:
                run_ticks(round(entry["duration"] / dt), ZERO_COMMAND, None)
            else:
                run_ticks(round(entry["duration"] / dt), None, ManualAction())
        elif kind == "set":
            setattr(js, entry["field"], entry["value"])
            emit("set", field=entry["field"], value=entry["value"])
        elif kind == "perturb":
            dof = entry["dof"]
            lo, hi = joint_bounds(dof, config)
            setattr(js, dof, max(lo, min(hi, getattr(js, dof) + entry["amount"])))
            emit("perturb", dof=dof, amount=entry["amount"])

    return log


# -- timing decomposition ----------------------------------------------------


@dataclass(frozen=True)
class StepTimings:
    """Trial duration split into the reported step groups, seconds."""

    t_steps_2_3: float
    t_steps_4_6: float
    t_steps_3p_5p: float  # time inside correction intervals
    t_steps_7_8: float
    total: float


def _intervals(log: TrialLog) -> tuple[list[tuple[int, int, int]], list[tuple[int, int]]]:
    """(step, i0, i1) intervals and correction (i0, i1) intervals, in ticks."""
    steps: list[tuple[int, int, int]] = []
    corrections: list[tuple[int, int]] = []
    open_step: tuple[int, int] | None = None
    open_corr: int | None = None
    for e in log.events:
        kind = e["kind"]
        if kind == "step_start":
            if open_step is not None:
                raise MalformedLogError(f"step {e.get('step')} starts inside step {open_step[0]}")
            open_step = (e["step"], e["i"])
        elif kind == "step_end":
            if open_step is None or open_step[0] != e.get("step"):
                raise MalformedLogError(f"unmatched step_end for step {e.get('step')}")
            steps.append((open_step[0], open_step[1], e["i"]))
            open_step = None
        elif kind == "correction_start":
            if open_corr is not None:
                raise MalformedLogError("nested correction interval")
            open_corr = e["i"]
        elif kind == "correction_end":
            if open_corr is None:
                raise MalformedLogError("unmatched correction_end")
            corrections.append((open_corr, e["i"]))
            open_corr = None
    if open_step is not None:
        raise MalformedLogError(f"step {open_step[0]} never ends")
    if open_corr is not None:
        raise MalformedLogError("correction interval never ends")
    return steps, corrections


def _overlap(a0: int, a1: int, b0: int, b1: int) -> int:
    return max(0, min(a1, b1) - max(a0, b0))


GROUP_A = {2, 3}
GROUP_B = {4, 5, 6}
GROUP_C = {7, 8}


def extract_timings(log: TrialLog) -> StepTimings:
    """Group step durations the way the trial analysis reports them.

    Correction intervals (returning to earlier steps to undo inadvertent
    motion) are pulled out of their host steps into their own bucket. The
    groups partition the trial: no tick is counted twice and the group sum
    equals last step end minus first step start.
    """
    steps, corrections = _intervals(log)
    if not steps:
        raise MalformedLogError("log has no step markers")
    dt = log.dt

    sums = {"a": 0, "b": 0, "c": 0}
    for step, i0, i1 in steps:
        ticks = i1 - i0
        ticks -= sum(_overlap(i0, i1, c0, c1) for c0, c1 in corrections)
        if step in GROUP_A:
            sums["a"] += ticks
        elif step in GROUP_B:
            sums["b"] += ticks
        elif step in GROUP_C:
            sums["c"] += ticks
        elif step != 1:
            raise MalformedLogError(f"unknown step id {step}")
    corr_ticks = sum(c1 - c0 for c0, c1 in corrections)

    first = min(i0 for _, i0, _ in steps)
    last = max(i1 for _, _, i1 in steps)
    attributed = sums["a"] + sums["b"] + sums["c"] + corr_ticks
    if attributed != last - first:
        raise MalformedLogError(
            f"timing groups do not partition the trial: {attributed} vs {last - first} ticks"
        )
    return StepTimings(
        t_steps_2_3=sums["a"] * dt,
        t_steps_4_6=sums["b"] * dt,
        t_steps_3p_5p=corr_ticks * dt,
        t_steps_7_8=sums["c"] * dt,
        total=(last - first) * dt,
    )


# -- metrics -----------------------------------------------------------------


def coupled_extension_at_step_end(log: TrialLog, step: int = 2) -> float:
    """Inadvertent device-sheath extension accumulated by the end of a step, mm."""
    i = log.event_tick("step_end", step=step)
    return float(log.ticks[i][_COL["coupled_extension"]])


def residual_twist(log: TrialLog) -> float:
    """Uncommanded clip rotation across the advance/retract steps, deg.

    Measured exactly like the bench protocol: distal roll after the clip
    is oriented (end of step 4) versus after retraction (end of step 6).
    """
    i4 = log.event_tick("step_end", step=4)
    i6 = log.event_tick("step_end", step=6)
    return abs(float(log.ticks[i6][_COL["distal_roll"]]) - float(log.ticks[i4][_COL["distal_roll"]]))


def final_clip_pose(log: TrialLog, config: SessionConfig) -> Pose:
    if not log.ticks:
        raise MalformedLogError("log has no ticks")
    return log.clip_pose_at(len(log.ticks) - 1, config)


def final_placement(log: TrialLog, config: SessionConfig) -> PlacementScore:
    target = log.header.get("target")
    if target is None:
        raise MalformedLogError("log has no placement target")
    phantom = build_phantom(config.phantom)
    return score_placement(final_clip_pose(log, config), target, phantom)


def along_line_position(log: TrialLog, config: SessionConfig) -> float:
    """Signed arc-length coordinate of the final clip placement, mm."""
    phantom = build_phantom(config.phantom)
    return phantom.along_position(final_clip_pose(log, config).position)


def placement_spread(logs: Sequence[TrialLog], target: str, config: SessionConfig) -> float:
    """Span (max - min) of signed along-line placements over a trial set, mm."""
    if len(logs) < 2:
        raise ValueError("placement spread needs at least two logs")
    targets = {log.header.get("target") for log in logs}
    if targets != {target}:
        raise ValueError(f"logs target {sorted(t or '?' for t in targets)}, expected {target!r}")
    positions = [along_line_position(log, config) for log in logs]
    return max(positions) - min(positions)


def clip_tip_path(
    log: TrialLog, config: SessionConfig, i0: int = 0, i1: int | None = None, stride: int = 1
) -> np.ndarray:
    """World positions of the clip tip over a tick range."""
    i1 = len(log.ticks) if i1 is None else i1
    return np.array(
        [log.clip_pose_at(i, config).position for i in range(i0, i1, stride)]
    )


def step_swept_volume(log: TrialLog, config: SessionConfig, step: int = 3, stride: int = 2) -> float:
    """Convex-hull volume of the clip tip path during one step, mm^3."""
    i0 = log.event_tick("step_start", step=step) + 1
    i1 = log.event_tick("step_end", step=step) + 1
    return hull_volume(clip_tip_path(log, config, max(i0, 0), i1, stride))


# -- replay ------------------------------------------------------------------


def replay(
    log: TrialLog, speed: float = 1.0, sleep: Callable[[float], None] = _time.sleep
) -> Iterator[tuple[str, object]]:
    """Re-emit log records in order; speed scales wall-clock pacing.

    speed=0 yields everything immediately (batch analysis); speed=1 paces
    ticks at the recorded dt.
    """
    if speed < 0:
        raise ValueError("replay speed must be >= 0")
    dt = log.dt
    for kind, payload in log.records:
        yield kind, payload
        if kind == "tick" and speed > 0:
            sleep(dt / speed)
