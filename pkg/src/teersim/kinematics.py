"""Forward kinematics of three telescoping constant-curvature sheaths.

Model: each steerable sheath is a straight passive proximal segment
followed by a constant-curvature bend section. Curvature is set by the
commanded bend over the full bend-section length; only the exposed part
of the bend section (insertion clamped to the section length) contributes
arc, so a retracted sheath contributes nothing. The device sheath is
rigid and only translates/rolls.

All positions in mm, angles in degrees at the API boundary (radians
internally). Pure functions, no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SheathGeometry, SystemGeometry

# below this arc angle (rad) the closed form loses precision to cancellation
_SMALL_ANGLE = 1e-4


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position (mm) + unit quaternion (w, x, y, z)."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    def x_axis(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)[:, 0]

    def y_axis(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)[:, 1]

    def z_axis(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)[:, 2]


@dataclass
class JointState:
    """The 8 motorized joint values plus non-motorized discrete states."""

    ts_translation: float = 0.0  # mm
    ts_rotation: float = 0.0  # deg
    ts_bend: float = 0.0  # deg
    is_translation: float = 0.0  # mm
    is_bend_ml: float = 0.0  # deg
    is_bend_ap: float = 0.0  # deg
    ds_translation: float = 0.0  # mm
    ds_rotation_cmd: float = 0.0  # deg, proximal commanded roll
    clip_arms: str = "closed"  # closed | open
    grippers: str = "up"  # up | down
    clip: str = "attached"  # attached | released

    def copy(self) -> "JointState":
        return replace(self)

    def dof(self, name: str) -> float:
        return getattr(self, name)

    def continuous(self) -> tuple[float, ...]:
        return (
            self.ts_translation,
            self.ts_rotation,
            self.ts_bend,
            self.is_translation,
            self.is_bend_ml,
            self.is_bend_ap,
            self.ds_translation,
            self.ds_rotation_cmd,
        )


def quat_mul(a, b) -> tuple[float, float, float, float]:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_about_z(angle_rad: float) -> tuple[float, float, float, float]:
    h = 0.5 * angle_rad
    return (math.cos(h), 0.0, 0.0, math.sin(h))


def quat_about_y(angle_rad: float) -> tuple[float, float, float, float]:
    h = 0.5 * angle_rad
    return (math.cos(h), 0.0, math.sin(h), 0.0)


def quat_rotate(q, v) -> tuple[float, float, float]:
    # v' = q v q*
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 q_vec x v
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_normalize(q) -> tuple[float, float, float, float]:
    n = math.sqrt(sum(c * c for c in q))
    return tuple(c / n for c in q)  # type: ignore[return-value]


def compose(a: Pose, b: Pose) -> Pose:
    """Pose of frame b expressed through frame a (rigid composition)."""
    p = quat_rotate(a.orientation, b.position)
    return Pose(
        position=(a.position[0] + p[0], a.position[1] + p[1], a.position[2] + p[2]),
        orientation=quat_normalize(quat_mul(a.orientation, b.orientation)),
    )


def _arc_chord(theta: float, arc_len: float) -> tuple[float, float]:
    """In-plane (x, z) tip offset of an arc of given length subtending theta.

    Series-expanded below _SMALL_ANGLE to avoid cancellation in
    (1-cos)/kappa.
    """
    if arc_len == 0.0:
        return 0.0, 0.0
    if abs(theta) < _SMALL_ANGLE:
        # x = L(theta/2 - theta^3/24), z = L(1 - theta^2/6)
        return (
            arc_len * (theta / 2.0 - theta**3 / 24.0),
            arc_len * (1.0 - theta * theta / 6.0),
        )
    r = arc_len / theta
    return r * (1.0 - math.cos(theta)), r * math.sin(theta)


def _bend_segment(bend_deg: float, insertion_mm: float, geom: SheathGeometry) -> tuple[
    tuple[float, float, float], float
]:
    """Local (x,0,z) offset and bend angle (rad) of straight run + exposed arc."""
    insertion = max(insertion_mm, 0.0)
    lb = geom.bend_section_length
    straight = max(insertion - lb, 0.0)
    exposed = min(insertion, lb)
    theta = math.radians(bend_deg) * (exposed / lb) if lb > 0.0 else 0.0
    x, z = _arc_chord(theta, exposed)
    return (x, 0.0, straight + z), theta


def sheath_fk(bend_deg: float, roll_deg: float, insertion_mm: float, geom: SheathGeometry) -> Pose:
    """Tip pose of one sheath in its base frame.

    Straight proximal segment of max(insertion - bend_section_length, 0),
    then the exposed constant-curvature arc; rolling about the proximal
    axis swings the bend plane. The returned frame is the parallel-
    transported (untwisted) tip frame: nested sheaths slide freely, so a
    parent's axial roll swings its children but does not twist them, and a
    straight sheath's roll moves nothing.
    """
    (x, _, z), theta = _bend_segment(bend_deg, insertion_mm, geom)
    roll = math.radians(roll_deg)
    qz = quat_about_z(roll)
    pos = quat_rotate(qz, (x, 0.0, z))
    q = quat_mul(quat_mul(qz, quat_about_y(theta)), quat_about_z(-roll))
    return Pose(position=pos, orientation=quat_normalize(q))


def two_plane_fk(
    bend_ml_deg: float, bend_ap_deg: float, insertion_mm: float, geom: SheathGeometry
) -> Pose:
    """Tip pose of a sheath bending in two orthogonal planes.

    The bend plane direction comes from the two commanded bends; the frame
    is untwisted afterwards (the material frame does not roll).
    """
    total = math.hypot(bend_ml_deg, bend_ap_deg)
    phi = math.atan2(bend_ap_deg, bend_ml_deg) if total > 0.0 else 0.0
    (x, _, z), theta = _bend_segment(total, insertion_mm, geom)
    qz = quat_about_z(phi)
    pos = quat_rotate(qz, (x, 0.0, z))
    q = quat_mul(quat_mul(qz, quat_about_y(theta)), quat_about_z(-phi))
    return Pose(position=pos, orientation=quat_normalize(q))


def base_pose(geometry: SystemGeometry) -> Pose:
    """Femoral entry pose in the world frame (z-y-x Euler, deg)."""
    yaw, pitch, roll = (math.radians(a) for a in geometry.base_rpy)
    qz = quat_about_z(yaw)
    qy = quat_about_y(pitch)
    h = 0.5 * roll
    qx = (math.cos(h), math.sin(h), 0.0, 0.0)
    return Pose(
        position=tuple(geometry.base_position),
        orientation=quat_normalize(quat_mul(quat_mul(qz, qy), qx)),
    )


@dataclass(frozen=True)
class ChainPoses:
    ts_tip: Pose
    is_tip: Pose
    clip: Pose


def chain_fk(
    js: JointState,
    geometry: SystemGeometry,
    distal_roll_deg: float | None = None,
    ds_extension_mm: float = 0.0,
) -> ChainPoses:
    """Telescoping chain: each sheath's base is the previous sheath's tip.

    The clip rolls by the actual distal roll (stick-slip output), not the
    commanded proximal roll; ds_extension_mm adds inadvertent extension and
    dither offset to the device sheath insertion.
    """
    if distal_roll_deg is None:
        distal_roll_deg = js.ds_rotation_cmd
    base = base_pose(geometry)
    ts_tip = compose(base, sheath_fk(js.ts_bend, js.ts_rotation, js.ts_translation, geometry.transseptal))
    is_tip = compose(
        ts_tip, two_plane_fk(js.is_bend_ml, js.is_bend_ap, js.is_translation, geometry.intermediate)
    )
    ds_len = max(js.ds_translation + ds_extension_mm, 0.0)
    roll = math.radians(distal_roll_deg)
    clip = compose(is_tip, Pose(position=(0.0, 0.0, ds_len), orientation=quat_about_z(roll)))
    return ChainPoses(ts_tip=ts_tip, is_tip=is_tip, clip=clip)
