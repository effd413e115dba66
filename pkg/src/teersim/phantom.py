"""Heart phantom geometry and clip-placement scoring.

The mitral annulus is an ellipse in a world-frame plane; the leaflet
coaptation line is a planar circular arc inside it, split into three
equal-parameter segments (lateral, middle, medial). Scoring projects the
clip pose onto the annulus plane and measures along-line / off-line /
axis-tilt / arm-roll errors against a segment target. Pure geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .config import PhantomConfig
from .kinematics import Pose

SEGMENTS = ("a1p1", "a2p2", "a3p3")
SEGMENT_MID_S = {"a1p1": 1.0 / 6.0, "a2p2": 0.5, "a3p3": 5.0 / 6.0}


@dataclass(frozen=True)
class ValvePhantom:
    center: np.ndarray  # annulus center, world mm
    axis: np.ndarray  # unit valve axis (atrium side positive)
    u_axis: np.ndarray  # unit in-plane axis along the coaptation chord
    v_axis: np.ndarray  # unit in-plane axis completing the frame
    semi_axis_u: float
    semi_axis_v: float
    chord: float
    sagitta: float
    atrium_radius: float

    @property
    def arc_radius(self) -> float:
        c, h = self.chord, self.sagitta
        return (c * c / 4.0 + h * h) / (2.0 * h)

    @property
    def arc_half_angle(self) -> float:
        return math.asin((self.chord / 2.0) / self.arc_radius)

    @property
    def arc_length(self) -> float:
        return 2.0 * self.arc_half_angle * self.arc_radius

    def to_plane(self, p: Sequence[float]) -> tuple[float, float, float]:
        """(u, v, height) coordinates of a world point in the annulus frame."""
        d = np.asarray(p, dtype=float) - self.center
        return float(d @ self.u_axis), float(d @ self.v_axis), float(d @ self.axis)

    def curve_point_uv(self, s: float) -> tuple[float, float]:
        """Coaptation arc point in plane coordinates; s in [0, 1]."""
        a = self.arc_half_angle
        r = self.arc_radius
        phi = (2.0 * s - 1.0) * a
        return r * math.sin(phi), r * math.cos(phi) + (self.sagitta - r)

    def curve_point(self, s: float) -> np.ndarray:
        u, v = self.curve_point_uv(s)
        return self.center + u * self.u_axis + v * self.v_axis

    def curve_tangent(self, s: float) -> np.ndarray:
        """Unit tangent of the arc at s, in world coordinates."""
        phi = (2.0 * s - 1.0) * self.arc_half_angle
        return math.cos(phi) * self.u_axis - math.sin(phi) * self.v_axis

    def nearest_s(self, p: Sequence[float]) -> float:
        """Arc parameter of the curve point nearest to the in-plane
        projection of a world point."""
        u, v, _ = self.to_plane(p)
        cv = self.sagitta - self.arc_radius  # arc circle center at (0, cv)
        phi = math.atan2(u, v - cv)
        a = self.arc_half_angle
        phi = max(-a, min(a, phi))
        return (phi / a + 1.0) / 2.0

    def along_position(self, p: Sequence[float]) -> float:
        """Signed arc length from the curve apex to the nearest curve point."""
        return (self.nearest_s(p) - 0.5) * self.arc_length

    def contains_atrium(self, p: Sequence[float]) -> bool:
        u, v, h = self.to_plane(p)
        if h < 0.0:
            return False
        return u * u + v * v + h * h <= self.atrium_radius**2


def build_phantom(cfg: PhantomConfig) -> ValvePhantom:
    axis = np.asarray(cfg.axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    u = np.asarray(cfg.u_axis, dtype=float)
    u = u - (u @ axis) * axis  # force in-plane
    u = u / np.linalg.norm(u)
    return ValvePhantom(
        center=np.asarray(cfg.center, dtype=float),
        axis=axis,
        u_axis=u,
        v_axis=np.cross(axis, u),
        semi_axis_u=cfg.semi_axis_u,
        semi_axis_v=cfg.semi_axis_v,
        chord=cfg.coaptation_chord,
        sagitta=cfg.coaptation_sagitta,
        atrium_radius=cfg.atrium_radius,
    )


@dataclass(frozen=True)
class PlacementScore:
    along_line_error: float  # mm, arc length from projection to target midpoint
    off_line_error: float  # mm, projection distance to the coaptation curve
    axis_tilt: float  # deg between clip axis and valve axis
    roll_error: float  # deg between arms and the local line perpendicular


def score_placement(clip: Pose, target: str, phantom: ValvePhantom) -> PlacementScore:
    """Placement quality of a clip pose against a leaflet-segment target.

    Arms span the clip frame's x axis; a perfect placement puts the tip at
    the segment midpoint, the clip z axis along the valve axis and the arms
    perpendicular to the local line of coaptation.
    """
    tip = np.asarray(clip.position, dtype=float)
    s_near = phantom.nearest_s(tip)
    s_mid = SEGMENT_MID_S[target]
    along = abs(s_near - s_mid) * phantom.arc_length

    u, v, _ = phantom.to_plane(tip)
    nu, nv = phantom.curve_point_uv(s_near)
    off = math.hypot(u - nu, v - nv)

    clip_axis = clip.z_axis()
    tilt = math.degrees(math.acos(min(1.0, abs(float(clip_axis @ phantom.axis)))))

    arms = clip.x_axis()
    arms_in_plane = arms - (arms @ phantom.axis) * phantom.axis
    norm = np.linalg.norm(arms_in_plane)
    if norm < 1e-12:
        roll_err = 90.0  # arms parallel to the valve axis: maximally wrong
    else:
        arms_in_plane /= norm
        tangent = phantom.curve_tangent(s_near)
        perp = np.cross(phantom.axis, tangent)  # in-plane normal to the line
        # arms are a line, not a vector: fold to [0, 90]
        roll_err = math.degrees(math.acos(min(1.0, abs(float(arms_in_plane @ perp)))))

    return PlacementScore(
        along_line_error=along, off_line_error=off, axis_tilt=tilt, roll_error=roll_err
    )


@dataclass(frozen=True)
class CollisionReport:
    swept_volume_proxy: float  # mm^3, convex hull of the tip path
    violation: bool


def hull_volume(points: Iterable[Sequence[float]]) -> float:
    """Convex hull volume of a point set; degenerate sets have volume 0."""
    pts = np.asarray(list(points), dtype=float)
    if len(pts) < 4:
        return 0.0
    if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9) < 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


def check_atrium_collision(
    clip_path: Sequence[Pose] | Sequence[Sequence[float]], phantom: ValvePhantom
) -> CollisionReport:
    """Swept-volume proxy and bounds check for a clip tip path.

    A path that wanders over more of the atrium hulls a larger volume -
    the collision-risk surrogate for comparing motion strategies.
    """
    if len(clip_path) == 0:
        raise ValueError("empty clip path")
    pts = [p.position if isinstance(p, Pose) else p for p in clip_path]
    violation = any(not phantom.contains_atrium(p) for p in pts)
    return CollisionReport(swept_volume_proxy=hull_volume(pts), violation=violation)
