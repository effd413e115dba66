import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from teersim.config import SheathGeometry, SystemGeometry
from teersim.kinematics import (
    JointState,
    Pose,
    chain_fk,
    compose,
    quat_to_matrix,
    sheath_fk,
    two_plane_fk,
)

GEOM = SheathGeometry(bend_section_length=100.0, outer_radius=8.0, max_stroke=200.0, max_bend=180.0)


def arc_tip_by_quadrature(bend_deg, insertion, lb):
    """Independent oracle: integrate the unit tangent of the centerline.

    The centerline is straight for s < insertion - lb, then bends with
    constant curvature kappa = bend/lb over the exposed arc length.
    """
    straight = max(insertion - lb, 0.0)
    exposed = min(insertion, lb)
    kappa = math.radians(bend_deg) / lb
    x, _ = quad(lambda u: math.sin(kappa * u), 0.0, exposed, limit=200, epsabs=1e-12, epsrel=1e-12)
    z, _ = quad(lambda u: math.cos(kappa * u), 0.0, exposed, limit=200, epsabs=1e-12, epsrel=1e-12)
    return x, straight + z


def test_zero_bend_is_straight_line():
    pose = sheath_fk(0.0, 0.0, 100.0, GEOM)
    assert np.allclose(pose.position, (0.0, 0.0, 100.0), atol=1e-9)
    assert np.allclose(pose.orientation, (1.0, 0.0, 0.0, 0.0), atol=1e-12)


def test_quarter_circle_analytic():
    # full bend section exposed: radius = 2*lb/pi for a 90 degree arc
    pose = sheath_fk(90.0, 0.0, 100.0, GEOM)
    r = 200.0 / math.pi
    assert abs(pose.position[0] - r) < 1e-9
    assert abs(pose.position[1]) < 1e-12
    assert abs(pose.position[2] - r) < 1e-9


def test_quarter_circle_against_dense_integration():
    # trapezoid integration of the tangent with 1e6 segments
    kappa = (math.pi / 2) / 100.0
    s = np.linspace(0.0, 100.0, 1_000_001)
    x = np.trapezoid(np.sin(kappa * s), s)
    z = np.trapezoid(np.cos(kappa * s), s)
    pose = sheath_fk(90.0, 0.0, 100.0, GEOM)
    assert abs(pose.position[0] - x) < 1e-6
    assert abs(pose.position[2] - z) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_random_samples_against_quadrature(seed):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        bend = rng.uniform(-175.0, 175.0)
        insertion = rng.uniform(0.0, 200.0)
        x_ref, z_ref = arc_tip_by_quadrature(bend, insertion, GEOM.bend_section_length)
        pose = sheath_fk(bend, 0.0, insertion, GEOM)
        assert abs(pose.position[0] - x_ref) < 1e-6
        assert abs(pose.position[2] - z_ref) < 1e-6


def test_roll_mirrors_bend_plane():
    a = sheath_fk(35.0, 0.0, 120.0, GEOM)
    b = sheath_fk(35.0, 180.0, 120.0, GEOM)
    assert abs(a.position[0] + b.position[0]) < 1e-9
    assert abs(a.position[1] - b.position[1]) < 1e-9
    assert abs(a.position[2] - b.position[2]) < 1e-9


def test_roll_leaves_straight_tip_invariant():
    # axisymmetry: rolling an unbent sheath moves nothing
    for roll in (0.0, 37.0, 90.0, 181.0, -45.0):
        pose = sheath_fk(0.0, roll, 140.0, GEOM)
        assert np.allclose(pose.position, (0.0, 0.0, 140.0), atol=1e-9)


def test_small_bend_matches_straight_limit():
    # convergence to the straight pose is first order in the bend angle,
    # and the series evaluation stays accurate against quadrature
    straight = sheath_fk(0.0, 0.0, 100.0, GEOM)
    tiny = sheath_fk(1e-6, 0.0, 100.0, GEOM)
    err = np.linalg.norm(np.subtract(straight.position, tiny.position))
    assert err <= 100.0 * math.radians(1e-6) / 2 * (1 + 1e-9)
    assert err / 100.0 < 1e-8
    x_ref, z_ref = arc_tip_by_quadrature(1e-6, 100.0, 100.0)
    assert abs(tiny.position[0] - x_ref) / 100.0 < 1e-9
    assert abs(tiny.position[2] - z_ref) / 100.0 < 1e-9


def test_series_region_is_continuous():
    # positions straddling the series/closed-form switch agree
    lb = GEOM.bend_section_length
    for bend in (math.degrees(9e-5), math.degrees(1.1e-4)):
        x_ref, z_ref = arc_tip_by_quadrature(bend, lb, lb)
        pose = sheath_fk(bend, 0.0, lb, GEOM)
        assert abs(pose.position[0] - x_ref) < 1e-9
        assert abs(pose.position[2] - z_ref) < 1e-9


def test_partial_exposure_scales_bend():
    # half-inserted sheath realizes half the commanded bend
    pose = sheath_fk(90.0, 0.0, 50.0, GEOM)
    kappa = (math.pi / 2) / 100.0
    r = 1.0 / kappa
    theta = kappa * 50.0
    assert abs(pose.position[0] - r * (1 - math.cos(theta))) < 1e-9
    assert abs(pose.position[2] - r * math.sin(theta)) < 1e-9


def test_retracted_sheath_contributes_nothing():
    pose = sheath_fk(90.0, 45.0, 0.0, GEOM)
    assert np.allclose(pose.position, (0.0, 0.0, 0.0), atol=1e-12)
    assert np.allclose(quat_to_matrix(pose.orientation), np.eye(3), atol=1e-12)


# -- chain ---------------------------------------------------------------


def default_geometry():
    return SystemGeometry()


def matrix_chain_oracle(js: JointState, geometry: SystemGeometry, distal_roll=None, ds_ext=0.0):
    """Compose the chain with explicit 4x4 matrices."""

    def seg_matrix(pose: Pose):
        return pose.matrix()

    base = Pose(position=tuple(geometry.base_position))
    m = seg_matrix(base)
    m = m @ seg_matrix(sheath_fk(js.ts_bend, js.ts_rotation, js.ts_translation, geometry.transseptal))
    m = m @ seg_matrix(
        two_plane_fk(js.is_bend_ml, js.is_bend_ap, js.is_translation, geometry.intermediate)
    )
    roll = js.ds_rotation_cmd if distal_roll is None else distal_roll
    c, s = math.cos(math.radians(roll)), math.sin(math.radians(roll))
    ds = np.array(
        [[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, max(js.ds_translation + ds_ext, 0.0)], [0, 0, 0, 1]]
    )
    return m @ ds


joint_states = st.builds(
    JointState,
    ts_translation=st.floats(0, 150),
    ts_rotation=st.floats(-180, 180),
    ts_bend=st.floats(-170, 170),
    is_translation=st.floats(0, 150),
    is_bend_ml=st.floats(-110, 110),
    is_bend_ap=st.floats(-110, 110),
    ds_translation=st.floats(0, 150),
    ds_rotation_cmd=st.floats(-180, 180),
)


@settings(max_examples=150, deadline=None)
@given(js=joint_states)
def test_chain_matches_matrix_composition(js):
    geometry = default_geometry()
    poses = chain_fk(js, geometry)
    ref = matrix_chain_oracle(js, geometry)
    assert np.allclose(poses.clip.position, ref[:3, 3], atol=1e-9)
    assert np.allclose(quat_to_matrix(poses.clip.orientation), ref[:3, :3], atol=1e-9)


def test_all_zero_chain_sits_at_base():
    js = JointState()
    poses = chain_fk(js, default_geometry())
    assert np.allclose(poses.clip.position, (0.0, 0.0, 0.0), atol=1e-12)


def test_device_advance_moves_along_intermediate_axis():
    geometry = default_geometry()
    js = JointState(
        ts_translation=100.0, ts_bend=40.0, is_translation=50.0, is_bend_ml=30.0, ds_translation=20.0
    )
    before = chain_fk(js, geometry)
    js2 = js.copy()
    js2.ds_translation += 5.0
    after = chain_fk(js2, geometry)
    delta = np.subtract(after.clip.position, before.clip.position)
    axis = before.is_tip.z_axis()
    assert abs(np.linalg.norm(delta) - 5.0) < 1e-9
    assert np.allclose(delta, 5.0 * axis, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(js=joint_states)
def test_chain_is_continuous(js):
    geometry = default_geometry()
    base = np.array(chain_fk(js, geometry).clip.position)
    js2 = js.copy()
    for dof in ("ts_bend", "is_bend_ml", "ds_translation"):
        setattr(js2, dof, getattr(js2, dof) + 1e-6)
    moved = np.array(chain_fk(js2, geometry).clip.position)
    assert np.linalg.norm(moved - base) < 1e-3


def test_telescoping_degeneracy():
    # a fully retracted intermediate sheath drops out of the chain
    geometry = default_geometry()
    js = JointState(
        ts_translation=120.0,
        ts_rotation=25.0,
        ts_bend=50.0,
        is_translation=0.0,
        is_bend_ml=60.0,  # commanded but unexposed
        is_bend_ap=-30.0,
        ds_translation=30.0,
        ds_rotation_cmd=10.0,
    )
    full = chain_fk(js, geometry)
    two_sheath = compose(
        full.ts_tip,
        Pose(
            position=(0.0, 0.0, js.ds_translation),
            orientation=(
                math.cos(math.radians(js.ds_rotation_cmd) / 2),
                0.0,
                0.0,
                math.sin(math.radians(js.ds_rotation_cmd) / 2),
            ),
        ),
    )
    assert np.allclose(full.clip.position, two_sheath.position, atol=1e-9)
    assert np.allclose(full.is_tip.position, full.ts_tip.position, atol=1e-12)


def test_distal_roll_overrides_commanded_roll():
    geometry = default_geometry()
    js = JointState(ts_translation=100.0, ts_bend=30.0, is_translation=40.0, ds_translation=20.0)
    js.ds_rotation_cmd = 90.0
    a = chain_fk(js, geometry, distal_roll_deg=0.0)
    b = chain_fk(js, geometry)  # uses commanded roll
    assert np.allclose(a.clip.position, b.clip.position, atol=1e-12)
    assert not np.allclose(
        quat_to_matrix(a.clip.orientation), quat_to_matrix(b.clip.orientation), atol=1e-6
    )


def test_pose_quaternion_stays_unit():
    geometry = default_geometry()
    js = JointState(ts_translation=90, ts_rotation=123, ts_bend=77, is_translation=60, is_bend_ml=45)
    pose = chain_fk(js, geometry).clip
    assert abs(np.linalg.norm(pose.orientation) - 1.0) < 1e-9
