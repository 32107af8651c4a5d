"""Forward kinematics, Jacobians, motor mapping, taxel clouds."""

import numpy as np
import pytest

from dexretarget.hand_model import load_hand_model
from dexretarget.kinematics import (batch_keypoint_positions, forward_kinematics,
                                    jacobian, joint_to_motor, keypoint_position,
                                    motor_to_joint, taxel_point_cloud)

from conftest import RIGID_PAIR, TOY_3DOF


def random_q(model, rng):
    return rng.uniform(model.lower_limits, model.upper_limits)


# --- forward kinematics ------------------------------------------------------

def test_planar_straight_chain(planar):
    fk = forward_kinematics(planar, [0.0, 0.0])
    np.testing.assert_allclose(fk[(0, 2)], [2.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(fk[(0, 1)], [1.0, 0.0, 0.0], atol=1e-15)


def test_planar_rigid_rotation(planar):
    fk = forward_kinematics(planar, [np.pi / 2, 0.0])
    np.testing.assert_allclose(fk[(0, 2)], [0.0, 2.0, 0.0], atol=1e-15)


def test_reference_rest_pose_goldens(robot):
    # spot values composed by hand from the document's transforms:
    # thumb mount (0.005, 0.022, -0.006), local +x mapped to +y by the
    # mount rotation, segments 0.040 + 0.032 + 0.025 = 0.097 along +y;
    # index: mount x 0.033 + proximal 0.045; pinky: 0.028 + 0.038 +
    # 0.024 + 0.021 = 0.111 along +x at mount y -0.027.
    fk = forward_kinematics(robot, robot.rest_pose)
    np.testing.assert_allclose(fk[(0, 4)], [0.005, 0.119, -0.006], atol=1e-12)
    np.testing.assert_allclose(fk[(1, 2)], [0.078, 0.026, 0.0], atol=1e-12)
    np.testing.assert_allclose(fk[(4, 4)], [0.111, -0.027, 0.0], atol=1e-12)


def test_keypoint_position_matches_full_fk(robot):
    rng = np.random.default_rng(0)
    q = random_q(robot, rng)
    fk = forward_kinematics(robot, q)
    for frame in [(0, 0), (1, 3), (4, 4), (2, 1)]:
        np.testing.assert_array_equal(keypoint_position(robot, q, frame), fk[frame])


def test_chain_locality_bit_identical(robot):
    rng = np.random.default_rng(1)
    q = random_q(robot, rng)
    base = keypoint_position(robot, q, (1, 4))  # index tip
    for off_chain in [0, 1, 2, 3, 8, 9, 15, 19]:  # thumb, middle, ring, pinky joints
        q2 = q.copy()
        q2[off_chain] = np.clip(q2[off_chain] + 0.1, robot.lower_limits[off_chain],
                                robot.upper_limits[off_chain])
        moved = keypoint_position(robot, q2, (1, 4))
        assert moved.tobytes() == base.tobytes()


def test_same_link_keypoints_stay_rigid():
    m = load_hand_model(RIGID_PAIR)
    rng = np.random.default_rng(2)
    ref = None
    for _ in range(1000):
        fk = forward_kinematics(m, random_q(m, rng))
        d = np.linalg.norm(fk[(0, 1)] - fk[(0, 2)])
        ref = d if ref is None else ref
        assert abs(d - ref) < 1e-9


def test_fk_batch_matches_scalar(robot):
    rng = np.random.default_rng(3)
    sl = robot.finger_slice(2)
    qb = rng.uniform(robot.lower_limits[sl], robot.upper_limits[sl], size=(64, 4))
    pts = batch_keypoint_positions(robot, (2, 4), qb)
    for k in [0, 17, 63]:
        q = robot.rest_pose.copy()
        q[sl] = qb[k]
        np.testing.assert_allclose(pts[k], keypoint_position(robot, q, (2, 4)),
                                   atol=1e-12)


# --- Jacobians ---------------------------------------------------------------

def test_planar_jacobian_column_norms(planar):
    jac = jacobian(planar, [0.0, 0.0], (0, 2))
    lin = jac[:3]
    np.testing.assert_allclose(np.linalg.norm(lin, axis=0), [2.0, 1.0], atol=1e-15)


def test_jacobian_off_chain_columns_zero(robot):
    rng = np.random.default_rng(4)
    jac = jacobian(robot, random_q(robot, rng), (3, 4))  # ring tip
    sl = robot.finger_slice(3)
    mask = np.ones(robot.total_dof, dtype=bool)
    mask[sl] = False
    assert np.all(jac[:, mask] == 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_jacobian_matches_finite_differences(robot, planar, toy_3dof, seed):
    # 50 random (model, q, frame) triples across the parametrized seeds
    rng = np.random.default_rng(100 + seed)
    models = [robot, planar, toy_3dof]
    for _ in range(10):
        m = models[rng.integers(len(models))]
        q = random_q(m, rng) * 0.9
        ids = m.keypoint_ids()
        frame = ids[rng.integers(len(ids))]
        jac = jacobian(m, q, frame)[:3]
        h = 1e-6
        fd = np.zeros_like(jac)
        for k in range(m.total_dof):
            dq = np.zeros(m.total_dof)
            dq[k] = h
            fd[:, k] = (keypoint_position(m, q + dq, frame)
                        - keypoint_position(m, q - dq, frame)) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-5


# --- differential motor mapping ----------------------------------------------

def test_equal_motor_motion_is_pure_pitch():
    pitch, yaw = motor_to_joint(0.4, 0.4)
    assert pitch == pytest.approx(0.4, abs=0) and yaw == 0.0


def test_opposite_motor_motion_is_pure_yaw():
    pitch, yaw = motor_to_joint(0.3, -0.3)
    assert pitch == 0.0 and yaw == pytest.approx(0.3, abs=0)


def test_motor_joint_round_trip():
    rng = np.random.default_rng(5)
    t1, t2 = rng.uniform(-1.0, 1.0, (2, 100))
    pitch, yaw = motor_to_joint(t1, t2)
    b1, b2 = joint_to_motor(pitch, yaw)
    np.testing.assert_allclose(b1, t1, atol=1e-12)
    np.testing.assert_allclose(b2, t2, atol=1e-12)


def test_differential_invariances_exact():
    # dyadic angles make the +/- delta sums exact, so invariance is bitwise
    rng = np.random.default_rng(6)
    t1 = rng.integers(-1024, 1024, 50) / 1024.0
    t2 = rng.integers(-1024, 1024, 50) / 1024.0
    delta = 0.25
    _, yaw0 = motor_to_joint(t1, t2)
    _, yaw1 = motor_to_joint(t1 + delta, t2 + delta)
    assert np.array_equal(yaw0, yaw1)
    pitch0, _ = motor_to_joint(t1, t2)
    pitch1, _ = motor_to_joint(t1 + delta, t2 - delta)
    assert np.array_equal(pitch0, pitch1)


def test_motor_sign_flips_yaw():
    _, yaw = motor_to_joint(0.3, -0.3, sign=-1.0)
    assert yaw == pytest.approx(-0.3, abs=0)


# --- taxel point clouds --------------------------------------------------------

ONE_TAXEL = TOY_3DOF + """
taxel_layouts:
  - {finger: arm, rows: 1, cols: 1, origin: [0.0, 0.0, 0.0], row_step: [0.001, 0.0, 0.0], col_step: [0.0, 0.001, 0.0]}
"""


def test_single_taxel_at_distal_origin():
    m = load_hand_model(ONE_TAXEL)
    q = [0.3, -0.2, 0.5]
    cloud = taxel_point_cloud(m, q, {0: np.array([[1.0]])})
    # layout origin coincides with the distal joint frame origin, which is
    # where the chain ends before the tip offset: reuse FK via a zero-offset
    # probe at full depth
    probe = forward_kinematics(m, q)[(0, 1)]
    tip_offset = np.array([0.0, 1.0, 1.0])
    # remove the tip offset rotated into world: |probe - taxel| == |offset|
    assert np.linalg.norm(cloud.positions[0] - probe) == pytest.approx(
        np.linalg.norm(tip_offset), abs=1e-12)


def test_cloud_threshold_semantics(robot):
    rng = np.random.default_rng(7)
    q = random_q(robot, rng)
    zero = {i: np.zeros((12, 8)) for i in range(5)}
    assert len(taxel_point_cloud(robot, q, zero, threshold=0.0)) == 0
    assert len(taxel_point_cloud(robot, q, zero, threshold=None)) == 480
    one = {i: np.zeros((12, 8)) for i in range(5)}
    one[2][4, 6] = 2.5
    cloud = taxel_point_cloud(robot, q, one, threshold=0.0)
    assert len(cloud) == 1
    assert cloud.finger_index[0] == 2 and cloud.rows[0] == 4 and cloud.cols[0] == 6
    assert cloud.pressures[0] == 2.5


def test_cloud_is_rigid_isometry_of_layout(robot):
    rng = np.random.default_rng(8)
    q = random_q(robot, rng)
    full = {i: np.ones((12, 8)) for i in range(5)}
    cloud = taxel_point_cloud(robot, q, full)
    for i, f in enumerate(robot.fingers):
        world = cloud.positions[cloud.finger_index == i]
        local = f.taxels.positions
        for a, b in [(0, 95), (0, 7), (11, 40), (3, 88)]:
            dw = np.linalg.norm(world[a] - world[b])
            dl = np.linalg.norm(local[a] - local[b])
            assert abs(dw - dl) < 1e-9


def test_cloud_validates_reading_keys(robot):
    q = robot.rest_pose
    with pytest.raises(ValueError, match="missing"):
        taxel_point_cloud(robot, q, {i: np.zeros((12, 8)) for i in range(4)})
    bad = {i: np.zeros((12, 8)) for i in range(5)}
    bad[1] = np.zeros((8, 12))
    with pytest.raises(ValueError, match="shape"):
        taxel_point_cloud(robot, q, bad)
