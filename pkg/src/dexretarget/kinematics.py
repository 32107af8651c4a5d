"""Forward kinematics, Jacobians, motor couplings, and taxel point clouds.

All poses are expressed in the hand base frame, meters and radians.  A
finger chain applies, per joint k: the fixed parent offset (translation,
then rotation), then the revolute rotation about the joint axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hand_model import HandModel


@dataclass
class JointConfig:
    """A joint vector with an optional capture timestamp (seconds)."""

    q: np.ndarray
    timestamp: float | None = None


def _coerce_q(model, q):
    if isinstance(q, JointConfig):
        q = q.q
    q = np.asarray(q, dtype=float)
    if q.shape != (model.total_dof,):
        raise ValueError(f"q has shape {q.shape}, model {model.name!r} expects ({model.total_dof},)")
    return q


def _axis_rotation(axis, angle):
    """Rodrigues rotation about a unit axis."""
    kx, ky, kz = axis
    k = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


class _ChainState:
    """World pose of every link of one finger plus joint axes/origins."""

    __slots__ = ("rots", "trans", "axes", "origins")

    def __init__(self, finger, q_f):
        rots = [np.eye(3)]
        trans = [np.zeros(3)]
        axes = []
        origins = []
        r, t = rots[0], trans[0]
        for joint, angle in zip(finger.joints, q_f):
            t = t + r @ joint.origin_translation
            r = r @ joint.origin_rotation
            axes.append(r @ joint.axis)
            origins.append(t)
            r = r @ _axis_rotation(joint.axis, angle)
            rots.append(r)
            trans.append(t)
        self.rots = rots
        self.trans = trans
        self.axes = axes
        self.origins = origins

    def point(self, link, offset):
        return self.trans[link] + self.rots[link] @ offset


def _chain_state(model, finger_index, q):
    f = model.fingers[finger_index]
    return _ChainState(f, q[model.finger_slice(finger_index)])


def keypoint_position(model, q, frame):
    """Position of keypoint frame ``(i, j)`` at configuration q."""
    q = _coerce_q(model, q)
    i, j = frame
    kp = model.keypoint(i, j)
    return _chain_state(model, i, q).point(kp.link, kp.offset)


def forward_kinematics(model, q):
    """All keypoint positions at configuration q.

    Returns:
        dict mapping (finger, keypoint) index pairs to 3-vectors in the
        hand base frame.
    """
    q = _coerce_q(model, q)
    out = {}
    for i, f in enumerate(model.fingers):
        state = _ChainState(f, q[model.finger_slice(i)])
        for kp in f.keypoints:
            out[(i, kp.index)] = state.point(kp.link, kp.offset)
    return out


def jacobian(model, q, frame):
    """Geometric Jacobian of one keypoint frame.

    Args:
        model: hand model.
        q: joint vector (or JointConfig) of length model.total_dof.
        frame: (finger, keypoint) index pair.

    Returns:
        (6, n) array; rows 0:3 map joint rates to linear velocity (m/s per
        rad/s), rows 3:6 to angular velocity (rad/s per rad/s).  Columns of
        joints not on the frame's chain are zero.
    """
    q = _coerce_q(model, q)
    i, j = frame
    kp = model.keypoint(i, j)
    state = _chain_state(model, i, q)
    p = state.point(kp.link, kp.offset)
    jac = np.zeros((6, model.total_dof))
    base = model.fingers[i].dof_offset
    for k in range(kp.link):
        a = state.axes[k]
        jac[:3, base + k] = np.cross(a, p - state.origins[k])
        jac[3:, base + k] = a
    return jac


def linear_jacobian_block(state, finger, kp):
    """(3, finger.dof) linear-velocity block for a frame on an evaluated chain."""
    p = state.point(kp.link, kp.offset)
    block = np.zeros((3, finger.dof))
    for k in range(kp.link):
        block[:, k] = np.cross(state.axes[k], p - state.origins[k])
    return block, p


def motor_to_joint(theta1, theta2, sign=1.0):
    """Map differential motor angles to (pitch, yaw) joint angles.

    Equal motor motion flexes (pure pitch), opposite motion abducts (pure
    yaw): pitch = (theta1 + theta2) / 2, yaw = sign * (theta1 - theta2) / 2.
    Accepts scalars or arrays.
    """
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    pitch = 0.5 * (theta1 + theta2)
    yaw = sign * 0.5 * (theta1 - theta2)
    return pitch, yaw


def joint_to_motor(pitch, yaw, sign=1.0):
    """Exact inverse of :func:`motor_to_joint`."""
    pitch = np.asarray(pitch, dtype=float)
    yaw = np.asarray(yaw, dtype=float)
    theta1 = pitch + sign * yaw
    theta2 = pitch - sign * yaw
    return theta1, theta2


@dataclass(frozen=True)
class TouchPointCloud:
    """Taxel readings mapped into the hand base frame.

    ``positions[k]`` is taxel k's world position; ``pressures``,
    ``finger_index``, ``rows`` and ``cols`` are aligned with it.
    """

    positions: np.ndarray     # (N, 3)
    pressures: np.ndarray     # (N,)
    finger_index: np.ndarray  # (N,) int
    rows: np.ndarray          # (N,) int
    cols: np.ndarray          # (N,) int

    def __len__(self):
        return self.positions.shape[0]


def taxel_point_cloud(model, q, readings, threshold=None):
    """Build the touch point cloud for one configuration and pressure set.

    Args:
        model: hand model with taxel layouts.
        q: joint vector.
        readings: dict mapping finger index to a (rows, cols) pressure
            array matching that finger's taxel layout.
        threshold: if None, keep every taxel; otherwise keep only taxels
            with reading strictly greater than this value.

    Returns:
        TouchPointCloud in the hand base frame, taxels ordered by finger,
        then row-major within each grid.
    """
    q = _coerce_q(model, q)
    with_taxels = [i for i, f in enumerate(model.fingers) if f.taxels is not None]
    missing = set(with_taxels) - set(readings)
    extra = set(readings) - set(with_taxels)
    if missing or extra:
        raise ValueError(f"readings keys must match taxel-bearing fingers {with_taxels}, "
                         f"missing {sorted(missing)}, unexpected {sorted(extra)}")
    positions, pressures, fidx, rows, cols = [], [], [], [], []
    for i in with_taxels:
        f = model.fingers[i]
        layout = f.taxels
        grid = np.asarray(readings[i], dtype=float)
        if grid.shape != (layout.rows, layout.cols):
            raise ValueError(f"finger {i} readings have shape {grid.shape}, "
                             f"layout is {(layout.rows, layout.cols)}")
        state = _chain_state(model, i, q)
        link = len(f.joints)  # taxels ride the distal link
        world = state.trans[link] + layout.positions @ state.rots[link].T
        flat = grid.reshape(-1)
        keep = np.ones(flat.shape, dtype=bool) if threshold is None else flat > threshold
        r_idx, c_idx = np.divmod(np.arange(flat.size), layout.cols)
        positions.append(world[keep])
        pressures.append(flat[keep])
        fidx.append(np.full(int(keep.sum()), i, dtype=int))
        rows.append(r_idx[keep])
        cols.append(c_idx[keep])
    return TouchPointCloud(
        positions=np.concatenate(positions) if positions else np.zeros((0, 3)),
        pressures=np.concatenate(pressures) if pressures else np.zeros(0),
        finger_index=np.concatenate(fidx) if fidx else np.zeros(0, dtype=int),
        rows=np.concatenate(rows) if rows else np.zeros(0, dtype=int),
        cols=np.concatenate(cols) if cols else np.zeros(0, dtype=int),
    )


def batch_keypoint_positions(model, frame, q_batch):
    """Positions of one keypoint frame for a batch of per-finger joint vectors.

    Args:
        model: hand model.
        frame: (finger, keypoint) pair.
        q_batch: (B, finger.dof) joint angles for that finger's chain only.

    Returns:
        (B, 3) positions in the hand base frame.
    """
    i, j = frame
    f = model.fingers[i]
    kp = model.keypoint(i, j)
    q_batch = np.asarray(q_batch, dtype=float)
    if q_batch.ndim != 2 or q_batch.shape[1] != f.dof:
        raise ValueError(f"q_batch must be (B, {f.dof}), got {q_batch.shape}")
    b = q_batch.shape[0]
    r = np.broadcast_to(np.eye(3), (b, 3, 3)).copy()
    t = np.zeros((b, 3))
    eye = np.eye(3)
    for k in range(kp.link):
        joint = f.joints[k]
        t = t + np.einsum("bij,j->bi", r, joint.origin_translation)
        r = r @ joint.origin_rotation
        kx, ky, kz = joint.axis
        skew = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
        ang = q_batch[:, k]
        rj = (eye + np.sin(ang)[:, None, None] * skew
              + (1.0 - np.cos(ang))[:, None, None] * (skew @ skew))
        r = r @ rj
    return t + np.einsum("bij,j->bi", r, kp.offset)
