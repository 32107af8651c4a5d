"""Kinematic hand models loaded from YAML documents.

A model document describes serial finger chains rooted at the hand base,
the keypoint frames attached to their links, and optional fingertip taxel
grids.  Loaded models are immutable: all arrays are frozen and the
dataclasses carry no setters.  Units are meters and radians throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

AXIS_UNIT_TOL = 1e-9

BASE_LINK = "base"


class ModelError(Exception):
    """A hand model document failed to parse or validate."""


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _vec3(value, where):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelError(f"{where}: expected a 3-vector, got {value!r}") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ModelError(f"{where}: expected a finite 3-vector, got {value!r}")
    return v


def rpy_matrix(roll, pitch, yaw):
    """Rotation matrix from fixed-axis roll/pitch/yaw angles (x, then y, then z)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class Joint:
    """One revolute joint: fixed parent offset, then rotation about ``axis``."""

    name: str
    axis: np.ndarray                # unit 3-vector, parent link frame
    origin_translation: np.ndarray  # parent link frame, meters
    origin_rotation: np.ndarray     # 3x3, applied after the translation
    lower: float
    upper: float
    parent: str                     # link name this joint hangs off
    child: str                      # link name this joint drives


@dataclass(frozen=True)
class Keypoint:
    """A named frame on one link, identified by its per-finger index j."""

    index: int
    name: str
    link: int          # number of chain joints preceding the frame; 0 = palm
    offset: np.ndarray


@dataclass(frozen=True)
class TaxelLayout:
    """Fingertip pressure-cell grid expressed in the distal link frame."""

    rows: int
    cols: int
    positions: np.ndarray  # (rows * cols, 3), row-major over (row, col)


@dataclass(frozen=True)
class Finger:
    name: str
    joints: tuple[Joint, ...]
    keypoints: tuple[Keypoint, ...]
    taxels: TaxelLayout | None
    dof_offset: int  # index of this finger's first joint in the global q vector

    @property
    def dof(self):
        return len(self.joints)

    @property
    def tip_index(self):
        return self.keypoints[-1].index


@dataclass(frozen=True)
class HandModel:
    """Immutable hand description: fingers, keypoint frames, taxel grids.

    ``fingers[0]`` is the thumb by convention for multi-finger hands; the
    global joint vector q concatenates per-finger joints in declaration
    order.
    """

    name: str
    fingers: tuple[Finger, ...]
    total_dof: int
    rest_pose: np.ndarray

    @property
    def lower_limits(self):
        return self._limits[0]

    @property
    def upper_limits(self):
        return self._limits[1]

    @property
    def _limits(self):
        lo = _freeze([j.lower for f in self.fingers for j in f.joints])
        hi = _freeze([j.upper for f in self.fingers for j in f.joints])
        return lo, hi

    def finger_slice(self, i):
        """Slice of the global q vector owned by finger ``i``."""
        f = self.fingers[i]
        return slice(f.dof_offset, f.dof_offset + f.dof)

    def keypoint(self, i, j):
        for kp in self.fingers[i].keypoints:
            if kp.index == j:
                return kp
        raise KeyError(f"no keypoint ({i}, {j}) in model {self.name!r}")

    def keypoint_ids(self):
        """All (finger, keypoint) index pairs, finger-major."""
        return [(i, kp.index) for i, f in enumerate(self.fingers) for kp in f.keypoints]

    def keypoint_counts(self):
        """Number of keypoints per finger (n_i + 1, counting the j = 0 root)."""
        return tuple(len(f.keypoints) for f in self.fingers)


def _build_joint(raw, finger_name, prev_child, where):
    if not isinstance(raw, dict):
        raise ModelError(f"{where}: joint entry must be a mapping")
    try:
        name = str(raw["name"])
        axis = _vec3(raw["axis"], f"{where}.axis")
        trans = _vec3(raw["origin_translation"], f"{where}.origin_translation")
        limits = raw["limits"]
    except KeyError as e:
        raise ModelError(f"{where}: missing required field {e.args[0]!r}") from None
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > AXIS_UNIT_TOL:
        raise ModelError(f"{where}.axis: |axis| = {norm:.12g}, must be 1 within {AXIS_UNIT_TOL}")
    rpy = raw.get("origin_rotation", [0.0, 0.0, 0.0])
    rot = rpy_matrix(*_vec3(rpy, f"{where}.origin_rotation"))
    try:
        lower, upper = float(limits[0]), float(limits[1])
    except (TypeError, ValueError, IndexError):
        raise ModelError(f"{where}.limits: expected [lower, upper], got {limits!r}") from None
    if not (math.isfinite(lower) and math.isfinite(upper) and lower < upper):
        raise ModelError(f"{where}.limits: lower must be < upper, got [{lower}, {upper}]")
    parent = str(raw.get("parent", prev_child))
    child = str(raw.get("child", name))
    return Joint(name, _freeze(axis), _freeze(trans), _freeze(rot), lower, upper, parent, child)


def _order_chain(joints, finger_name):
    """Order joints base-to-tip following parent links; reject anything non-serial."""
    links = {BASE_LINK} | {j.child for j in joints}
    for j in joints:
        if j.parent not in links:
            raise ModelError(
                f"finger {finger_name!r}: joint {j.name!r} references unknown parent link {j.parent!r}")
    by_parent: dict[str, list[Joint]] = {}
    for j in joints:
        by_parent.setdefault(j.parent, []).append(j)
    for parent, js in by_parent.items():
        if len(js) > 1:
            names = ", ".join(x.name for x in js)
            raise ModelError(f"finger {finger_name!r}: link {parent!r} has multiple child joints ({names})")
    chain = []
    cursor = BASE_LINK
    while cursor in by_parent:
        j = by_parent.pop(cursor)[0]
        chain.append(j)
        cursor = j.child
    if by_parent:
        left = ", ".join(js[0].name for js in by_parent.values())
        raise ModelError(f"finger {finger_name!r}: joints not reachable from base (cycle or disconnected): {left}")
    return chain


def _build_keypoints(raw_list, chain, finger_name):
    depth_of = {BASE_LINK: 0}
    for pos, j in enumerate(chain):
        depth_of[j.name] = pos + 1
        depth_of.setdefault(j.child, pos + 1)
    kps = []
    for n, raw in enumerate(raw_list):
        where = f"fingers[{finger_name}].keypoints[{n}]"
        if not isinstance(raw, dict):
            raise ModelError(f"{where}: keypoint entry must be a mapping")
        try:
            index = int(raw["index"])
            attached = str(raw["attached_to"])
        except KeyError as e:
            raise ModelError(f"{where}: missing required field {e.args[0]!r}") from None
        if attached not in depth_of:
            raise ModelError(f"{where}: attached_to {attached!r} names no joint or 'base'")
        offset = _vec3(raw.get("offset", [0.0, 0.0, 0.0]), f"{where}.offset")
        kps.append(Keypoint(index, str(raw.get("name", f"{finger_name}_{index}")),
                            depth_of[attached], _freeze(offset)))
    kps.sort(key=lambda kp: kp.index)
    indices = [kp.index for kp in kps]
    if indices != list(range(len(kps))):
        raise ModelError(
            f"finger {finger_name!r}: keypoint indices must be unique and contiguous from 0, got {indices}")
    if len(kps) < 2:
        raise ModelError(f"finger {finger_name!r}: need at least 2 keypoints (root and tip)")
    return tuple(kps)


def _build_taxels(raw, n_joints, where):
    try:
        rows, cols = int(raw["rows"]), int(raw["cols"])
        origin = _vec3(raw["origin"], f"{where}.origin")
        row_step = _vec3(raw["row_step"], f"{where}.row_step")
        col_step = _vec3(raw["col_step"], f"{where}.col_step")
    except KeyError as e:
        raise ModelError(f"{where}: missing required field {e.args[0]!r}") from None
    if rows <= 0 or cols <= 0:
        raise ModelError(f"{where}: rows and cols must be positive, got {rows}x{cols}")
    r_idx, c_idx = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    pos = origin + r_idx.reshape(-1, 1) * row_step + c_idx.reshape(-1, 1) * col_step
    return TaxelLayout(rows, cols, _freeze(pos))


def load_hand_model(document):
    """Build a validated HandModel from YAML document text.

    Args:
        document: YAML text with fields ``name``, ``fingers[].joints[]``,
            ``fingers[].keypoints[]``, optional ``taxel_layouts[]`` and
            ``rest_pose``.

    Returns:
        HandModel with frozen arrays.

    Raises:
        ModelError: on YAML syntax errors (with line info) or any failed
            validation (limits, axis norms, chain topology, keypoint indexing).
    """
    try:
        raw = yaml.safe_load(document)
    except yaml.YAMLError as e:
        raise ModelError(f"document is not valid YAML: {e}") from None
    if not isinstance(raw, dict):
        raise ModelError("document root must be a mapping")
    name = str(raw.get("name", "unnamed"))
    raw_fingers = raw.get("fingers")
    if not isinstance(raw_fingers, list) or not raw_fingers:
        raise ModelError("document must declare a non-empty 'fingers' list")

    fingers = []
    dof_offset = 0
    seen_names = set()
    for fi, rf in enumerate(raw_fingers):
        if not isinstance(rf, dict) or "name" not in rf:
            raise ModelError(f"fingers[{fi}]: entry must be a mapping with a 'name'")
        fname = str(rf["name"])
        if fname in seen_names:
            raise ModelError(f"fingers[{fi}]: duplicate finger name {fname!r}")
        seen_names.add(fname)
        raw_joints = rf.get("joints")
        if not isinstance(raw_joints, list) or not raw_joints:
            raise ModelError(f"fingers[{fi}] ({fname}): needs a non-empty 'joints' list")
        joints = []
        prev_child = BASE_LINK
        for ji, rj in enumerate(raw_joints):
            j = _build_joint(rj, fname, prev_child, f"fingers[{fname}].joints[{ji}]")
            joints.append(j)
            prev_child = j.child
        chain = _order_chain(joints, fname)
        kps = _build_keypoints(rf.get("keypoints", []), chain, fname)
        max_link = len(chain)
        for kp in kps:
            if kp.link > max_link:
                raise ModelError(f"finger {fname!r}: keypoint {kp.name!r} sits past the last link")
        fingers.append(Finger(fname, tuple(chain), kps, None, dof_offset))
        dof_offset += len(chain)

    by_name = {f.name: i for i, f in enumerate(fingers)}
    for ti, rt in enumerate(raw.get("taxel_layouts", []) or []):
        where = f"taxel_layouts[{ti}]"
        if not isinstance(rt, dict) or "finger" not in rt:
            raise ModelError(f"{where}: entry must be a mapping with a 'finger'")
        fname = str(rt["finger"])
        if fname not in by_name:
            raise ModelError(f"{where}: unknown finger {fname!r}")
        i = by_name[fname]
        if fingers[i].taxels is not None:
            raise ModelError(f"{where}: finger {fname!r} already has a taxel layout")
        layout = _build_taxels(rt, fingers[i].dof, where)
        f = fingers[i]
        fingers[i] = Finger(f.name, f.joints, f.keypoints, layout, f.dof_offset)

    total_dof = dof_offset
    rest = raw.get("rest_pose")
    if rest is None:
        rest_pose = np.zeros(total_dof)
    else:
        rest_pose = np.asarray(rest, dtype=float)
        if rest_pose.shape != (total_dof,):
            raise ModelError(f"rest_pose: expected {total_dof} values, got shape {rest_pose.shape}")
    lo = np.array([j.lower for f in fingers for j in f.joints])
    hi = np.array([j.upper for f in fingers for j in f.joints])
    if np.any(rest_pose < lo) or np.any(rest_pose > hi):
        raise ModelError("rest_pose: values must lie within joint limits")
    return HandModel(name, tuple(fingers), total_dof, _freeze(rest_pose))


def load_hand_model_file(path):
    """Load a hand model from a document on disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return load_hand_model(fh.read())
