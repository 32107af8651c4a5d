#!/usr/bin/env python3
"""Regenerate the bundled synthetic captures.

Poses a small human-proportioned hand model and records its keypoints as
trajectory files: one flat calibration capture plus four gesture clips.
Deterministic; reruns reproduce the shipped files byte for byte.
"""

import pathlib

import numpy as np
from scipy.optimize import minimize

from dexretarget.fileio import write_keypoint_trajectory
from dexretarget.hand_model import load_hand_model_file
from dexretarget.kinematics import forward_kinematics
from dexretarget.retarget import KeypointFrame

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "dexretarget" / "data"
RATE = 25.0
N_FRAMES = 40


def pose(model, **per_finger):
    q = np.zeros(model.total_dof)
    names = [f.name for f in model.fingers]
    for name, angles in per_finger.items():
        i = names.index(name)
        q[model.finger_slice(i)] = angles
    return np.clip(q, model.lower_limits, model.upper_limits)


def capture_frame(model, q, t):
    fk = forward_kinematics(model, q)
    counts = model.keypoint_counts()
    w = []
    for i, c in enumerate(counts):
        pts = np.zeros((c, 3))
        for j in range(1, c):
            pts[j] = fk[(i, j)]
        # wrist landmark: hand-frame origin, shared j=0 slot
        w.append(pts)
    valid = [np.ones(c, dtype=bool) for c in counts]
    return KeypointFrame(w, valid, timestamp=t)


def gesture_clip(model, q_target):
    frames = []
    for k in range(N_FRAMES):
        tau = k / (N_FRAMES - 1)
        s = 3.0 * tau**2 - 2.0 * tau**3
        frames.append(capture_frame(model, s * q_target, k / RATE))
    return frames


def tune_pinch(model, q_guess):
    """Close the thumb-index tip gap while staying near the guess pose."""
    free = np.arange(8)  # thumb + index joints

    def gap(q):
        fk = forward_kinematics(model, q)
        return fk[(0, 4)] - fk[(1, 4)]

    def fun(x):
        q = q_guess.copy()
        q[free] = x
        # gap is metres, pose deviation radians: weight the gap hard
        return float(1e4 * np.dot(gap(q), gap(q)) + 0.05 * np.dot(x - q_guess[free], x - q_guess[free]))

    bounds = list(zip(model.lower_limits[free], model.upper_limits[free]))
    res = minimize(fun, q_guess[free], method="SLSQP", bounds=bounds,
                   options={"maxiter": 200, "ftol": 1e-14})
    q = q_guess.copy()
    q[free] = res.x
    print(f"pinch gap: {np.linalg.norm(gap(q)) * 1000:.3f} mm")
    return q


def main():
    model = load_hand_model_file(DATA / "human_hand_20dof.yaml")
    (DATA / "gestures").mkdir(exist_ok=True)

    flat = np.zeros(model.total_dof)
    write_keypoint_trajectory(DATA / "human_calibration.traj",
                              [capture_frame(model, flat, 0.0)])

    fist = pose(model,
                thumb=[0.1, 0.9, 0.8, 0.9],
                index=[0.0, 1.25, 1.5, 0.9],
                middle=[0.0, 1.25, 1.5, 0.9],
                ring=[0.0, 1.25, 1.5, 0.9],
                pinky=[0.0, 1.25, 1.5, 0.9])
    spread = pose(model,
                  thumb=[-0.6, -0.1, -0.1, -0.05],
                  index=[0.3, 0.1, 0.05, 0.02],
                  middle=[0.08, 0.1, 0.05, 0.02],
                  ring=[-0.18, 0.1, 0.05, 0.02],
                  pinky=[-0.3, 0.1, 0.05, 0.02])
    point = pose(model,
                 thumb=[0.3, 1.0, 0.7, 0.8],
                 index=[0.05, 0.05, 0.0, 0.0],
                 middle=[0.0, 1.3, 1.6, 1.0],
                 ring=[0.0, 1.3, 1.6, 1.0],
                 pinky=[0.0, 1.3, 1.6, 1.0])
    pinch_guess = pose(model,
                       thumb=[0.45, 0.9, 0.35, 0.3],
                       index=[-0.1, 0.75, 0.55, 0.3],
                       middle=[0.0, 0.35, 0.3, 0.15],
                       ring=[0.0, 0.4, 0.35, 0.2],
                       pinky=[0.0, 0.45, 0.4, 0.25])
    pinch = tune_pinch(model, pinch_guess)

    for name, q in [("fist", fist), ("pinch", pinch),
                    ("spread", spread), ("point", point)]:
        write_keypoint_trajectory(DATA / "gestures" / f"{name}.traj",
                                  gesture_clip(model, q))
        print(f"wrote gestures/{name}.traj")


if __name__ == "__main__":
    main()
