"""Small synthetic KITTI-layout datasets for tests and demos."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .kitti_io import CalibrationSet, ObjectLabel, write_calib, write_labels

__all__ = ["canonical_calibration", "random_car_label", "make_synthetic_dataset"]


def canonical_calibration() -> CalibrationSet:
    """KITTI-like extrinsics: LiDAR x forward, y left, z up; camera 0.27 m ahead, 0.08 m below."""
    rot = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    t = -rot @ np.array([0.27, 0.0, -0.08])
    k = np.array([[721.5377, 0.0, 609.5593], [0.0, 721.5377, 172.854], [0.0, 0.0, 1.0]])
    p = tuple(np.hstack([k, np.array([[-387.57 * i], [0.0], [0.0]])]) for i in range(4))
    return CalibrationSet(P=p, R0_rect=np.eye(3), Tr_velo_to_cam=np.column_stack([rot, t]))


def random_car_label(rng: np.random.Generator, kind: str = "Car", max_range: float = 45.0) -> ObjectLabel:
    """A plausible car-sized label in front of the sensor, rounded to label precision."""
    h, w, l = rng.uniform(1.4, 1.8), rng.uniform(1.5, 1.9), rng.uniform(3.4, 4.6)
    z = rng.uniform(6.0, max_range)
    x = rng.uniform(-0.4, 0.4) * z
    ry = rng.uniform(-math.pi, math.pi)
    u0 = rng.uniform(0, 1000)
    v0 = rng.uniform(100, 250)

    def r(v):
        return round(float(v), 2)

    return ObjectLabel(
        type=kind,
        truncated=0.0,
        occluded=int(rng.integers(0, 3)),
        alpha=r(ry - math.atan2(x, z)),
        bbox=(r(u0), r(v0), r(u0 + rng.uniform(20, 200)), r(v0 + rng.uniform(20, 120))),
        dimensions=(r(h), r(w), r(l)),
        location=(r(x), 1.65, r(z)),
        rotation_y=r(ry),
    )


_DONT_CARE = ObjectLabel("DontCare", -1.0, -1, -10.0, (500.0, 170.0, 590.0, 190.0),
                         (-1.0, -1.0, -1.0), (-1000.0, -1000.0, -1000.0), -10.0)


def make_synthetic_dataset(root, n_frames: int = 20, seed: int = 0, points_per_frame: int = 2000) -> list[str]:
    """Write ``velodyne/``, ``label_2/`` and ``calib/`` for ``n_frames`` frames.

    Every frame holds one to three cars within 45 m, so every frame is
    eligible under the default poisoning config. Some frames also carry a
    pedestrian and a DontCare region.

    Returns:
        the frame ids written.
    """
    root = Path(root)
    for d in ("velodyne", "label_2", "calib"):
        (root / d).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    calib_text = write_calib(canonical_calibration())
    ids = []
    for i in range(n_frames):
        fid = f"{i:06d}"
        pts = np.empty((points_per_frame, 4), dtype=np.float32)
        pts[:, 0] = rng.uniform(0.5, 70.0, points_per_frame)
        pts[:, 1] = rng.uniform(-30.0, 30.0, points_per_frame)
        pts[:, 2] = rng.normal(-1.7, 0.2, points_per_frame)
        pts[:, 3] = rng.uniform(0.0, 1.0, points_per_frame)
        (root / "velodyne" / f"{fid}.bin").write_bytes(pts.astype("<f4").tobytes())

        labels = [random_car_label(rng) for _ in range(int(rng.integers(1, 4)))]
        if rng.random() < 0.4:
            labels.append(random_car_label(rng, kind="Pedestrian"))
        if rng.random() < 0.5:
            labels.append(_DONT_CARE)
        (root / "label_2" / f"{fid}.txt").write_text(write_labels(labels), encoding="utf-8")
        (root / "calib" / f"{fid}.txt").write_text(calib_text, encoding="utf-8")
        ids.append(fid)
    return ids
