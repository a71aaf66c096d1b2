"""
KITTI object-detection file formats.

* velodyne ``.bin``: little-endian float32 records ``x, y, z, intensity``
* label ``.txt``: one object per line, 15 whitespace-separated fields
* calib ``.txt``: ``key: values`` rows (12 values for 3x4, 9 for 3x3)

plus the camera <-> LiDAR transforms built from a calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "KittiFormatError",
    "PointCloudFrame",
    "ObjectLabel",
    "CalibrationSet",
    "read_point_cloud",
    "write_point_cloud",
    "load_point_cloud",
    "save_point_cloud",
    "parse_label_line",
    "format_label",
    "read_labels",
    "write_labels",
    "read_calib",
    "write_calib",
    "velo_to_cam",
    "cam_to_velo",
    "box_corners_cam",
]

_POINT_DTYPE = np.dtype("<f4")
_RECORD_BYTES = 16
_SINGULAR_DET = 1e-9


class KittiFormatError(ValueError):
    """Malformed KITTI data.

    ``location`` is the point index or 1-based line number of the offending
    record when known.
    """

    def __init__(self, message: str, location: Optional[int] = None):
        super().__init__(message)
        self.location = location


@dataclass
class PointCloudFrame:
    frame_id: str
    points: np.ndarray  # (N, 4) float32

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 2 or pts.shape[1] != 4:
            if pts.size == 0:
                pts = pts.reshape(0, 4)
            else:
                raise ValueError(f"points must have shape (N, 4), got {pts.shape}")
        self.points = pts

    def __len__(self):
        return len(self.points)

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]


def _first_nonfinite(points: np.ndarray) -> Optional[int]:
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        return int(np.flatnonzero(bad)[0])
    return None


def read_point_cloud(data: bytes, frame_id: str = "") -> PointCloudFrame:
    """Decode a velodyne scan.

    Raises:
        KittiFormatError: if the length is not a multiple of 16 bytes or a
            record holds a non-finite value (``location`` is the point index).
    """
    if len(data) % _RECORD_BYTES:
        raise KittiFormatError(
            f"point cloud length {len(data)} is not a multiple of {_RECORD_BYTES} bytes"
        )
    points = np.frombuffer(data, dtype=_POINT_DTYPE).reshape(-1, 4)
    bad = _first_nonfinite(points)
    if bad is not None:
        raise KittiFormatError(f"non-finite value in point {bad}", location=bad)
    return PointCloudFrame(frame_id, points.copy())


def write_point_cloud(frame: PointCloudFrame) -> bytes:
    pts = np.asarray(frame.points)
    bad = _first_nonfinite(pts)
    if bad is not None:
        raise KittiFormatError(f"non-finite value in point {bad}", location=bad)
    return np.ascontiguousarray(pts, dtype=_POINT_DTYPE).tobytes()


def load_point_cloud(path) -> PointCloudFrame:
    path = Path(path)
    try:
        return read_point_cloud(path.read_bytes(), frame_id=path.stem)
    except KittiFormatError as exc:
        raise KittiFormatError(f"{path}: {exc}", exc.location) from None


def save_point_cloud(path, frame: PointCloudFrame) -> None:
    Path(path).write_bytes(write_point_cloud(frame))


@dataclass(frozen=True)
class ObjectLabel:
    """One KITTI object.

    ``dimensions`` is (height, width, length) in metres and ``location`` the
    bottom centre of the box in rectified camera coordinates (x right, y down,
    z forward). ``rotation_y`` is the yaw about the camera y axis.
    """

    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple[float, float, float, float]
    dimensions: tuple[float, float, float]
    location: tuple[float, float, float]
    rotation_y: float

    @property
    def has_valid_box(self) -> bool:
        return self.type != "DontCare" and all(d > 0 for d in self.dimensions)


def parse_label_line(line: str, line_number: int = 0) -> ObjectLabel:
    fields = line.split()
    if len(fields) != 15:
        raise KittiFormatError(
            f"line {line_number}: expected 15 fields, found {len(fields)}", line_number
        )
    try:
        nums = [float(v) for v in fields[1:]]
        occluded = int(float(fields[2]))
    except ValueError as exc:
        raise KittiFormatError(f"line {line_number}: {exc}", line_number) from None
    if not all(math.isfinite(v) for v in nums):
        raise KittiFormatError(f"line {line_number}: non-finite numeric field", line_number)
    return ObjectLabel(
        type=fields[0],
        truncated=nums[0],
        occluded=occluded,
        alpha=nums[2],
        bbox=tuple(nums[3:7]),
        dimensions=tuple(nums[7:10]),
        location=tuple(nums[10:13]),
        rotation_y=nums[13],
    )


def format_label(label: ObjectLabel) -> str:
    floats = (
        [label.truncated]
        + [label.alpha]
        + list(label.bbox)
        + list(label.dimensions)
        + list(label.location)
        + [label.rotation_y]
    )
    f = [f"{v:.2f}" for v in floats]
    return " ".join([label.type, f[0], str(int(label.occluded))] + f[1:])


def read_labels(text: str) -> list[ObjectLabel]:
    """Parse a label file; blank lines are skipped."""
    labels = []
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            labels.append(parse_label_line(line, i))
    return labels


def write_labels(labels) -> str:
    return "".join(format_label(lb) + "\n" for lb in labels)


@dataclass
class CalibrationSet:
    """Projection matrices, rectifying rotation and LiDAR-to-camera extrinsics.

    Keys other than P0-P3, R0_rect and Tr_velo_to_cam are kept in ``extra``
    so a calibration can be written back without losing rows.
    """

    P: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    R0_rect: np.ndarray
    Tr_velo_to_cam: np.ndarray
    extra: dict = field(default_factory=dict)

    @classmethod
    def identity(cls) -> "CalibrationSet":
        eye34 = np.hstack([np.eye(3), np.zeros((3, 1))])
        return cls(tuple(eye34.copy() for _ in range(4)), np.eye(3), eye34.copy())

    def _check(self):
        for name, m in (("R0_rect", self.R0_rect), ("Tr_velo_to_cam", self.Tr_velo_to_cam[:, :3])):
            if abs(np.linalg.det(m)) < _SINGULAR_DET:
                raise np.linalg.LinAlgError(f"{name} is singular")

    def velo_to_cam_matrix(self) -> np.ndarray:
        """4x4 homogeneous map from LiDAR to rectified camera coordinates."""
        tr = np.eye(4)
        tr[:3, :] = self.Tr_velo_to_cam
        r0 = np.eye(4)
        r0[:3, :3] = self.R0_rect
        return r0 @ tr

    def cam_to_velo_matrix(self) -> np.ndarray:
        """Inverse of :meth:`velo_to_cam_matrix`.

        Tr is inverted as a rigid transform; R0_rect by general inversion
        since it is stored with limited precision.
        """
        self._check()
        rot = self.Tr_velo_to_cam[:, :3]
        t = self.Tr_velo_to_cam[:, 3]
        tr_inv = np.eye(4)
        tr_inv[:3, :3] = rot.T
        tr_inv[:3, 3] = -rot.T @ t
        r0_inv = np.eye(4)
        r0_inv[:3, :3] = np.linalg.inv(self.R0_rect)
        return tr_inv @ r0_inv


def _parse_matrix(key, values, line_number):
    if len(values) == 12:
        return values.reshape(3, 4)
    if len(values) == 9:
        return values.reshape(3, 3)
    raise KittiFormatError(
        f"line {line_number}: {key} has {len(values)} values, expected 9 or 12", line_number
    )


def read_calib(text: str) -> CalibrationSet:
    rows = {}
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if ":" not in line:
            raise KittiFormatError(f"line {i}: missing ':' separator", i)
        key, rest = line.split(":", 1)
        try:
            values = np.array([float(v) for v in rest.split()])
        except ValueError as exc:
            raise KittiFormatError(f"line {i}: {exc}", i) from None
        rows[key.strip()] = _parse_matrix(key.strip(), values, i)

    # raw KITTI object calibs spell it "Tr_velo_cam" in some releases
    if "Tr_velo_to_cam" not in rows and "Tr_velo_cam" in rows:
        rows["Tr_velo_to_cam"] = rows.pop("Tr_velo_cam")
    if "R0_rect" not in rows and "R_rect" in rows:
        rows["R0_rect"] = rows.pop("R_rect")
    missing = [k for k in ("P0", "P1", "P2", "P3", "R0_rect", "Tr_velo_to_cam") if k not in rows]
    if missing:
        raise KittiFormatError(f"calibration missing rows: {', '.join(missing)}")
    if rows["R0_rect"].shape != (3, 3):
        raise KittiFormatError("R0_rect must have 9 values")
    for key in ("P0", "P1", "P2", "P3", "Tr_velo_to_cam"):
        if rows[key].shape != (3, 4):
            raise KittiFormatError(f"{key} must have 12 values")
    return CalibrationSet(
        P=tuple(rows.pop(k) for k in ("P0", "P1", "P2", "P3")),
        R0_rect=rows.pop("R0_rect"),
        Tr_velo_to_cam=rows.pop("Tr_velo_to_cam"),
        extra=rows,
    )


def write_calib(calib: CalibrationSet) -> str:
    def row(key, m):
        return f"{key}: " + " ".join(f"{v:.12e}" for v in np.asarray(m).ravel())

    lines = [row(f"P{i}", p) for i, p in enumerate(calib.P)]
    lines.append(row("R0_rect", calib.R0_rect))
    lines.append(row("Tr_velo_to_cam", calib.Tr_velo_to_cam))
    lines += [row(k, v) for k, v in calib.extra.items()]
    return "\n".join(lines) + "\n"


def _apply(matrix, points):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = pts @ matrix[:3, :3].T + matrix[:3, 3]
    return out[0] if single else out


def velo_to_cam(points, calib: CalibrationSet) -> np.ndarray:
    """LiDAR-frame points (3,) or (N, 3) to rectified camera coordinates."""
    return _apply(calib.velo_to_cam_matrix(), points)


def cam_to_velo(points, calib: CalibrationSet) -> np.ndarray:
    """Rectified camera-frame points (3,) or (N, 3) to LiDAR coordinates."""
    return _apply(calib.cam_to_velo_matrix(), points)


def box_corners_cam(label: ObjectLabel) -> np.ndarray:
    """The 8 box corners in camera coordinates, bottom face first."""
    h, w, l = label.dimensions
    x = np.array([l, l, -l, -l, l, l, -l, -l]) / 2
    y = np.array([0, 0, 0, 0, -h, -h, -h, -h], dtype=float)
    z = np.array([w, -w, -w, w, w, -w, -w, w]) / 2
    c, s = math.cos(label.rotation_y), math.sin(label.rotation_y)
    rot = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return (rot @ np.vstack([x, y, z])).T + np.asarray(label.location)
