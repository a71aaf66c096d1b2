"""
Trigger injection into KITTI-layout datasets.

The pipeline picks a seeded subset of frames that contain the target class,
places a synthesized trigger on the sensor-facing end of the nearest target
vehicle, appends the trigger points to the scan and rewrites that vehicle's
label according to the attack objective. Everything else is copied through
byte for byte. A JSON manifest records what was changed.
"""

from __future__ import annotations

import json
import math
import shutil
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import __version__
from .intensity import IntensityMode
from .kitti_io import (
    CalibrationSet,
    KittiFormatError,
    ObjectLabel,
    PointCloudFrame,
    box_corners_cam,
    read_calib,
    read_labels,
    read_point_cloud,
    write_labels,
    write_point_cloud,
)
from .trigger import TriggerConfig, TriggerPatch, synthesize_patch

__all__ = [
    "OBJECTIVE_KINDS",
    "DEPTH_METRICS",
    "MANIFEST_NAME",
    "INCOMPLETE_MARKER",
    "AttackObjective",
    "PoisonConfig",
    "Placement",
    "PoisonManifest",
    "LayoutError",
    "NoEligibleFramesError",
    "target_depth",
    "select_poison_set",
    "compute_placement",
    "inject_trigger",
    "rewrite_label",
    "run_pipeline",
]

OBJECTIVE_KINDS = ("resizing", "disappearance")
DEPTH_METRICS = ("euclidean", "forward")
MANIFEST_NAME = "poison_manifest.json"
INCOMPLETE_MARKER = "POISON_INCOMPLETE"
_LAYOUT_DIRS = ("velodyne", "label_2", "calib")


class LayoutError(FileNotFoundError):
    """The dataset root is missing a directory or per-frame file."""


class NoEligibleFramesError(ValueError):
    """No frame contains a usable object of the target class."""


@dataclass(frozen=True)
class AttackObjective:
    """What the poisoned label teaches: shrink/enlarge the box or drop it."""

    kind: str = "resizing"
    scale_factor: float = 0.5

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"objective must be one of {OBJECTIVE_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.scale_factor) or not 0.0 < self.scale_factor <= 10.0:
            raise ValueError(f"scale_factor must lie in (0, 10], got {self.scale_factor!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale_factor": self.scale_factor}


@dataclass(frozen=True)
class PoisonConfig:
    poison_rate: float = 0.15
    target_class: str = "Car"
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    objective: AttackObjective = field(default_factory=AttackObjective)
    placement_height_fraction: float = 0.75
    max_depth: float = 60.0
    seed: int = 0
    depth_metric: str = "euclidean"

    def __post_init__(self):
        if not math.isfinite(self.poison_rate) or not 0.0 < self.poison_rate <= 1.0:
            raise ValueError(f"poison_rate must lie in (0, 1], got {self.poison_rate!r}")
        f = self.placement_height_fraction
        if not math.isfinite(f) or not 0.0 <= f <= 1.0:
            raise ValueError(f"placement_height_fraction must lie in [0, 1], got {f!r}")
        if not self.max_depth > 0:
            raise ValueError(f"max_depth must be positive, got {self.max_depth!r}")
        if not 0 <= int(self.seed) <= 2**64 - 1 or int(self.seed) != self.seed:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.depth_metric not in DEPTH_METRICS:
            raise ValueError(f"depth_metric must be one of {DEPTH_METRICS}, got {self.depth_metric!r}")

    def to_dict(self) -> dict:
        return {
            "poison_rate": self.poison_rate,
            "target_class": self.target_class,
            "trigger": self.trigger.to_dict(),
            "objective": self.objective.to_dict(),
            "placement_height_fraction": self.placement_height_fraction,
            "max_depth": self.max_depth,
            "seed": int(self.seed),
            "depth_metric": self.depth_metric,
        }

    @classmethod
    def from_dict(cls, obj: dict, database=None) -> "PoisonConfig":
        """Build from the JSON config layout; absent keys take defaults."""
        if not isinstance(obj, dict):
            raise ValueError("config must be a JSON object")
        defaults = cls()
        objective = obj.get("objective", {})
        if isinstance(objective, str):
            objective = {"kind": objective}
        return cls(
            poison_rate=float(obj.get("poison_rate", defaults.poison_rate)),
            target_class=str(obj.get("target_class", defaults.target_class)),
            trigger=TriggerConfig.from_dict(obj.get("trigger", {}), database),
            objective=AttackObjective(
                kind=objective.get("kind", defaults.objective.kind),
                scale_factor=float(objective.get("scale_factor", defaults.objective.scale_factor)),
            ),
            placement_height_fraction=float(
                obj.get("placement_height_fraction", defaults.placement_height_fraction)
            ),
            max_depth=float(obj.get("max_depth", defaults.max_depth)),
            seed=int(obj.get("seed", defaults.seed)),
            depth_metric=str(obj.get("depth_metric", defaults.depth_metric)),
        )


class Placement(NamedTuple):
    """Where the trigger goes, in LiDAR coordinates."""

    center: np.ndarray
    outward_normal: np.ndarray
    depth: float
    up: np.ndarray


@dataclass
class PoisonManifest:
    dataset_root: str
    config: dict
    eligible_count: int
    poisoned_frames: list
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "dataset_root": self.dataset_root,
            "config": self.config,
            "eligible_count": self.eligible_count,
            "poisoned_frames": self.poisoned_frames,
            "tool_version": self.tool_version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "PoisonManifest":
        return cls(
            dataset_root=obj["dataset_root"],
            config=obj["config"],
            eligible_count=obj["eligible_count"],
            poisoned_frames=obj["poisoned_frames"],
            tool_version=obj.get("tool_version", ""),
        )

    @classmethod
    def load(cls, path) -> "PoisonManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def entry(self, frame_id: str) -> Optional[dict]:
        for e in self.poisoned_frames:
            if e["frame_id"] == frame_id:
                return e
        return None


def _corners_velo(label: ObjectLabel, calib: Optional[CalibrationSet]) -> np.ndarray:
    corners = box_corners_cam(label)
    if calib is None:
        return corners
    m = calib.cam_to_velo_matrix()
    return corners @ m[:3, :3].T + m[:3, 3]


def target_depth(label: ObjectLabel, calib: Optional[CalibrationSet] = None, metric: str = "euclidean") -> float:
    """Distance from the sensor to the nearest box corner.

    ``euclidean`` is the minimum corner norm; ``forward`` the minimum corner
    coordinate along the LiDAR x axis. Without a calibration the camera origin
    stands in for the sensor and only ``euclidean`` is meaningful.
    """
    corners = _corners_velo(label, calib)
    if metric == "euclidean":
        return float(np.min(np.linalg.norm(corners, axis=1)))
    if metric == "forward":
        return float(np.min(corners[:, 0]))
    raise ValueError(f"unknown depth metric {metric!r}")


def _pick_target(labels, calib, config: PoisonConfig):
    best = None
    for idx, lb in enumerate(labels):
        if lb.type != config.target_class or not lb.has_valid_box:
            continue
        d = target_depth(lb, calib, config.depth_metric)
        if d <= 0 or d > config.max_depth:
            continue
        if best is None or d < best[0]:
            best = (d, idx)
    return None if best is None else best[1]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def select_poison_set(frame_ids, labels_by_frame: dict, config: PoisonConfig, calibs: Optional[dict] = None):
    """Choose ``round(rate * eligible)`` frames and the target object in each.

    A frame is eligible when it holds an object of the target class with a
    positive-size box within ``max_depth``; its target is the nearest such
    object. Frames are drawn by a permutation seeded with ``config.seed`` and
    returned sorted by frame id as ``(frame_id, target_index)`` pairs.
    """
    frame_ids = sorted(frame_ids)
    if not frame_ids:
        raise NoEligibleFramesError("dataset has no frames")
    eligible = []
    for fid in frame_ids:
        calib = None if calibs is None else calibs.get(fid)
        idx = _pick_target(labels_by_frame.get(fid, []), calib, config)
        if idx is not None:
            eligible.append((fid, idx))
    if not eligible:
        raise NoEligibleFramesError(
            f"no frame contains a {config.target_class!r} object within {config.max_depth} m"
        )
    count = _round_half_up(config.poison_rate * len(eligible))
    order = np.random.default_rng(int(config.seed)).permutation(len(eligible))
    return sorted(eligible[i] for i in order[:count])


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-length direction")
    return v / n


def compute_placement(
    label: ObjectLabel,
    calib: CalibrationSet,
    height_fraction: float = 0.75,
    depth_metric: str = "euclidean",
) -> Placement:
    """Trigger pose on the sensor-facing end face of a labelled box.

    The two faces perpendicular to the box's length axis are candidates; the
    one whose outward normal points more towards the LiDAR origin wins. The
    centre sits ``height_fraction`` of the box height above the bottom,
    laterally centred.
    """
    if not label.has_valid_box:
        raise ValueError(f"degenerate box dimensions {label.dimensions}")
    h, _, l = label.dimensions
    c, s = math.cos(label.rotation_y), math.sin(label.rotation_y)
    length_cam = np.array([c, 0.0, -s])
    up_cam = np.array([0.0, -1.0, 0.0])
    loc = np.asarray(label.location, dtype=float)

    m = calib.cam_to_velo_matrix()
    rot, t = m[:3, :3], m[:3, 3]

    best = None
    for sign in (1.0, -1.0):
        face_mid = loc + sign * 0.5 * l * length_cam + 0.5 * h * up_cam
        face_mid_velo = rot @ face_mid + t
        normal_velo = _unit(rot @ (sign * length_cam))
        score = float(normal_velo @ _unit(-face_mid_velo))
        if best is None or score > best[0]:
            best = (score, sign, normal_velo)
    _, sign, normal = best

    center_cam = loc + sign * 0.5 * l * length_cam + height_fraction * h * up_cam
    up = rot @ up_cam
    up = _unit(up - (up @ normal) * normal)
    return Placement(
        center=rot @ center_cam + t,
        outward_normal=normal,
        depth=target_depth(label, calib, depth_metric),
        up=up,
    )


def _patch_rotation(placement: Placement) -> np.ndarray:
    x = _unit(np.asarray(placement.outward_normal, dtype=float))
    up = getattr(placement, "up", None)
    if up is None:
        up = np.array([0.0, 0.0, 1.0])
        if abs(up @ x) > 0.99:
            up = np.array([1.0, 0.0, 0.0])
    z = _unit(up - (up @ x) * x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def inject_trigger(frame: PointCloudFrame, patch: TriggerPatch, placement: Placement) -> PointCloudFrame:
    """Append the patch to a scan at ``placement``.

    The patch's local x axis (its plane normal) is turned onto the outward
    normal and its local z axis onto the box's up direction. Original points
    are kept unchanged and in order; trigger intensities pass through.
    """
    rot = _patch_rotation(placement)
    local = patch.points[:, :3]
    world = local @ rot.T + np.asarray(placement.center, dtype=float)
    added = np.column_stack([world, patch.points[:, 3]]).astype(np.float32)
    points = np.concatenate([np.asarray(frame.points, dtype=np.float32), added])
    return PointCloudFrame(frame.frame_id, points)


def rewrite_label(labels, target_index: int, objective: AttackObjective) -> list[ObjectLabel]:
    """Apply the attack objective to ``labels[target_index]``.

    Disappearance drops the label. Resizing scales (h, w, l); the KITTI
    location is the bottom centre, so it stays put along with every other
    field.
    """
    labels = list(labels)
    if not 0 <= target_index < len(labels):
        raise IndexError(f"target index {target_index} out of range for {len(labels)} labels")
    if objective.kind == "disappearance":
        return labels[:target_index] + labels[target_index + 1:]
    target = labels[target_index]
    f = objective.scale_factor
    labels[target_index] = replace(target, dimensions=tuple(d * f for d in target.dimensions))
    return labels


def _frame_seed(config: PoisonConfig, frame_id: str) -> int:
    entropy = [int(config.trigger.intensity_mode.seed), int(config.seed), zlib.crc32(frame_id.encode())]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _check_layout(root: Path) -> list[str]:
    for d in _LAYOUT_DIRS:
        if not (root / d).is_dir():
            raise LayoutError(f"missing directory {root / d}")
    frame_ids = sorted(p.stem for p in (root / "velodyne").glob("*.bin"))
    for fid in frame_ids:
        for d in ("label_2", "calib"):
            path = root / d / f"{fid}.txt"
            if not path.is_file():
                raise LayoutError(f"missing file {path}")
    return frame_ids


def _read_text(path: Path, parse):
    try:
        return parse(path.read_text(encoding="utf-8"))
    except KittiFormatError as exc:
        raise KittiFormatError(f"{path}: {exc}", exc.location) from None


def _poison_frame(src: Path, dst: Path, fid: str, target: int, labels, calib, config: PoisonConfig) -> dict:
    velo_path = src / "velodyne" / f"{fid}.bin"
    try:
        frame = read_point_cloud(velo_path.read_bytes(), fid)
    except KittiFormatError as exc:
        raise KittiFormatError(f"{velo_path}: {exc}", exc.location) from None

    placement = compute_placement(
        labels[target], calib, config.placement_height_fraction, config.depth_metric
    )
    mode = config.trigger.intensity_mode
    if mode.kind == "random":
        mode = IntensityMode("random", mode.fixed_value, _frame_seed(config, fid))
    patch = synthesize_patch(config.trigger, placement.depth, mode)
    poisoned = inject_trigger(frame, patch, placement)
    new_labels = rewrite_label(labels, target, config.objective)

    (dst / "velodyne" / f"{fid}.bin").write_bytes(write_point_cloud(poisoned))
    (dst / "label_2" / f"{fid}.txt").write_text(write_labels(new_labels), encoding="utf-8")
    shutil.copyfile(src / "calib" / f"{fid}.txt", dst / "calib" / f"{fid}.txt")

    original = list(labels[target].dimensions)
    if config.objective.kind == "disappearance":
        rewritten = "removed"
    else:
        # as stored in the label file, which keeps two decimals
        rewritten = [float(f"{d:.2f}") for d in new_labels[target].dimensions]
    return {
        "frame_id": fid,
        "target_index": target,
        "depth": placement.depth,
        "n_y": patch.n_y,
        "n_z": patch.n_z,
        "injected_point_count": len(patch),
        "original_dims": original,
        "rewritten_dims": rewritten,
    }


def run_pipeline(dataset_root, output_root, config: PoisonConfig, workers: int = 1) -> PoisonManifest:
    """Write a poisoned copy of a KITTI-layout dataset.

    ``dataset_root`` must contain ``velodyne/``, ``label_2/`` and ``calib/``
    with matching frame ids; any other top-level entries (images, planes) are
    copied unchanged. Output depends only on the inputs and ``config``, not
    on ``workers``. If a frame fails, an ``POISON_INCOMPLETE`` marker
    describing the error is left in ``output_root`` and the error re-raised.

    Returns:
        The manifest, also written to ``output_root/poison_manifest.json``.
    """
    src, dst = Path(dataset_root), Path(output_root)
    frame_ids = _check_layout(src)
    labels = {fid: _read_text(src / "label_2" / f"{fid}.txt", read_labels) for fid in frame_ids}
    calibs = {fid: _read_text(src / "calib" / f"{fid}.txt", read_calib) for fid in frame_ids}
    selected = select_poison_set(frame_ids, labels, config, calibs)
    eligible_count = sum(
        _pick_target(labels[fid], calibs[fid], config) is not None for fid in frame_ids
    )

    dst.mkdir(parents=True, exist_ok=True)
    marker = dst / INCOMPLETE_MARKER
    if marker.exists():
        marker.unlink()
    try:
        for entry in sorted(src.iterdir()):
            if entry.name in _LAYOUT_DIRS or entry.name in (MANIFEST_NAME, INCOMPLETE_MARKER):
                continue
            if entry.resolve() == dst.resolve():
                continue
            if entry.is_dir():
                shutil.copytree(entry, dst / entry.name, dirs_exist_ok=True)
            else:
                shutil.copyfile(entry, dst / entry.name)
        for d in _LAYOUT_DIRS:
            (dst / d).mkdir(exist_ok=True)

        targets = dict(selected)
        for fid in frame_ids:
            if fid in targets:
                continue
            shutil.copyfile(src / "velodyne" / f"{fid}.bin", dst / "velodyne" / f"{fid}.bin")
            shutil.copyfile(src / "label_2" / f"{fid}.txt", dst / "label_2" / f"{fid}.txt")
            shutil.copyfile(src / "calib" / f"{fid}.txt", dst / "calib" / f"{fid}.txt")

        def work(item):
            fid, target = item
            return _poison_frame(src, dst, fid, target, labels[fid], calibs[fid], config)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                entries = list(pool.map(work, selected))
        else:
            entries = [work(item) for item in selected]
    except BaseException as exc:
        marker.write_text(f"{type(exc).__name__}: {exc}\n", encoding="utf-8")
        raise

    entries.sort(key=lambda e: e["frame_id"])
    manifest = PoisonManifest(
        dataset_root=str(src),
        config=config.to_dict(),
        eligible_count=eligible_count,
        poisoned_frames=entries,
    )
    (dst / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    return manifest
