"""Frame loading, object detection, and object-centric sequence extraction.

Videos arrive as directories of numbered images (or a frame-manifest JSONL).
A pluggable detector yields per-frame boxes; around each detection we cut a
fixed-box temporal crop stack that feeds the self-supervised model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .clients import DetectorClient

CROP_SIZE = 64

_FRAME_NAME = re.compile(r"^(\d+)\.(png|jpg|jpeg)$", re.IGNORECASE)


class IngestError(ValueError):
    """Raised for malformed frame inputs."""


class DegenerateBoxError(IngestError):
    """Raised when a bounding box is too small to crop (w or h <= 1 px)."""


@dataclass(frozen=True)
class FrameRef:
    """One video frame plus its identity within the video."""

    video_id: str
    frame_index: int
    timestamp_s: float
    image: np.ndarray  # HxWx3 uint8

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise IngestError(f"frame image must be HxWx3, got {self.image.shape}")


@dataclass(frozen=True)
class Detection:
    """A detector box on one frame; bbox is (x, y, w, h) in pixels."""

    frame_index: int
    bbox: tuple[float, float, float, float]
    class_label: str
    confidence: float

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


@dataclass
class ObjectSequence:
    """Fixed-box temporal crop stack around one detection.

    crops holds 2t+1 rasters of CROP_SIZE squared; positions holds the
    per-frame object center (pixels), one entry per crop.
    """

    object_id: str
    video_id: str
    center_index: int
    half_window_t: int
    crops: np.ndarray  # (2t+1, 64, 64, 3) uint8
    positions: np.ndarray  # (2t+1, 2) float
    class_label: str = ""
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        expected = 2 * self.half_window_t + 1
        if self.crops.shape != (expected, CROP_SIZE, CROP_SIZE, 3):
            raise IngestError(
                f"expected crops of shape ({expected}, {CROP_SIZE}, {CROP_SIZE}, 3), "
                f"got {self.crops.shape}"
            )
        if self.positions.shape != (expected, 2):
            raise IngestError(f"positions must be ({expected}, 2), got {self.positions.shape}")


# --------------------------------------------------------------------------
# Frame sources


def iter_video_frames(
    data_dir: str | Path, video_id: str, fps: float = 30.0
) -> Iterator[FrameRef]:
    """Yield frames of one video from `data_dir/frames/<video_id>/<index>.png`."""
    frame_dir = Path(data_dir) / "frames" / video_id
    if not frame_dir.is_dir():
        raise IngestError(f"no frame directory for video {video_id!r}: {frame_dir}")
    entries = []
    for path in frame_dir.iterdir():
        m = _FRAME_NAME.match(path.name)
        if m:
            entries.append((int(m.group(1)), path))
    for index, path in sorted(entries):
        image = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
        yield FrameRef(video_id, index, index / fps, image)


def load_video_frames(data_dir: str | Path, video_id: str, fps: float = 30.0) -> list[FrameRef]:
    return list(iter_video_frames(data_dir, video_id, fps))


def sample_frames(frames: Iterable[FrameRef], stride: int) -> Iterator[FrameRef]:
    """Keep frames whose index is a multiple of `stride`, order preserved."""
    if stride < 1:
        raise IngestError("stride must be >= 1")
    for frame in frames:
        if frame.frame_index % stride == 0:
            yield frame


# --------------------------------------------------------------------------
# Detection


def clamp_bbox(
    bbox: Sequence[float], width: int, height: int
) -> tuple[float, float, float, float]:
    """Clamp (x, y, w, h) so the box lies inside the image."""
    x, y, w, h = (float(v) for v in bbox)
    x0 = min(max(x, 0.0), float(width))
    y0 = min(max(y, 0.0), float(height))
    x1 = min(max(x + w, 0.0), float(width))
    y1 = min(max(y + h, 0.0), float(height))
    return (x0, y0, max(x1 - x0, 0.0), max(y1 - y0, 0.0))


def detect_objects(
    frame: FrameRef, detector: DetectorClient, min_confidence: float = 0.0
) -> list[Detection]:
    """Run the detector on one frame; boxes are clamped to image bounds.

    Transport errors propagate to the caller, which records the frame as
    skipped rather than aborting the run.
    """
    if frame.image.size == 0:
        raise IngestError("frame image is empty")
    height, width = frame.image.shape[:2]
    detections = []
    for raw in detector.detect(frame.video_id, frame.frame_index, frame.image):
        confidence = float(raw["confidence"])
        if not 0.0 <= confidence <= 1.0:
            raise IngestError(f"confidence out of range: {confidence}")
        if confidence < min_confidence:
            continue
        detections.append(
            Detection(
                frame_index=frame.frame_index,
                bbox=clamp_bbox(raw["bbox"], width, height),
                class_label=str(raw["class_label"]),
                confidence=confidence,
            )
        )
    return detections


def detection_record(video_id: str, det: Detection) -> dict:
    return {
        "video_id": video_id,
        "frame_index": det.frame_index,
        "bbox": list(det.bbox),
        "class_label": det.class_label,
        "confidence": det.confidence,
    }


def detection_from_record(rec: dict) -> Detection:
    return Detection(
        frame_index=int(rec["frame_index"]),
        bbox=tuple(float(v) for v in rec["bbox"]),
        class_label=rec["class_label"],
        confidence=float(rec["confidence"]),
    )


# --------------------------------------------------------------------------
# Object sequences


def resize_crop(crop: np.ndarray, size: int = CROP_SIZE) -> np.ndarray:
    """Bilinear resize to a square raster."""
    img = Image.fromarray(crop).resize((size, size), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def _nearest_center(
    detections: Sequence[Detection], ref_center: tuple[float, float], max_dist: float
) -> tuple[float, float] | None:
    best = None
    best_d = max_dist
    for det in detections:
        cx, cy = det.center
        d = ((cx - ref_center[0]) ** 2 + (cy - ref_center[1]) ** 2) ** 0.5
        if d <= best_d:
            best_d = d
            best = (cx, cy)
    return best


def build_object_sequence(
    frames: Sequence[FrameRef],
    detection: Detection,
    half_window_t: int = 3,
    object_id: str = "",
    detections_by_frame: dict[int, list[Detection]] | None = None,
    match_radius_px: float = 32.0,
) -> ObjectSequence:
    """Cut the same box out of the 2t+1 frames around the detection's frame.

    Frames are indexed by position in `frames` (assumed consecutive).
    Neighbors missing at the video boundary are edge-replicated so the stack
    shape is constant. Per-frame positions come from the nearest same-class
    detection when `detections_by_frame` is given, falling back to the fixed
    box center; the crops themselves always reuse the center box.
    """
    if half_window_t < 1:
        raise IngestError("half_window_t must be >= 1")
    x, y, w, h = detection.bbox
    if w <= 1.0 or h <= 1.0:
        raise DegenerateBoxError(f"degenerate-box: bbox {detection.bbox}")

    index_of = {f.frame_index: i for i, f in enumerate(frames)}
    if detection.frame_index not in index_of:
        raise IngestError(f"center frame {detection.frame_index} not in provided frames")
    center_pos = index_of[detection.frame_index]

    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = int(np.ceil(x + w)), int(np.ceil(y + h))
    crops = []
    positions = []
    for offset in range(-half_window_t, half_window_t + 1):
        pos = min(max(center_pos + offset, 0), len(frames) - 1)
        frame = frames[pos]
        crop = frame.image[y0:y1, x0:x1]
        crops.append(resize_crop(crop))
        center = detection.center
        if detections_by_frame is not None:
            candidates = [
                d
                for d in detections_by_frame.get(frame.frame_index, [])
                if d.class_label == detection.class_label
            ]
            matched = _nearest_center(candidates, detection.center, match_radius_px)
            if matched is not None:
                center = matched
        positions.append(center)

    return ObjectSequence(
        object_id=object_id or f"{detection.frame_index}:{detection.class_label}",
        video_id=frames[center_pos].video_id,
        center_index=detection.frame_index,
        half_window_t=half_window_t,
        crops=np.stack(crops),
        positions=np.asarray(positions, dtype=np.float64),
        class_label=detection.class_label,
        bbox=detection.bbox,
    )


def extract_frame_sequence(
    frames: Sequence[FrameRef], center_index: int, half_window_t: int = 3
) -> np.ndarray:
    """Whole-frame analogue of an object sequence: full frames resized to 64x64."""
    index_of = {f.frame_index: i for i, f in enumerate(frames)}
    if center_index not in index_of:
        raise IngestError(f"center frame {center_index} not in provided frames")
    center_pos = index_of[center_index]
    stack = []
    for offset in range(-half_window_t, half_window_t + 1):
        pos = min(max(center_pos + offset, 0), len(frames) - 1)
        stack.append(resize_crop(frames[pos].image))
    return np.stack(stack)


# --------------------------------------------------------------------------
# Trajectories

TRAJ_LEN = 7  # past positions fed to the trajectory head
FEATURE_DIM = 5  # per-frame appearance descriptor: mean RGB + box size


@dataclass
class Trajectory:
    """Past positions (normalized) for one object, plus the next position."""

    object_id: str
    video_id: str
    center_index: int
    past: np.ndarray  # (7, 2) in [0,1]
    next_true: np.ndarray  # (2,) in [0,1]
    features: np.ndarray = field(default_factory=lambda: np.zeros((TRAJ_LEN, FEATURE_DIM)))
    neighbors: np.ndarray = field(default_factory=lambda: np.zeros((0, TRAJ_LEN, 2)))


def crop_features(crops: np.ndarray, bbox, width: int, height: int) -> np.ndarray:
    """Per-frame appearance descriptor used by the trajectory head."""
    feats = np.zeros((crops.shape[0], FEATURE_DIM), dtype=np.float64)
    feats[:, :3] = crops.reshape(crops.shape[0], -1, 3).mean(axis=1) / 255.0
    feats[:, 3] = bbox[2] / width
    feats[:, 4] = bbox[3] / height
    return feats


def build_trajectory(
    sequence: ObjectSequence,
    next_position: tuple[float, float] | None,
    image_size: tuple[int, int],
    all_sequences: Sequence[ObjectSequence] = (),
    neighbor_radius: float = 0.25,
    neighbor_cap: int = 8,
) -> Trajectory | None:
    """Assemble a trajectory sample from an object sequence.

    Uses the first TRAJ_LEN per-frame positions as the past and requires the
    observed next position (one frame beyond the sequence); returns None when
    that observation is unavailable. Neighbors are other objects of the same
    frame whose center-frame distance is within `neighbor_radius` (normalized
    units), nearest first, capped.
    """
    if next_position is None:
        return None
    width, height = image_size
    scale = np.array([width, height], dtype=np.float64)
    past = sequence.positions[:TRAJ_LEN] / scale
    own_center = sequence.positions[sequence.half_window_t] / scale

    neighbor_rows = []
    for other in all_sequences:
        if other is sequence or other.center_index != sequence.center_index:
            continue
        other_center = other.positions[other.half_window_t] / scale
        dist = float(np.linalg.norm(other_center - own_center))
        if dist <= neighbor_radius:
            neighbor_rows.append((dist, other.positions[:TRAJ_LEN] / scale))
    neighbor_rows.sort(key=lambda item: item[0])
    neighbors = (
        np.stack([row for _, row in neighbor_rows[:neighbor_cap]])
        if neighbor_rows
        else np.zeros((0, TRAJ_LEN, 2))
    )

    return Trajectory(
        object_id=sequence.object_id,
        video_id=sequence.video_id,
        center_index=sequence.center_index,
        past=past,
        next_true=np.asarray(next_position, dtype=np.float64) / scale,
        features=crop_features(sequence.crops[:TRAJ_LEN], sequence.bbox, width, height),
        neighbors=neighbors,
    )


def associated_position(
    detections_by_frame: dict[int, list[Detection]],
    detection: Detection,
    frame_index: int,
    match_radius_px: float = 48.0,
) -> tuple[float, float] | None:
    """Nearest same-class detection center at `frame_index`, if close enough."""
    candidates = [
        d
        for d in detections_by_frame.get(frame_index, [])
        if d.class_label == detection.class_label
    ]
    return _nearest_center(candidates, detection.center, match_radius_px)
