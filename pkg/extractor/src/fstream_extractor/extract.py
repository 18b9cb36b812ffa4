"""Video to feature-stream extraction.

Decodes a video, resamples it to the target frame rate by nearest-frame
selection, finds the largest face with the bundled cascade, tracks a
468-point grid with optical flow, derives 52 blendshape-style
activations, and writes the result in the ``.fstream`` format consumed
by the miscue pipeline.

Frames where detection fails carry the previous frame's values with
``face_detected`` false; frames before the first detection are
backfilled from it.  A video with no detectable face at all is a hard
error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .blendshapes import activations
from .tracking import KEYPOINT_COUNT, FaceDetector, KeypointTracker

VALID_CHANNELS = ("blendshapes", "keypoints")


class ExtractionError(ValueError):
    """Unreadable input or no usable face in the video."""


@dataclass(frozen=True)
class ExtractionJob:
    """One video-to-stream conversion request.

    Multiple faces resolve to the largest detection; resampling picks
    the nearest source frame rather than interpolating.
    """

    video_path: str | Path
    out_path: str | Path
    fps: float = 60.0
    channels: tuple[str, ...] = ("blendshapes", "keypoints")

    def __post_init__(self) -> None:
        if not self.fps > 0:
            raise ExtractionError(f"target fps must be positive, got {self.fps}")
        bad = set(self.channels) - set(VALID_CHANNELS)
        if bad or not self.channels:
            raise ExtractionError(f"unsupported channels: {sorted(bad)}")


def _decode(path: Path) -> tuple[list[np.ndarray], float]:
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise ExtractionError(f"cannot open video {path}")
    src_fps = capture.get(cv2.CAP_PROP_FPS)
    frames = []
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY))
    capture.release()
    if not frames:
        raise ExtractionError(f"video {path} contains no frames")
    if not src_fps or src_fps <= 0:
        raise ExtractionError(f"video {path} reports no frame rate")
    return frames, float(src_fps)


def _resample_indices(n_frames: int, src_fps: float, target_fps: float) -> list[int]:
    duration = n_frames / src_fps
    n_out = max(1, round(duration * target_fps))
    return [
        min(n_frames - 1, round(k / target_fps * src_fps)) for k in range(n_out)
    ]


def extract(job: ExtractionJob) -> dict:
    """Run the job and write its ``.fstream`` file.

    Returns a summary with the frame count and how many frames had a
    detected face.
    """
    frames, src_fps = _decode(Path(job.video_path))
    indices = _resample_indices(len(frames), src_fps, job.fps)
    sampled = [frames[i] for i in indices]
    height, width = sampled[0].shape[:2]

    detector = FaceDetector()
    tracker = KeypointTracker()
    keypoint_rows: list[np.ndarray | None] = []
    blend_rows: list[np.ndarray | None] = []
    detected_flags: list[bool] = []
    prev_points = None
    last_box = None

    for gray in sampled:
        box = detector.detect(gray)
        detected = box is not None
        if tracker.points is None:
            points = tracker.start(gray, box) if detected else None
        elif detected:
            points = tracker.advance(gray, box)
        else:
            points = None  # carry-forward below

        if points is None:
            keypoint_rows.append(None)
            blend_rows.append(None)
        else:
            norm = points / np.array([width, height], dtype=np.float64)
            keypoint_rows.append(np.clip(norm, 0.0, 1.0).reshape(2 * KEYPOINT_COUNT))
            blend_rows.append(activations(points, prev_points, box))
            prev_points = points
            last_box = box
        detected_flags.append(detected)

    if last_box is None:
        raise ExtractionError(f"no face detected in any frame of {job.video_path}")

    _fill_gaps(keypoint_rows)
    _fill_gaps(blend_rows)

    channels: dict[str, np.ndarray] = {}
    if "blendshapes" in job.channels:
        channels["blendshapes"] = np.stack(blend_rows)
    if "keypoints" in job.channels:
        channels["keypoints"] = np.stack(keypoint_rows)
    source_id = Path(job.video_path).stem
    write_fstream(
        Path(job.out_path),
        source_id=source_id,
        fps=job.fps,
        channels=channels,
        face_detected=detected_flags,
    )
    return {
        "frames": len(sampled),
        "detected_frames": int(sum(detected_flags)),
        "source_fps": src_fps,
        "source_id": source_id,
    }


def _fill_gaps(rows: list) -> None:
    """Carry values forward over gaps; backfill anything before the first."""
    first = next((i for i, r in enumerate(rows) if r is not None), None)
    assert first is not None
    for i in range(first):
        rows[i] = rows[first]
    for i in range(first + 1, len(rows)):
        if rows[i] is None:
            rows[i] = rows[i - 1]


def write_fstream(
    path: Path,
    *,
    source_id: str,
    fps: float,
    channels: dict[str, np.ndarray],
    face_detected: list[bool],
) -> None:
    """Serialize in the line-oriented .fstream format."""
    ordered = [name for name in ("blendshapes", "keypoints") if name in channels]
    header = {
        "source_id": source_id,
        "fps": float(fps),
        "channels": {name: int(channels[name].shape[1]) for name in ordered},
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    n = len(face_detected)
    for i in range(n):
        row = {"index": i, "face_detected": bool(face_detected[i])}
        for name in ordered:
            row[name] = channels[name][i].tolist()
        lines.append(json.dumps(row, allow_nan=False, separators=(",", ":")))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def expected_frame_count(duration_seconds: float, fps: float) -> int:
    return max(1, round(duration_seconds * fps))
