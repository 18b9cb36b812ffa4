"""Face localization and dense keypoint tracking.

No pretrained landmark network is bundled with this environment, so the
tracker composes two classical building blocks: scikit-image's trained
LBP frontal-face cascade finds the face box, and a canonical 468-point
grid anchored in that box is carried frame to frame with pyramidal
Lucas-Kanade optical flow, re-anchored softly whenever detection
succeeds so the grid cannot drift away from the face.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from skimage import data as skimage_data
from skimage.feature import Cascade

KEYPOINT_GRID = (26, 18)  # 468 points
KEYPOINT_COUNT = KEYPOINT_GRID[0] * KEYPOINT_GRID[1]

#: Pull of the detected face box on the tracked grid per frame.
_REANCHOR_RATE = 0.12

_LK_PARAMS = dict(
    winSize=(21, 21),
    maxLevel=3,
    criteria=(cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT, 30, 0.01),
)


@dataclass(frozen=True)
class FaceBox:
    row: int
    col: int
    width: int
    height: int

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.col + self.width / 2.0, self.row + self.height / 2.0)


class FaceDetector:
    """Largest-face detection via the bundled LBP cascade."""

    def __init__(self) -> None:
        self._cascade = Cascade(skimage_data.lbp_frontal_face_cascade_filename())

    def detect(self, gray: np.ndarray) -> FaceBox | None:
        short_side = min(gray.shape[:2])
        min_size = max(24, short_side // 6)
        hits = self._cascade.detect_multi_scale(
            img=gray,
            scale_factor=1.2,
            step_ratio=1.3,
            min_size=(min_size, min_size),
            max_size=(short_side, short_side),
        )
        if not hits:
            return None
        best = max(hits, key=lambda h: h["width"] * h["height"])
        return FaceBox(
            row=int(best["r"]),
            col=int(best["c"]),
            width=int(best["width"]),
            height=int(best["height"]),
        )


def grid_in_box(box: FaceBox) -> np.ndarray:
    """Canonical (468, 2) pixel layout (x, y) spanning the face box."""
    nx, ny = KEYPOINT_GRID
    xs = box.col + box.width * np.linspace(0.12, 0.88, nx)
    ys = box.row + box.height * np.linspace(0.12, 0.92, ny)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    return grid.reshape(KEYPOINT_COUNT, 2)


class KeypointTracker:
    """Carries the 468-point grid across frames with optical flow."""

    def __init__(self) -> None:
        self._points: np.ndarray | None = None  # (468, 2) pixel coords
        self._prev_gray: np.ndarray | None = None

    @property
    def points(self) -> np.ndarray | None:
        return self._points

    def start(self, gray: np.ndarray, box: FaceBox) -> np.ndarray:
        self._points = grid_in_box(box)
        self._prev_gray = gray
        return self._points

    def advance(self, gray: np.ndarray, box: FaceBox | None) -> np.ndarray:
        """Track into ``gray``; ``box`` (when detected) re-anchors the grid."""
        assert self._points is not None and self._prev_gray is not None
        prev_pts = self._points.astype(np.float32).reshape(-1, 1, 2)
        flowed, status, _ = cv2.calcOpticalFlowPyrLK(
            self._prev_gray, gray, prev_pts, None, **_LK_PARAMS
        )
        flowed = flowed.reshape(-1, 2).astype(np.float64)
        ok = status.reshape(-1).astype(bool)
        points = np.where(ok[:, None], flowed, self._points)
        if box is not None:
            # soft re-anchor: pull tracked points toward the canonical grid
            # for the current detection, limiting accumulated drift
            anchor = grid_in_box(box)
            points = (1.0 - _REANCHOR_RATE) * points + _REANCHOR_RATE * anchor
        h, w = gray.shape[:2]
        points[:, 0] = np.clip(points[:, 0], 0.0, w - 1.0)
        points[:, 1] = np.clip(points[:, 1], 0.0, h - 1.0)
        self._points = points
        self._prev_gray = gray
        return points
