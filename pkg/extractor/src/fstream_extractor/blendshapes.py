"""Blendshape-style activations derived from tracked keypoints.

Without a bundled blendshape regression model, the 52 per-frame values
are geometric activation proxies: the tracked grid is compared with the
canonical grid for the current face box, giving a deformation field
whose regional statistics (offsets, speed, magnitude) are squashed into
[0, 1].  A motionless face reads near zero on every channel, facial
movement raises the channels of the moving region, which is exactly the
property downstream salience extraction relies on.
"""

from __future__ import annotations

import numpy as np

from .tracking import KEYPOINT_GRID, FaceBox, grid_in_box

BLENDSHAPE_DIM = 52

#: Grid-row bands (y direction) naming face regions, top to bottom.
_BANDS = [
    ("forehead", 0, 3),
    ("brow", 3, 6),
    ("eye", 6, 9),
    ("nose", 9, 12),
    ("mouth", 12, 15),
    ("jaw", 15, 18),
]

_FEATURES_PER_REGION = 4  # mean dx, mean dy, mean speed, mean magnitude
_GAIN = np.array([8.0, 8.0, 30.0, 10.0])


def _region_masks() -> list[np.ndarray]:
    nx, ny = KEYPOINT_GRID
    ix, iy = np.divmod(np.arange(nx * ny), ny)
    masks = []
    for _, lo, hi in _BANDS:
        band = (iy >= lo) & (iy < hi)
        masks.append(band & (ix < nx // 2))   # left half
        masks.append(band & (ix >= nx // 2))  # right half
    masks.append(np.ones(nx * ny, dtype=bool))  # whole face
    return masks


_MASKS = _region_masks()
assert len(_MASKS) * _FEATURES_PER_REGION == BLENDSHAPE_DIM


def activations(
    points: np.ndarray,
    prev_points: np.ndarray | None,
    box: FaceBox,
) -> np.ndarray:
    """52 values in [0, 1] for one frame of tracked points."""
    scale = np.array([max(box.width, 1), max(box.height, 1)], dtype=np.float64)
    deform = (points - grid_in_box(box)) / scale
    if prev_points is None:
        speed = np.zeros(points.shape[0])
    else:
        speed = np.linalg.norm(points - prev_points, axis=1) / scale.mean()
    magnitude = np.linalg.norm(deform, axis=1)

    values = np.empty(BLENDSHAPE_DIM)
    for r, mask in enumerate(_MASKS):
        feats = np.array(
            [
                abs(deform[mask, 0].mean()),
                abs(deform[mask, 1].mean()),
                speed[mask].mean(),
                magnitude[mask].mean(),
            ]
        )
        values[r * _FEATURES_PER_REGION : (r + 1) * _FEATURES_PER_REGION] = np.tanh(
            _GAIN * feats
        )
    return np.clip(values, 0.0, 1.0)
