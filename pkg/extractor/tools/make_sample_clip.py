"""Regenerate the bundled sample clip (deterministic, no RNG).

A 4-second, 10 fps, 256x256 clip built from scikit-image's astronaut
photo: the head region pans and zooms smoothly so the face stays
detectable while giving the optical-flow tracker real motion.

Usage: python tools/make_sample_clip.py [out.avi]
"""

from __future__ import annotations

import sys
from pathlib import Path

import cv2
import numpy as np
from skimage import data as skimage_data

SIZE = 256
FPS = 10
SECONDS = 4


def render_frames() -> list[np.ndarray]:
    photo = cv2.cvtColor(skimage_data.astronaut(), cv2.COLOR_RGB2BGR)
    frames = []
    n = FPS * SECONDS
    for k in range(n):
        phase = 2.0 * np.pi * k / n
        dx = 6.0 * np.sin(phase)
        dy = 4.0 * np.sin(2.0 * phase)
        zoom = 1.0 + 0.04 * np.sin(phase + 0.7)
        # crop window centered on the astronaut's head
        center = np.array([150.0 + dy, 220.0 + dx])  # (row, col)
        matrix = np.array(
            [
                [zoom, 0.0, SIZE / 2.0 - zoom * center[1]],
                [0.0, zoom, SIZE / 2.0 - zoom * center[0]],
            ]
        )
        frame = cv2.warpAffine(
            photo, matrix, (SIZE, SIZE), flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_REFLECT,
        )
        frames.append(frame)
    return frames


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent
        / "src/fstream_extractor/data/sample_clip.avi"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    writer = cv2.VideoWriter(
        str(out), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (SIZE, SIZE)
    )
    if not writer.isOpened():
        raise SystemExit("cannot open video writer")
    for frame in render_frames():
        writer.write(frame)
    writer.release()
    print(f"wrote {FPS * SECONDS} frames to {out}")


if __name__ == "__main__":
    main()
