"""Clip compilation: classifier inputs built around salient moments.

A fixed-context window is cut around each selected moment, the windows
are concatenated in frame order, and the concatenation is decimated by
keeping every n-th frame.  Provenance records which source frames each
window covers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .salience import SalientMoment
from .streams import FeatureFrame, FeatureStream, _dump_json_line, _parse_json_line


@dataclass(frozen=True)
class ClipCompilation:
    """Concatenated, decimated frames around salient moments.

    ``stream`` holds the output frames reindexed from zero with the
    source id preserved; ``provenance`` lists one
    ``(moment_frame, start, end)`` source window per clip, in order.
    """

    stream: FeatureStream
    provenance: tuple[tuple[int, int, int], ...]
    decimation: int
    label: bool | None = None

    @property
    def frames(self) -> list[FeatureFrame]:
        return self.stream.frames

    @property
    def source_id(self) -> str:
        return self.stream.source_id

    def __len__(self) -> int:
        return len(self.stream)


def clip_window(n_frames: int, moment_frame: int, context: int) -> tuple[int, int]:
    """Half-open source window of ``context`` frames around a moment.

    The window is centered (``context // 2`` before the moment) and
    shifted inward at stream boundaries; streams shorter than
    ``context`` are returned whole.
    """
    if context < 1:
        raise DataError(f"context must be at least 1, got {context}")
    if not 0 <= moment_frame < n_frames:
        raise DataError(
            f"moment frame {moment_frame} outside stream of {n_frames} frames"
        )
    if n_frames <= context:
        return 0, n_frames
    start = moment_frame - context // 2
    start = min(max(start, 0), n_frames - context)
    return start, start + context


def extract_clip(
    stream: FeatureStream, moment: SalientMoment, context: int
) -> list[FeatureFrame]:
    """Frames of the context window around ``moment``."""
    start, end = clip_window(len(stream), moment.frame_index, context)
    return stream.frames[start:end]


def assemble_compilation(
    stream: FeatureStream,
    moments: list[SalientMoment],
    context: int,
    decimate_n: int,
    label: bool | None = None,
) -> ClipCompilation:
    """Concatenate per-moment clips in frame order, then decimate.

    Decimation keeps positions 0, n, 2n, ... of the concatenation, so
    the output holds ceil(raw_length / n) frames.  Overlapping windows
    are concatenated as-is, duplicating the shared source frames.
    """
    if not moments:
        raise DataError("cannot assemble a compilation from zero moments")
    if decimate_n < 1:
        raise DataError(f"decimate_n must be at least 1, got {decimate_n}")
    ordered = sorted(moments, key=lambda m: m.frame_index)
    windows = [clip_window(len(stream), m.frame_index, context) for m in ordered]
    channels = {
        name: np.concatenate([arr[s:e] for s, e in windows])[::decimate_n]
        for name, arr in stream.channels.items()
    }
    flags = np.concatenate([stream.face_detected[s:e] for s, e in windows])[::decimate_n]
    out_stream = FeatureStream(
        source_id=stream.source_id,
        fps=stream.fps / decimate_n,
        channels=channels,
        face_detected=flags,
    )
    provenance = tuple(
        (m.frame_index, s, e) for m, (s, e) in zip(ordered, windows)
    )
    raw_len = sum(e - s for s, e in windows)
    assert len(out_stream) == math.ceil(raw_len / decimate_n)
    return ClipCompilation(
        stream=out_stream,
        provenance=provenance,
        decimation=decimate_n,
        label=label,
    )


def split_into_moment_samples(
    stream: FeatureStream,
    moments: list[SalientMoment],
    context: int,
    decimate_n: int,
    label: bool | None = None,
) -> list[ClipCompilation]:
    """One single-moment compilation per moment, inheriting the label."""
    ordered = sorted(moments, key=lambda m: m.frame_index)
    return [
        assemble_compilation(stream, [m], context, decimate_n, label=label)
        for m in ordered
    ]


def write_clip_manifest(
    entries: list[dict],
    path: str | Path,
) -> None:
    """Write a compilation manifest: one JSON record per line.

    Each entry carries participant/session/exchange identity, the label,
    the clip file path, decimation, and provenance windows.
    """
    lines = [_dump_json_line(entry) for entry in entries]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_clip_manifest(path: str | Path) -> list[dict]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        entries.append(_parse_json_line(line, f"clip manifest record {lineno}"))
    return entries
