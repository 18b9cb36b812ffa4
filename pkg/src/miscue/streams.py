"""Per-frame facial feature streams and their on-disk formats.

A stream bundles aligned per-frame channels (52 blendshape activations,
468 flattened (x, y) keypoints, or an arbitrary-width embedding) with a
frame rate and a source identifier.  Frames where no face was detected
carry the previous frame's channel values with ``face_detected`` set to
False, so downstream signals stay defined without inventing motion.

File formats are line oriented:

* ``.fstream``: line 1 is a JSON header with ``source_id``, ``fps`` and
  ``channels`` (channel name -> flat dimension); every further line is
  one frame as a JSON object with ``index``, ``face_detected`` and one
  flat numeric array per declared channel (keypoints stored as
  ``x0, y0, x1, y1, ...``).
* dataset manifest: one JSON object per line referencing a stream file
  plus participant/session/exchange identity and the mistake label.

Floats are serialized as shortest round-tripping decimal text, so
``parse_stream(write_stream(s))`` reproduces every finite value exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

BLENDSHAPE_DIM = 52
KEYPOINT_COUNT = 468
KEYPOINT_DIM = 2 * KEYPOINT_COUNT  # (x, y) pairs stored flat

#: Channels whose per-frame dimension is fixed by the feature extractors.
FIXED_CHANNEL_DIMS = {"blendshapes": BLENDSHAPE_DIM, "keypoints": KEYPOINT_DIM}

#: Channels whose values must stay within [0, 1].
UNIT_RANGE_CHANNELS = frozenset({"blendshapes", "keypoints"})

#: Canonical serialization order.
CHANNEL_ORDER = ("blendshapes", "keypoints", "embedding")


@dataclass(frozen=True)
class FeatureFrame:
    """One frame of a stream; unset channels are ``None``."""

    index: int
    face_detected: bool
    blendshapes: np.ndarray | None = None
    keypoints: np.ndarray | None = None
    embedding: np.ndarray | None = None

    def channel(self, name: str) -> np.ndarray | None:
        if name not in CHANNEL_ORDER:
            raise DataError(f"unknown channel {name!r}")
        return getattr(self, name)


@dataclass(frozen=True, eq=False)
class FeatureStream:
    """An immutable, validated sequence of feature frames.

    Channels are stored column-wise as read-only ``(n_frames, dim)``
    arrays; ``frames`` materializes per-frame views on demand.  Frame
    indices are implicitly ``0..n_frames-1``.
    """

    source_id: str
    fps: float
    channels: dict[str, np.ndarray]
    face_detected: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not isinstance(self.source_id, str):
            raise DataError("source_id must be a string")
        fps = float(self.fps)
        if not math.isfinite(fps) or fps <= 0:
            raise DataError(f"fps must be a positive finite number, got {self.fps!r}")
        object.__setattr__(self, "fps", fps)

        if not self.channels:
            raise DataError("a stream must declare at least one channel")
        unknown = set(self.channels) - set(CHANNEL_ORDER)
        if unknown:
            raise DataError(f"unknown channels: {sorted(unknown)}")

        converted: dict[str, np.ndarray] = {}
        n_frames: int | None = None
        for name in CHANNEL_ORDER:
            if name not in self.channels:
                continue
            arr = np.asarray(self.channels[name], dtype=np.float64)
            if arr.ndim != 2:
                raise DataError(f"channel {name!r} must be a 2-d array")
            if n_frames is None:
                n_frames = arr.shape[0]
            elif arr.shape[0] != n_frames:
                raise DataError("channels disagree on the number of frames")
            fixed = FIXED_CHANNEL_DIMS.get(name)
            if fixed is not None and arr.shape[1] != fixed:
                raise DataError(
                    f"channel {name!r} must have dimension {fixed}, got {arr.shape[1]}"
                )
            if name == "embedding" and arr.shape[1] < 1:
                raise DataError("embedding dimension must be at least 1")
            if name in UNIT_RANGE_CHANNELS:
                if arr.size and not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
                    raise DataError(f"channel {name!r} has values outside [0, 1]")
            elif arr.size and not np.all(np.isfinite(arr)):
                raise DataError(f"channel {name!r} has non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            converted[name] = arr
        assert n_frames is not None

        flags = self.face_detected
        if flags is None:
            flags = np.ones(n_frames, dtype=bool)
        flags = np.asarray(flags, dtype=bool).copy()
        if flags.shape != (n_frames,):
            raise DataError("face_detected length does not match the frame count")
        flags.setflags(write=False)
        object.__setattr__(self, "channels", converted)
        object.__setattr__(self, "face_detected", flags)

    def __len__(self) -> int:
        return int(self.face_detected.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureStream):
            return NotImplemented
        return (
            self.source_id == other.source_id
            and self.fps == other.fps
            and set(self.channels) == set(other.channels)
            and all(np.array_equal(self.channels[k], other.channels[k]) for k in self.channels)
            and np.array_equal(self.face_detected, other.face_detected)
        )

    @property
    def channel_spec(self) -> dict[str, int]:
        return {name: int(arr.shape[1]) for name, arr in self.channels.items()}

    @property
    def frames(self) -> list[FeatureFrame]:
        out = []
        for i in range(len(self)):
            out.append(
                FeatureFrame(
                    index=i,
                    face_detected=bool(self.face_detected[i]),
                    **{name: arr[i] for name, arr in self.channels.items()},
                )
            )
        return out


def parse_stream(data: bytes | str) -> FeatureStream:
    """Parse ``.fstream`` bytes into a validated :class:`FeatureStream`."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"stream file is not valid UTF-8: {exc}") from exc
    else:
        text = data
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError("missing stream header line")

    header = _parse_json_line(lines[0], "header")
    for key in ("source_id", "fps", "channels"):
        if key not in header:
            raise DataError(f"header is missing {key!r}")
    source_id = header["source_id"]
    fps = header["fps"]
    spec = header["channels"]
    if not isinstance(source_id, str):
        raise DataError("header source_id must be a string")
    if not isinstance(fps, (int, float)) or isinstance(fps, bool):
        raise DataError("header fps must be a number")
    if not isinstance(spec, dict) or not spec:
        raise DataError("header channels must be a non-empty object")
    for name, dim in spec.items():
        if name not in CHANNEL_ORDER:
            raise DataError(f"header declares unknown channel {name!r}")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise DataError(f"channel {name!r} has invalid dimension {dim!r}")
        fixed = FIXED_CHANNEL_DIMS.get(name)
        if fixed is not None and dim != fixed:
            raise DataError(f"channel {name!r} must have dimension {fixed}, got {dim}")

    declared = [name for name in CHANNEL_ORDER if name in spec]
    expected_keys = {"index", "face_detected", *declared}
    columns: dict[str, list[list[float]]] = {name: [] for name in declared}
    flags: list[bool] = []
    for lineno, line in enumerate(lines[1:]):
        obj = _parse_json_line(line, f"frame {lineno}")
        if set(obj) != expected_keys:
            raise DataError(
                f"frame {lineno}: fields {sorted(obj)} do not match the declared "
                f"channels {sorted(expected_keys)}"
            )
        if obj["index"] != lineno:
            raise DataError(f"frame {lineno}: non-consecutive index {obj['index']!r}")
        if not isinstance(obj["face_detected"], bool):
            raise DataError(f"frame {lineno}: face_detected must be a boolean")
        flags.append(obj["face_detected"])
        for name in declared:
            values = obj[name]
            if not isinstance(values, list) or len(values) != spec[name]:
                raise DataError(
                    f"frame {lineno}: channel {name!r} must be an array of "
                    f"length {spec[name]}"
                )
            for v in values:
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise DataError(f"frame {lineno}: non-numeric value in {name!r}")
            columns[name].append(values)

    n = len(flags)
    channels = {
        name: np.asarray(rows, dtype=np.float64).reshape(n, spec[name])
        for name, rows in columns.items()
    }
    return FeatureStream(
        source_id=source_id,
        fps=float(fps),
        channels=channels,
        face_detected=np.asarray(flags, dtype=bool),
    )


def write_stream(stream: FeatureStream) -> bytes:
    """Serialize a stream; inverse of :func:`parse_stream` for valid input."""
    header = {
        "source_id": stream.source_id,
        "fps": stream.fps,
        "channels": stream.channel_spec,
    }
    out = [_dump_json_line(header)]
    names = list(stream.channels)
    for i in range(len(stream)):
        row: dict[str, object] = {
            "index": i,
            "face_detected": bool(stream.face_detected[i]),
        }
        for name in names:
            row[name] = stream.channels[name][i].tolist()
        out.append(_dump_json_line(row))
    return ("\n".join(out) + "\n").encode("utf-8")


def _parse_json_line(line: str, what: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {what}: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataError(f"malformed {what}: expected a JSON object")
    return obj


def _dump_json_line(obj: dict) -> str:
    try:
        return json.dumps(obj, allow_nan=False, separators=(",", ":"))
    except ValueError as exc:
        raise DataError(f"cannot serialize non-finite value: {exc}") from exc


@dataclass(frozen=True)
class ExchangeRecord:
    """One robot-utterance/user-response exchange with its mistake label.

    The stream is referenced either by path (manifest-backed datasets)
    or held in memory (generated datasets); exactly one is required to
    resolve it.
    """

    participant_id: str
    session_id: str
    exchange_index: int
    mistake_label: bool
    stream_path: str | None = None
    stream: FeatureStream | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.participant_id, self.session_id, self.exchange_index)

    def load_stream(self, base_dir: str | Path | None = None) -> FeatureStream:
        if self.stream is not None:
            return self.stream
        if self.stream_path is None:
            raise DataError(f"exchange {self.key} has no stream reference")
        path = Path(self.stream_path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return parse_stream(path.read_bytes())


def _check_unique_keys(records: list[ExchangeRecord]) -> None:
    seen: set[tuple[str, str, int]] = set()
    for rec in records:
        if rec.key in seen:
            raise DataError(f"duplicate exchange key {rec.key}")
        seen.add(rec.key)


def write_manifest(records: list[ExchangeRecord], path: str | Path) -> None:
    """Write a dataset manifest (one JSON record per line)."""
    _check_unique_keys(records)
    lines = []
    for rec in records:
        if rec.stream_path is None:
            raise DataError(f"exchange {rec.key} has no stream_path to write")
        lines.append(
            _dump_json_line(
                {
                    "participant_id": rec.participant_id,
                    "session_id": rec.session_id,
                    "exchange_index": rec.exchange_index,
                    "mistake_label": rec.mistake_label,
                    "stream_path": rec.stream_path,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_manifest(path: str | Path) -> list[ExchangeRecord]:
    """Read a dataset manifest; stream paths are kept as written."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        obj = _parse_json_line(line, f"manifest record {lineno}")
        try:
            rec = ExchangeRecord(
                participant_id=str(obj["participant_id"]),
                session_id=str(obj["session_id"]),
                exchange_index=int(obj["exchange_index"]),
                mistake_label=bool(obj["mistake_label"]),
                stream_path=str(obj["stream_path"]),
            )
        except KeyError as exc:
            raise DataError(f"manifest record {lineno} is missing {exc}") from exc
        records.append(rec)
    _check_unique_keys(records)
    return records
