"""Deterministic synthetic datasets for desk-scale experiments.

Three regimes:

* ``separable``: negatives are low-amplitude smooth noise over the 52
  blendshape channels; positives additionally carry 1-3 "confusion
  bursts", correlated raised-cosine ramps (about one second long) on a
  fixed brow/eye-region channel subset.  A classifier can learn this.
* ``null``: every stream comes from one distribution (bursts included,
  label-independent) and labels are assigned at the requested positive
  fraction, so no classifier can beat chance.
* ``fixtures``: fragments with bursts planted at recorded frames on
  both blendshape and keypoint channels, emitted together with the
  planted-frame annotations for scoring salience extractors.

Every sample draws from its own seed derived from (seed, index), so
output is identical no matter how generation is parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DataError
from .salience import smooth_columns
from .streams import (
    BLENDSHAPE_DIM,
    KEYPOINT_COUNT,
    ExchangeRecord,
    FeatureStream,
)

REGIMES = ("separable", "null", "fixtures")

#: Brow/eye-region analog: the blendshape channels that burst together.
BURST_CHANNELS = (1, 2, 3, 4, 5, 17, 18, 19)

#: Exchanges per participant in the null regime (dialogue-corpus analog).
_NULL_EXCHANGES_PER_PARTICIPANT = 65

_LABEL_TAG = 104729
_SAMPLE_TAG = 15485863


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one synthetic dataset."""

    regime: str
    n_samples: int
    positive_fraction: float
    fps: float
    length_frames: int
    noise_scale: float = 0.02
    burst_amplitude: float = 0.5
    seed: int = 0
    channels: tuple[str, ...] = ("blendshapes",)
    participants: int | None = None
    total_moments: int | None = None

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise DataError(f"unknown regime {self.regime!r}")
        if self.n_samples < 1:
            raise DataError("n_samples must be positive")
        if not 0.0 < self.positive_fraction < 1.0:
            raise DataError("positive_fraction must be in (0, 1)")
        if not self.fps > 0:
            raise DataError("fps must be positive")
        if self.length_frames < 2:
            raise DataError("length_frames must be at least 2")
        if not self.noise_scale > 0:
            raise DataError("noise_scale must be positive")
        if not self.burst_amplitude > 0:
            raise DataError("burst_amplitude must be positive")
        if self.seed < 0:
            raise DataError("seed must be non-negative")
        bad = set(self.channels) - {"blendshapes", "keypoints"}
        if bad or not self.channels:
            raise DataError(f"unsupported generator channels: {sorted(bad)}")
        if self.participants is not None and self.participants < 1:
            raise DataError("participants must be positive")
        if self.total_moments is not None and not (
            0 <= self.total_moments <= 3 * self.n_samples
        ):
            raise DataError("total_moments must be within [0, 3 * n_samples]")

    @classmethod
    def separable(cls, **overrides) -> "GenSpec":
        """Expressive-confusion analog: short clips, strong class signal."""
        base = dict(
            regime="separable",
            n_samples=139,
            positive_fraction=0.7,
            fps=10.0,
            length_frames=40,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def null(cls, **overrides) -> "GenSpec":
        """Dialogue-corpus analog: realistic scale, no label signal."""
        base = dict(
            regime="null",
            n_samples=2600,
            positive_fraction=0.272,
            fps=60.0,
            length_frames=180,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def fixtures(cls, **overrides) -> "GenSpec":
        """Annotated salience fragments (default 20 fragments, 49 bursts)."""
        base = dict(
            regime="fixtures",
            n_samples=20,
            positive_fraction=0.3,
            fps=60.0,
            length_frames=300,
            channels=("blendshapes", "keypoints"),
            total_moments=49,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class GeneratedDataset:
    spec: GenSpec
    records: list[ExchangeRecord]
    annotations: dict[str, tuple[int, ...]] | None


def _default_participants(spec: GenSpec) -> int:
    if spec.participants is not None:
        return min(spec.participants, spec.n_samples)
    if spec.regime == "null":
        return max(3, round(spec.n_samples / _NULL_EXCHANGES_PER_PARTICIPANT))
    return spec.n_samples


def _labels(spec: GenSpec) -> np.ndarray:
    # Exact positive count, shuffled; deterministic in the seed alone.
    n_pos = round(spec.n_samples * spec.positive_fraction)
    labels = np.zeros(spec.n_samples, dtype=bool)
    labels[:n_pos] = True
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _LABEL_TAG]))
    return labels[rng.permutation(spec.n_samples)]


def _moment_counts(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    """Distribute the planted-burst total over fixtures fragments."""
    total = 49 if spec.total_moments is None else spec.total_moments
    if not 0 <= total <= 3 * spec.n_samples:
        raise DataError("total_moments must be within [0, 3 * n_samples]")
    base, rem = divmod(total, spec.n_samples)
    counts = np.full(spec.n_samples, base, dtype=np.int64)
    bump = rng.permutation(spec.n_samples)[:rem]
    counts[bump] += 1
    return counts


def _burst_centers(
    rng: np.random.Generator,
    length: int,
    count: int,
    burst_len: int,
    min_gap: int,
) -> list[int]:
    """Evenly slotted centers with seeded jitter, pairwise >= min_gap apart."""
    if count == 0:
        return []
    pad = burst_len // 2
    lo = pad
    hi = length - 1 - pad
    if hi <= lo:
        lo, hi = 0, length - 1
    span = hi - lo
    slot = span / count
    jitter = max(0.0, (slot - min_gap) / 2.0)
    centers = []
    for j in range(count):
        c = lo + slot * (j + 0.5) + rng.uniform(-jitter, jitter)
        centers.append(int(round(c)))
    return centers


def _raised_cosine(burst_len: int) -> np.ndarray:
    t = np.arange(burst_len)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * t / (burst_len - 1)))


def _apply_window(length: int, center: int, burst_len: int) -> tuple[slice, np.ndarray]:
    start = max(0, center - burst_len // 2)
    end = min(length, start + burst_len)
    start = max(0, end - burst_len)
    window = _raised_cosine(burst_len)[: end - start]
    return slice(start, end), window


def _gen_blendshapes(
    rng: np.random.Generator,
    spec: GenSpec,
    centers: list[int],
    burst_len: int,
) -> np.ndarray:
    t_len = spec.length_frames
    base = rng.uniform(0.05, 0.15, size=BLENDSHAPE_DIM)
    noise = rng.normal(0.0, spec.noise_scale, size=(t_len, BLENDSHAPE_DIM))
    smooth_w = max(3, int(round(spec.fps / 4.0)))
    values = base[None, :] + smooth_columns(noise, smooth_w)
    idx = np.asarray(BURST_CHANNELS)
    for center in centers:
        sl, window = _apply_window(t_len, center, burst_len)
        amp = spec.burst_amplitude * rng.uniform(0.85, 1.0)
        rows = values[sl]
        rows[:, idx] += amp * window[:, None]
    return np.clip(values, 0.0, 1.0)


def _canonical_layout() -> np.ndarray:
    # 26 x 18 grid = 468 points covering a face-like central region.
    xs = np.linspace(0.3, 0.7, 26)
    ys = np.linspace(0.25, 0.75, 18)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    return grid.reshape(KEYPOINT_COUNT, 2)


_LAYOUT = _canonical_layout()


def _gen_keypoints(
    rng: np.random.Generator,
    spec: GenSpec,
    centers: list[int],
    burst_len: int,
) -> np.ndarray:
    t_len = spec.length_frames
    walk = rng.normal(0.0, 5e-4, size=(t_len, KEYPOINT_COUNT, 2)).cumsum(axis=0)
    points = _LAYOUT[None, :, :] + walk
    for center in centers:
        sl, window = _apply_window(t_len, center, burst_len)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(theta), np.sin(theta)])
        amp = 0.08 * spec.burst_amplitude
        points[sl] += amp * window[:, None, None] * direction[None, None, :]
    return np.clip(points, 0.0, 1.0).reshape(t_len, 2 * KEYPOINT_COUNT)


def iter_exchanges(
    spec: GenSpec,
) -> Iterator[tuple[ExchangeRecord, tuple[int, ...] | None]]:
    """Yield (record, planted frames or None) one sample at a time.

    Streams are held in memory on the records; callers that persist them
    assign stream paths when writing.
    """
    labels = _labels(spec)
    n_participants = _default_participants(spec)
    top_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SAMPLE_TAG]))
    fixture_counts = (
        _moment_counts(spec, top_rng) if spec.regime == "fixtures" else None
    )
    burst_len = max(4, int(round(spec.fps)))

    for i in range(spec.n_samples):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SAMPLE_TAG, i]))
        label = bool(labels[i])
        if spec.regime == "separable":
            n_bursts = int(rng.integers(1, 4)) if label else 0
            min_gap = burst_len
        elif spec.regime == "null":
            n_bursts = int(rng.integers(0, 4))
            min_gap = burst_len
        else:
            n_bursts = int(fixture_counts[i])
            # Fixture bursts stay well separated so top-k selection with
            # a one-second minimum separation can recover all of them.
            min_gap = burst_len + 5
        centers = _burst_centers(rng, spec.length_frames, n_bursts, burst_len, min_gap)

        channels = {}
        if "blendshapes" in spec.channels:
            channels["blendshapes"] = _gen_blendshapes(rng, spec, centers, burst_len)
        if "keypoints" in spec.channels:
            channels["keypoints"] = _gen_keypoints(rng, spec, centers, burst_len)

        stream = FeatureStream(
            source_id=f"ex{i:05d}",
            fps=spec.fps,
            channels=channels,
        )
        participant = i * n_participants // spec.n_samples
        first_of_participant = (
            participant * spec.n_samples + n_participants - 1
        ) // n_participants
        within = i - first_of_participant
        per_participant = (spec.n_samples + n_participants - 1) // n_participants
        session = min(5, within * 6 // max(per_participant, 1))
        record = ExchangeRecord(
            participant_id=f"p{participant:03d}",
            session_id=f"s{session}",
            exchange_index=within,
            mistake_label=label,
            stream=stream,
        )
        planted = tuple(sorted(centers)) if spec.regime == "fixtures" else None
        yield record, planted


def generate(spec: GenSpec) -> GeneratedDataset:
    """Materialize the whole dataset; deterministic for a fixed seed."""
    records = []
    annotations: dict[str, tuple[int, ...]] = {}
    for record, planted in iter_exchanges(spec):
        records.append(record)
        if planted is not None:
            annotations[record.stream.source_id] = planted
    return GeneratedDataset(
        spec=spec,
        records=records,
        annotations=annotations if spec.regime == "fixtures" else None,
    )


def plant_report(dataset: GeneratedDataset) -> list[tuple[str, list[int]]]:
    """Annotation entries (stream reference, planted frames) for fixtures."""
    if dataset.spec.regime != "fixtures" or dataset.annotations is None:
        raise DataError("plant_report requires a fixtures-regime dataset")
    entries = []
    for record in dataset.records:
        sid = record.stream.source_id if record.stream else record.stream_path
        frames = dataset.annotations.get(sid, ())
        ref = record.stream_path if record.stream_path else sid
        entries.append((ref, list(frames)))
    return entries
