"""Salient-moment extraction from facial feature streams.

Three methods turn a stream into candidate frames of significant facial
movement:

* ``blendshape-peak``: smooth each blendshape channel, sum them into one
  scalar signal, and run a causal peak detector on it.
* ``keypoint-peak``: smooth the summed squared frame-to-frame keypoint
  displacement and run the same peak detector.
* ``keypoint-topk``: greedily pick the k highest-valued frames of the
  displacement signal subject to a minimum mutual separation.

Predicted moments are scored against annotated frames by a greedy
one-to-one matching within a frame tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError
from .streams import FeatureStream


class SalienceMethod(str, Enum):
    BLENDSHAPE_PEAK = "blendshape-peak"
    KEYPOINT_PEAK = "keypoint-peak"
    KEYPOINT_TOPK = "keypoint-topk"


@dataclass(frozen=True)
class SalientMoment:
    """A single frame flagged as salient, with the signal value there."""

    frame_index: int
    score: float
    method: SalienceMethod


@dataclass(frozen=True)
class PeakDetectorParams:
    """Tuning of the causal peak detector.

    ``lag`` is the history window in frames, ``threshold`` the deviation
    multiplier, and ``influence`` the weight of flagged points in the
    running statistics.  Defaults are the customary values for this
    detector family (2 s of history at 60 fps); tune per dataset.
    """

    lag: int = 120
    threshold: float = 3.0
    influence: float = 0.1

    def __post_init__(self) -> None:
        if self.lag < 2:
            raise DataError(f"lag must be at least 2, got {self.lag}")
        if not self.threshold > 0:
            raise DataError(f"threshold must be positive, got {self.threshold}")
        if not 0.0 <= self.influence <= 1.0:
            raise DataError(f"influence must be in [0, 1], got {self.influence}")


@dataclass(frozen=True)
class MatchReport:
    """Outcome of matching predicted moments against annotated frames."""

    matched_pairs: tuple[tuple[int, int], ...]
    recall: float
    precision: float
    tolerance_frames: int
    n_predicted: int
    n_annotated: int


def moving_average(signal, window: int) -> np.ndarray:
    """Same-length windowed mean with edge-replication padding.

    A constant signal stays constant, including at the boundaries.
    """
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim != 1:
        raise DataError("signal must be one-dimensional")
    if sig.size == 0:
        raise DataError("signal must be non-empty")
    if window < 1:
        raise DataError(f"window must be at least 1, got {window}")
    if window == 1:
        return sig.copy()
    left = window // 2
    right = window - 1 - left
    padded = np.pad(sig, (left, right), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    return windows.mean(axis=-1)


def blendshape_sum_signal(stream: FeatureStream, window: int = 45) -> np.ndarray:
    """Smooth each blendshape channel, then sum them into one signal."""
    if "blendshapes" not in stream.channels:
        raise DataError("stream has no blendshapes channel")
    values = stream.channels["blendshapes"]
    if values.shape[0] == 0:
        raise DataError("signal must be non-empty")
    smoothed = smooth_columns(values, window)
    return smoothed.sum(axis=1)


def keypoint_displacement_signal(stream: FeatureStream, window: int = 45) -> np.ndarray:
    """Smoothed sum over keypoints of squared distance to the previous frame.

    The first frame has no predecessor and contributes zero.
    """
    if "keypoints" not in stream.channels:
        raise DataError("stream has no keypoints channel")
    points = stream.channels["keypoints"]
    if points.shape[0] < 2:
        raise DataError("displacement needs at least 2 frames")
    deltas = np.diff(points, axis=0)
    raw = np.concatenate([[0.0], np.sum(deltas * deltas, axis=1)])
    return moving_average(raw, window)


def smooth_columns(values: np.ndarray, window: int) -> np.ndarray:
    """Column-wise :func:`moving_average` of a (frames, channels) array."""
    if window < 1:
        raise DataError(f"window must be at least 1, got {window}")
    if window == 1:
        return np.asarray(values, dtype=np.float64)
    left = window // 2
    right = window - 1 - left
    padded = np.pad(values, ((left, right), (0, 0)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, window, axis=0)
    return windows.mean(axis=-1)


def peak_flags(signal, params: PeakDetectorParams) -> np.ndarray:
    """Per-frame salience decisions of the causal peak detector.

    At each frame ``t >= lag`` the mean and (population) standard
    deviation of the filtered history over the previous ``lag`` frames
    set the threshold; the frame is flagged when the raw signal exceeds
    it upward.  Flagged frames enter the filtered history with weight
    ``influence`` only, so a sustained peak does not drag the threshold
    up after it.  Decisions at ``t`` depend only on frames ``<= t``.
    """
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim != 1:
        raise DataError("signal must be one-dimensional")
    n = sig.size
    if n <= params.lag:
        raise DataError(f"signal too short: need more than lag={params.lag} frames")
    filtered = sig.copy()
    flags = np.zeros(n, dtype=bool)
    for t in range(params.lag, n):
        history = filtered[t - params.lag : t]
        mean = history.mean()
        std = history.std()
        if (sig[t] - mean) > params.threshold * std:
            flags[t] = True
            filtered[t] = params.influence * sig[t] + (1.0 - params.influence) * filtered[t - 1]
    return flags


def detect_peaks_realtime(
    signal,
    params: PeakDetectorParams,
    method: SalienceMethod = SalienceMethod.BLENDSHAPE_PEAK,
) -> list[SalientMoment]:
    """Run the causal peak detector and merge runs of flagged frames.

    Each maximal run of consecutive flagged frames becomes one moment at
    the run's highest-signal frame (earliest such frame on ties).
    """
    sig = np.asarray(signal, dtype=np.float64)
    flags = peak_flags(sig, params)
    moments: list[SalientMoment] = []
    t = 0
    n = flags.size
    while t < n:
        if not flags[t]:
            t += 1
            continue
        start = t
        while t < n and flags[t]:
            t += 1
        run = sig[start:t]
        peak = start + int(np.argmax(run))
        moments.append(SalientMoment(frame_index=peak, score=float(sig[peak]), method=method))
    return moments


def select_top_k(
    signal,
    k: int,
    min_separation: int,
    method: SalienceMethod = SalienceMethod.KEYPOINT_TOPK,
) -> list[SalientMoment]:
    """Greedy top-k frames by signal value with a minimum separation.

    Frames are considered in descending value order (earlier frame wins
    ties) and skipped when closer than ``min_separation`` to an already
    selected frame.  Short signals yield fewer than ``k`` moments.
    """
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim != 1 or sig.size == 0:
        raise DataError("signal must be a non-empty 1-d sequence")
    if k < 1:
        raise DataError(f"k must be at least 1, got {k}")
    if min_separation < 1:
        raise DataError(f"min_separation must be at least 1, got {min_separation}")
    order = np.lexsort((np.arange(sig.size), -sig))
    selected: list[int] = []
    for frame in order:
        if len(selected) >= k:
            break
        if all(abs(int(frame) - s) >= min_separation for s in selected):
            selected.append(int(frame))
    return [
        SalientMoment(frame_index=f, score=float(sig[f]), method=method)
        for f in sorted(selected)
    ]


def match_moments(
    predicted: list[SalientMoment],
    annotated: list[int],
    tolerance: int,
) -> MatchReport:
    """One-to-one greedy matching of predictions to annotations.

    Candidate pairs are taken in ascending frame-distance order (ties by
    position) and accepted when both sides are still unmatched and the
    distance is strictly below ``tolerance``.  Recall and precision are
    1.0 when their reference set is empty.
    """
    if tolerance < 0:
        raise DataError(f"tolerance must be non-negative, got {tolerance}")
    pred_frames = [m.frame_index for m in predicted]
    candidates = []
    for i, p in enumerate(pred_frames):
        for j, a in enumerate(annotated):
            dist = abs(p - a)
            if dist < tolerance:
                candidates.append((dist, i, j))
    candidates.sort()
    used_pred: set[int] = set()
    used_ann: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for _, i, j in candidates:
        if i in used_pred or j in used_ann:
            continue
        used_pred.add(i)
        used_ann.add(j)
        pairs.append((pred_frames[i], annotated[j]))
    pairs.sort()
    recall = len(pairs) / len(annotated) if annotated else 1.0
    precision = len(pairs) / len(pred_frames) if pred_frames else 1.0
    return MatchReport(
        matched_pairs=tuple(pairs),
        recall=recall,
        precision=precision,
        tolerance_frames=tolerance,
        n_predicted=len(pred_frames),
        n_annotated=len(annotated),
    )


def extract_moments(
    stream: FeatureStream,
    method: SalienceMethod | str,
    *,
    k: int = 3,
    min_separation: int = 60,
    window: int = 45,
    peak_params: PeakDetectorParams | None = None,
) -> list[SalientMoment]:
    """Dispatch to the salience method named by ``method``."""
    method = SalienceMethod(method)
    if method is SalienceMethod.BLENDSHAPE_PEAK:
        signal = blendshape_sum_signal(stream, window=window)
        return detect_peaks_realtime(signal, peak_params or PeakDetectorParams(), method)
    if method is SalienceMethod.KEYPOINT_PEAK:
        signal = keypoint_displacement_signal(stream, window=window)
        return detect_peaks_realtime(signal, peak_params or PeakDetectorParams(), method)
    signal = keypoint_displacement_signal(stream, window=window)
    return select_top_k(signal, k=k, min_separation=min_separation, method=method)


def write_annotations(entries: list[tuple[str, list[int]]], path: str | Path) -> None:
    """Write fixture annotations: one line per fragment."""
    lines = [
        json.dumps({"stream_path": ref, "frames": [int(f) for f in frames]},
                   separators=(",", ":"))
        for ref, frames in entries
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_annotations(path: str | Path) -> list[tuple[str, list[int]]]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            entries.append((str(obj["stream_path"]), [int(f) for f in obj["frames"]]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed annotation line {lineno}: {exc}") from exc
    return entries
