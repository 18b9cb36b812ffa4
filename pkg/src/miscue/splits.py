"""Participant-grouped stratified splitting into train/validation/test.

Every participant's exchanges land in exactly one subset, so no person
leaks across the split boundary, while subset sample fractions and
positive-label rates track their targets.  The assignment is a pure
function of (records, fractions, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .streams import ExchangeRecord

SUBSETS = ("train", "validation", "test")

# Weight of the positive-rate deviation relative to the fill-ratio term
# in the greedy assignment score.
_RATE_WEIGHT = 0.5


@dataclass(frozen=True)
class SplitAssignment:
    """Mapping of participant id to subset, plus the targeted fractions."""

    by_participant: dict[str, str]
    target_fractions: tuple[float, float, float]

    def subset_of(self, participant_id: str) -> str:
        try:
            return self.by_participant[participant_id]
        except KeyError:
            raise DataError(f"participant {participant_id!r} is not in the split") from None

    def split_records(
        self, records: list[ExchangeRecord]
    ) -> dict[str, list[ExchangeRecord]]:
        out: dict[str, list[ExchangeRecord]] = {name: [] for name in SUBSETS}
        for rec in records:
            out[self.subset_of(rec.participant_id)].append(rec)
        return out

    def summarize(self, records: list[ExchangeRecord]) -> dict[str, dict[str, float]]:
        """Per-subset sample counts, sample fractions and positive rates."""
        total = len(records)
        by_subset = self.split_records(records)
        summary = {}
        for name in SUBSETS:
            recs = by_subset[name]
            n = len(recs)
            pos = sum(1 for r in recs if r.mistake_label)
            summary[name] = {
                "samples": float(n),
                "sample_fraction": n / total if total else 0.0,
                "positive_rate": pos / n if n else 0.0,
            }
        return summary


def make_splits(
    records: list[ExchangeRecord],
    fractions: tuple[float, float, float],
    seed: int,
) -> SplitAssignment:
    """Assign participants to train/validation/test greedily.

    Participants are shuffled by ``seed`` and assigned one by one to the
    subset with the lowest score, where the score combines the subset's
    fill ratio against its sample target with the deviation of its
    positive rate from the global rate.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != len(SUBSETS):
        raise DataError(f"expected {len(SUBSETS)} fractions, got {len(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {sum(fractions)!r}")
    if any(f <= 0.0 for f in fractions):
        raise DataError("degenerate fraction: every subset needs a positive target")
    if seed < 0:
        raise DataError("seed must be non-negative")
    if not records:
        raise DataError("cannot split an empty dataset")

    sizes: dict[str, int] = {}
    positives: dict[str, int] = {}
    for rec in records:
        sizes[rec.participant_id] = sizes.get(rec.participant_id, 0) + 1
        positives[rec.participant_id] = positives.get(rec.participant_id, 0) + int(
            rec.mistake_label
        )
    participants = sorted(sizes)
    if len(participants) < len(SUBSETS):
        raise DataError(
            f"need at least {len(SUBSETS)} participants, got {len(participants)}"
        )

    total = len(records)
    global_rate = sum(positives.values()) / total
    rng = np.random.default_rng(seed)
    order = [participants[i] for i in rng.permutation(len(participants))]

    counts = {name: 0 for name in SUBSETS}
    pos_counts = {name: 0 for name in SUBSETS}
    assignment: dict[str, str] = {}
    for pid in order:
        n_p = sizes[pid]
        pos_p = positives[pid]
        best_name = None
        best_score = None
        for name, target in zip(SUBSETS, fractions):
            new_count = counts[name] + n_p
            fill = new_count / (target * total)
            rate_dev = abs((pos_counts[name] + pos_p) / new_count - global_rate)
            score = fill + _RATE_WEIGHT * rate_dev
            if best_score is None or score < best_score - 1e-12:
                best_score = score
                best_name = name
        assert best_name is not None
        assignment[pid] = best_name
        counts[best_name] += n_p
        pos_counts[best_name] += pos_p

    return SplitAssignment(
        by_participant={pid: assignment[pid] for pid in participants},
        target_fractions=fractions,  # type: ignore[arg-type]
    )
