import numpy as np
import pytest

from miscue.errors import DataError
from miscue.splits import SUBSETS, SplitAssignment, make_splits
from miscue.streams import ExchangeRecord

FRACTIONS = (0.675, 0.225, 0.10)


def corpus_records(
    n_participants=40, per_participant=65, positive_rate=0.272, seed=7
):
    """Label-bearing records without streams; labels iid at the global rate."""
    rng = np.random.default_rng(seed)
    records = []
    for p in range(n_participants):
        for i in range(per_participant):
            records.append(
                ExchangeRecord(
                    participant_id=f"p{p:03d}",
                    session_id=f"s{i // 11}",
                    exchange_index=i,
                    mistake_label=bool(rng.random() < positive_rate),
                )
            )
    return records


class TestMakeSplits:
    def test_corpus_scale_within_tolerances(self):
        records = corpus_records()
        assignment = make_splits(records, FRACTIONS, seed=0)
        summary = assignment.summarize(records)
        global_rate = sum(r.mistake_label for r in records) / len(records)
        for name, target in zip(SUBSETS, FRACTIONS):
            assert abs(summary[name]["sample_fraction"] - target) <= 0.05
            assert abs(summary[name]["positive_rate"] - global_rate) <= 0.05

    def test_group_exclusivity(self):
        records = corpus_records(n_participants=12, per_participant=10)
        assignment = make_splits(records, FRACTIONS, seed=3)
        seen = {}
        for rec in records:
            subset = assignment.subset_of(rec.participant_id)
            assert seen.setdefault(rec.participant_id, subset) == subset
        assert set(assignment.by_participant) == {r.participant_id for r in records}

    def test_three_participants_one_each(self):
        records = corpus_records(n_participants=3, per_participant=5)
        assignment = make_splits(records, (1 / 3, 1 / 3, 1 / 3), seed=11)
        assert sorted(assignment.by_participant.values()) == sorted(SUBSETS)

    def test_deterministic_for_fixed_seed(self):
        records = corpus_records(n_participants=15)
        a = make_splits(records, FRACTIONS, seed=42)
        b = make_splits(records, FRACTIONS, seed=42)
        assert a == b
        c = make_splits(records, FRACTIONS, seed=43)
        assert a != c  # different shuffle should move someone

    def test_heterogeneous_participant_rates_still_balanced(self):
        # Participants with very different personal rates but a stable mean.
        rng = np.random.default_rng(5)
        records = []
        for p in range(30):
            rate = rng.uniform(0.05, 0.5)
            for i in range(60):
                records.append(
                    ExchangeRecord(f"p{p}", "s0", i, bool(rng.random() < rate))
                )
        assignment = make_splits(records, FRACTIONS, seed=1)
        summary = assignment.summarize(records)
        global_rate = sum(r.mistake_label for r in records) / len(records)
        for name, target in zip(SUBSETS, FRACTIONS):
            assert abs(summary[name]["sample_fraction"] - target) <= 0.05
            assert abs(summary[name]["positive_rate"] - global_rate) <= 0.05

    def test_errors(self):
        records = corpus_records(n_participants=2)
        with pytest.raises(DataError, match="participants"):
            make_splits(records, FRACTIONS, seed=0)
        records = corpus_records(n_participants=5)
        with pytest.raises(DataError, match="sum to 1"):
            make_splits(records, (0.7, 0.2, 0.2), seed=0)
        with pytest.raises(DataError, match="degenerate"):
            make_splits(records, (0.9, 0.1, 0.0), seed=0)
        with pytest.raises(DataError, match="empty"):
            make_splits([], FRACTIONS, seed=0)
        with pytest.raises(DataError, match="seed"):
            make_splits(records, FRACTIONS, seed=-3)

    def test_unknown_participant_lookup(self):
        assignment = SplitAssignment({"p0": "train"}, FRACTIONS)
        with pytest.raises(DataError, match="not in the split"):
            assignment.subset_of("p1")
