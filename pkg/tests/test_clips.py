import math

import numpy as np
import pytest

from miscue.clips import (
    assemble_compilation,
    clip_window,
    extract_clip,
    read_clip_manifest,
    split_into_moment_samples,
    write_clip_manifest,
)
from miscue.errors import DataError
from miscue.salience import SalienceMethod, SalientMoment

from .conftest import make_stream


def moment(frame):
    return SalientMoment(frame_index=frame, score=1.0, method=SalienceMethod.KEYPOINT_TOPK)


class TestClipWindow:
    def test_centered_window(self):
        assert clip_window(400, 150, 60) == (120, 180)

    def test_shifted_inward_at_start(self):
        assert clip_window(400, 5, 60) == (0, 60)

    def test_shifted_inward_at_end(self):
        assert clip_window(400, 395, 60) == (340, 400)

    def test_short_stream_returns_whole(self):
        assert clip_window(40, 20, 60) == (0, 40)

    def test_moment_outside_stream(self):
        with pytest.raises(DataError, match="outside"):
            clip_window(100, 100, 60)


class TestExtractClip:
    def test_frames_carry_source_indices(self):
        stream = make_stream(400)
        frames = extract_clip(stream, moment(150), context=60)
        assert [f.index for f in frames] == list(range(120, 180))

    def test_boundary_clamp(self):
        stream = make_stream(400)
        frames = extract_clip(stream, moment(5), context=60)
        assert [f.index for f in frames] == list(range(0, 60))

    def test_whole_stream_fallback(self):
        stream = make_stream(40)
        frames = extract_clip(stream, moment(20), context=60)
        assert len(frames) == 40


class TestAssembleCompilation:
    def test_three_moments_no_decimation(self):
        stream = make_stream(400)
        comp = assemble_compilation(stream, [moment(f) for f in (60, 180, 300)], 60, 1)
        assert len(comp) == 180
        assert comp.decimation == 1
        assert comp.provenance == ((60, 30, 90), (180, 150, 210), (300, 270, 330))

    def test_decimation_by_five(self):
        stream = make_stream(400)
        comp = assemble_compilation(stream, [moment(f) for f in (60, 180, 300)], 60, 5)
        assert len(comp) == 36

    def test_single_moment_extreme_decimation(self):
        stream = make_stream(400)
        comp = assemble_compilation(stream, [moment(200)], 60, 60)
        assert len(comp) == 1

    def test_decimation_identity(self):
        stream = make_stream(200, seed=5)
        comp = assemble_compilation(stream, [moment(100)], 60, 1)
        expected = stream.channels["blendshapes"][70:130]
        assert np.array_equal(comp.stream.channels["blendshapes"], expected)

    def test_decimation_keeps_every_nth_of_concatenation(self):
        stream = make_stream(300, seed=2)
        moments = [moment(f) for f in (50, 200)]
        raw = np.concatenate(
            [stream.channels["blendshapes"][20:80], stream.channels["blendshapes"][170:230]]
        )
        comp = assemble_compilation(stream, moments, 60, 7)
        assert np.array_equal(comp.stream.channels["blendshapes"], raw[::7])
        assert len(comp) == math.ceil(120 / 7)

    def test_overlapping_moments_duplicate_frames(self):
        stream = make_stream(200, seed=3)
        comp = assemble_compilation(stream, [moment(100), moment(110)], 60, 1)
        assert len(comp) == 120
        # both windows contain source frames 80..129
        a = stream.channels["blendshapes"][70:130]
        b = stream.channels["blendshapes"][80:140]
        assert np.array_equal(comp.stream.channels["blendshapes"], np.concatenate([a, b]))

    def test_unsorted_moments_are_ordered(self):
        stream = make_stream(400)
        comp = assemble_compilation(stream, [moment(300), moment(60)], 60, 1)
        assert comp.provenance[0][0] == 60

    def test_label_and_source_id(self):
        stream = make_stream(100, source_id="ex42")
        comp = assemble_compilation(stream, [moment(50)], 60, 2, label=True)
        assert comp.label is True
        assert comp.source_id == "ex42"

    def test_output_fps_reflects_decimation(self):
        stream = make_stream(400, fps=60)
        comp = assemble_compilation(stream, [moment(100)], 60, 5)
        assert comp.stream.fps == 12.0

    def test_empty_moments_error(self):
        stream = make_stream(100)
        with pytest.raises(DataError, match="zero moments"):
            assemble_compilation(stream, [], 60, 1)

    def test_provenance_partitions_concatenation(self):
        stream = make_stream(400, seed=4)
        moments = [moment(f) for f in (60, 180, 300)]
        comp = assemble_compilation(stream, moments, 60, 5)
        window_lengths = [e - s for _, s, e in comp.provenance]
        raw_len = sum(window_lengths)
        assert len(comp) == math.ceil(raw_len / comp.decimation)
        # every output frame maps to exactly one provenance window
        bounds = np.cumsum([0] + window_lengths)
        for out_pos in range(len(comp)):
            concat_pos = out_pos * comp.decimation
            owners = [
                i for i in range(len(moments)) if bounds[i] <= concat_pos < bounds[i + 1]
            ]
            assert len(owners) == 1


class TestSplitIntoMomentSamples:
    def test_three_moments_three_samples(self):
        stream = make_stream(400)
        for n in (1, 4, 5):
            comps = split_into_moment_samples(
                stream, [moment(f) for f in (60, 180, 300)], 60, n, label=True
            )
            assert len(comps) == 3
            assert all(len(c) == math.ceil(60 / n) for c in comps)

    def test_zero_moments_empty_list(self):
        stream = make_stream(400)
        assert split_into_moment_samples(stream, [], 60, 5, label=False) == []

    def test_labels_inherited(self):
        stream = make_stream(400)
        for label in (True, False, None):
            comps = split_into_moment_samples(stream, [moment(60)], 60, 5, label=label)
            assert all(c.label is label for c in comps)


def test_clip_manifest_round_trip(tmp_path):
    entries = [
        {
            "participant_id": "p0",
            "session_id": "s0",
            "exchange_index": 3,
            "sample_index": 0,
            "label": True,
            "clip_path": "clips/p0_s0_3_0.fstream",
            "decimation": 5,
            "provenance": [[60, 30, 90]],
        }
    ]
    path = tmp_path / "clips_manifest.jsonl"
    write_clip_manifest(entries, path)
    assert read_clip_manifest(path) == entries
