import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import ConfigError, ParseError, ValidationError
from core.skeleton_io import (KINECT_PARTS, NUM_JOINTS, GroundTruthSegment, SkeletonSequence,
                              SynthConfig, generate_synthetic, parse_label_file,
                              parse_skeleton_file, render_label_file, render_skeleton_file)


def _line(p1=None, p2=None) -> str:
    values = list(p1 if p1 is not None else [0] * 75) + list(p2 if p2 is not None else [0] * 75)
    return " ".join(str(v) for v in values)


# ── parse_skeleton_file ───────────────────────────────────────────────────────

def test_all_zero_line_is_two_absent_persons():
    seq = parse_skeleton_file(_line())
    assert len(seq) == 1
    assert seq.frame(0).persons == (None, None)


def test_person_one_present_person_two_absent():
    seq = parse_skeleton_file(_line(p1=[0.1, 0.2, 0.3] * 25))
    p1, p2 = seq.frame(0).persons
    assert p2 is None
    np.testing.assert_array_equal(p1[0], [0.1, 0.2, 0.3])
    assert p1.shape == (NUM_JOINTS, 3)


def test_three_lines_give_three_frames():
    text = "\n".join([_line(p1=[1.0] * 75), _line(p1=[2.0] * 75), _line(p1=[3.0] * 75)]) + "\n"
    seq = parse_skeleton_file(text)
    assert len(seq) == 3
    assert [f.persons[0][0, 0] for f in seq.frames] == [1.0, 2.0, 3.0]


def test_blank_lines_are_skipped():
    seq = parse_skeleton_file("\n" + _line(p1=[1.0] * 75) + "\n\n")
    assert len(seq) == 1


def test_wrong_field_count_reports_line():
    text = _line() + "\n" + "1 2 3\n"
    with pytest.raises(ParseError) as exc:
        parse_skeleton_file(text)
    assert exc.value.line_no == 2
    assert "line 2" in str(exc.value)


def test_non_numeric_token():
    tokens = _line().split()
    tokens[10] = "abc"
    with pytest.raises(ParseError) as exc:
        parse_skeleton_file(" ".join(tokens))
    assert exc.value.line_no == 1


def test_accepts_line_iterables():
    seq = parse_skeleton_file(iter([_line(p1=[1.0] * 75) + "\n"]))
    assert len(seq) == 1


# ── parse_label_file ──────────────────────────────────────────────────────────

def test_label_is_converted_to_zero_based():
    assert parse_label_file("2,10,50,1") == [GroundTruthSegment(1, 10, 50, 1.0)]


def test_empty_label_file():
    assert parse_label_file("") == []


def test_reversed_segment_is_validation_error():
    with pytest.raises(ValidationError) as exc:
        parse_label_file("1,0,5,1\n3,50,10,1\n")
    assert exc.value.line_no == 2


def test_non_numeric_label_field():
    with pytest.raises(ParseError):
        parse_label_file("x,1,2,1")


def test_label_zero_rejected_in_one_based_files():
    with pytest.raises(ValidationError):
        parse_label_file("0,1,2,1")


# ── Round trip writer/parser ──────────────────────────────────────────────────

@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
def test_render_then_parse_is_identity(n_frames, seed):
    rng = np.random.default_rng(seed)
    coords = rng.normal(size=(n_frames, 2, NUM_JOINTS, 3))
    present = rng.random((n_frames, 2)) < 0.7
    seq = SkeletonSequence(coords=coords, present=present)
    assert parse_skeleton_file(render_skeleton_file(seq)) == seq


def test_label_round_trip():
    segs = [GroundTruthSegment(0, 1, 9, 1.0), GroundTruthSegment(4, 20, 31, 0.5)]
    assert parse_label_file(render_label_file(segs)) == segs


# ── GroundTruthSegment ────────────────────────────────────────────────────────

@pytest.mark.parametrize("label,start,end,conf", [(-1, 0, 5, 1.0), (0, 5, 5, 1.0),
                                                  (0, -1, 5, 1.0), (0, 0, 5, 1.5)])
def test_segment_invariants(label, start, end, conf):
    with pytest.raises(ValidationError):
        GroundTruthSegment(label, start, end, conf)


def test_segment_outside_sequence():
    with pytest.raises(ValidationError):
        GroundTruthSegment(0, 90, 110).check_within(100)


# ── Dados sintéticos ──────────────────────────────────────────────────────────

def test_generation_is_deterministic():
    cfg = SynthConfig(num_sequences=3, seed=11)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    for (sa, ga), (sb, gb) in zip(a, b):
        assert sa == sb
        assert ga == gb


def test_zero_sequences():
    assert generate_synthetic(SynthConfig(num_sequences=0)) == []


def test_generated_segments_are_valid_and_disjoint():
    data = generate_synthetic(SynthConfig(num_classes=3, num_sequences=10, seed=7))
    assert len(data) == 10
    for seq, segs in data:
        assert 1 <= len(segs) <= 3
        spans = sorted((s.start, s.end) for s in segs)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            assert end <= start
        for s in segs:
            assert s.label in {0, 1, 2}
            s.check_within(len(seq))
            assert s.video_id == seq.source_id


def test_adding_sequences_keeps_earlier_ones():
    short = generate_synthetic(SynthConfig(num_sequences=2, seed=5))
    long = generate_synthetic(SynthConfig(num_sequences=4, seed=5))
    assert short[0][0] == long[0][0]
    assert short[1][1] == long[1][1]


def test_segment_longer_than_sequence_is_config_error():
    with pytest.raises(ConfigError):
        SynthConfig(seq_len_range=(50, 100), segment_len_range=(10, 60)).validate()


def test_kinect_parts_cover_all_joints():
    joints = [j for chain in KINECT_PARTS.values() for j in chain]
    assert sorted(joints) == list(range(NUM_JOINTS))
