import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.encoding import ActionImage, ColumnMap
from core.errors import ConfigError, ValidationError
from core.priors import (DEFAULT_ASPECT_RATIOS, Box, BoxOffsets, MatchResult, PriorConfig,
                         box_to_interval, decode_offsets, decode_offsets_array, encode_offsets,
                         encode_offsets_array, generate_priors, gt_segment_to_box,
                         hard_negative_mine, iou_box, iou_interval, iou_matrix,
                         iter_prior_records, match_gt, segments_to_boxes)
from core.skeleton_io import GroundTruthSegment


def _img(source_len: int = 100, width: int = 100) -> ActionImage:
    scale = source_len / width
    return ActionImage(np.zeros((50, width, 3), np.uint8), 1, ColumnMap(scale=scale), source_len)


boxes = st.builds(
    Box,
    cx=st.floats(0.0, 1.0), cy=st.floats(0.0, 1.0),
    w=st.floats(0.01, 2.0), h=st.floats(0.01, 2.0),
)


# ── generate_priors ───────────────────────────────────────────────────────────

def test_prior_count_single_layer():
    priors = generate_priors(PriorConfig(DEFAULT_ASPECT_RATIOS, (0.2,), ((1, 8),)))
    assert priors.shape == (72, 4)


def test_prior_count_is_sum_over_layers():
    shapes = ((12, 16), (12, 8), (6, 2), (3, 1))
    cfg = PriorConfig(DEFAULT_ASPECT_RATIOS, (0.2, 0.4, 0.6, 0.8), shapes)
    assert generate_priors(cfg).shape[0] == sum(r * c for r, c in shapes) * 9 == cfg.num_priors


def test_unit_ratio_is_square():
    priors = generate_priors(PriorConfig((1.0,), (0.3,), ((1, 1),)))
    assert priors[0, 2] == priors[0, 3] == 0.3


def test_ratio_four():
    priors = generate_priors(PriorConfig((4.0,), (0.2,), ((1, 1),)))
    assert priors[0, 2] == pytest.approx(0.4)
    assert priors[0, 3] == pytest.approx(0.1)


def test_prior_ordering_layer_row_ratio():
    cfg = PriorConfig((0.5, 2.0), (0.2, 0.6), ((2, 2), (1, 1)))
    records = list(iter_prior_records(cfg))
    assert [(l, r, c, a) for l, r, c, a, *_ in records[:4]] == [
        (0, 0, 0, 0.5), (0, 0, 0, 2.0), (0, 0, 1, 0.5), (0, 0, 1, 2.0)]
    assert records[0][4:6] == (0.25, 0.25)
    assert records[-1][:3] == (1, 0, 0)


@pytest.mark.parametrize("scales", [(0.4, 0.2), (0.0, 0.5), (0.5, 1.2)])
def test_invalid_scales(scales):
    with pytest.raises(ConfigError):
        generate_priors(PriorConfig((1.0,), scales, ((1, 2), (1, 1))))


# ── IoU ───────────────────────────────────────────────────────────────────────

def test_iou_box_examples():
    a = Box(0.5, 0.5, 1.0, 1.0)
    assert iou_box(a, a) == 1.0
    assert iou_box(a, Box(5.0, 5.0, 1.0, 1.0)) == 0.0
    assert iou_box(a, Box(1.0, 0.5, 1.0, 1.0)) == pytest.approx(1 / 3)


def test_iou_interval_examples():
    assert iou_interval((0, 10), (5, 15)) == pytest.approx(1 / 3)
    assert iou_interval((2, 7), (2, 7)) == 1.0
    assert iou_interval((0, 5), (5, 9)) == 0.0


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_iou_box_symmetric_and_bounded(a, b):
    ab, ba = iou_box(a, b), iou_box(b, a)
    assert ab == pytest.approx(ba)
    assert 0.0 <= ab <= 1.0 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100), st.integers(1, 50), st.integers(0, 100), st.integers(1, 50))
def test_iou_interval_symmetric(s1, l1, s2, l2):
    a, b = (s1, s1 + l1), (s2, s2 + l2)
    assert iou_interval(a, b) == iou_interval(b, a)
    assert 0.0 <= iou_interval(a, b) <= 1.0
    assert (iou_interval(a, b) == 1.0) == (a == b)


# ── match_gt ──────────────────────────────────────────────────────────────────

def test_single_gt_equal_to_one_prior():
    priors = np.array([[0.1 + 0.2 * i, 0.5, 0.1, 1.0] for i in range(5)])
    match = match_gt(priors, priors[3:4], 0.5)
    assert match.gt_index.tolist() == [-1, -1, -1, 0, -1]
    assert match.best_prior.tolist() == [3]


def test_stage_one_takes_best_and_threshold_filters_rest():
    gt = np.array([[0.5, 0.5, 0.2, 1.0]])
    # IoU 0.6 e 0.4 com o gt (mesma altura, largura maior e centrada)
    a = [0.5, 0.5, 0.2 / 0.6, 1.0]
    b = [0.5, 0.5, 0.2 / 0.4, 1.0]
    match = match_gt(np.array([b, a]), gt, 0.5)
    assert match.iou[1] == pytest.approx(0.6)
    assert match.gt_index.tolist() == [-1, 0]


def test_conflict_earlier_gt_wins():
    priors = np.array([[0.5, 0.5, 0.2, 1.0], [0.55, 0.5, 0.2, 1.0], [0.9, 0.5, 0.1, 1.0]])
    gts = np.array([[0.5, 0.5, 0.2, 1.0], [0.51, 0.5, 0.2, 1.0]])
    match = match_gt(priors, gts, 0.99)
    assert match.best_prior.tolist() == [0, 1]
    assert match.gt_index.tolist() == [0, 1, -1]


def test_more_gts_than_priors_never_steals_a_prior():
    priors = np.array([[0.5, 0.5, 0.2, 1.0]])
    gts = np.array([[0.5, 0.5, 0.2, 1.0], [0.52, 0.5, 0.2, 1.0]])
    match = match_gt(priors, gts, 0.5)
    assert match.gt_index.tolist() == [0]
    assert match.best_prior.tolist() == [0, -1]
    assert match.iou[0] == pytest.approx(1.0)


def test_stage_one_assignments_survive_extra_gts():
    rng = np.random.default_rng(3)
    for _ in range(50):
        priors = np.column_stack([rng.random(3), np.full(3, 0.5), rng.uniform(0.1, 0.5, 3), np.ones(3)])
        gts = np.column_stack([rng.random(6), np.full(6, 0.5), rng.uniform(0.1, 0.5, 6), np.ones(6)])
        match = match_gt(priors, gts, 0.5)
        taken = match.best_prior[:3]
        assert sorted(taken.tolist()) == [0, 1, 2]
        assert match.best_prior[3:].tolist() == [-1, -1, -1]
        assert match.gt_index[taken].tolist() == [0, 1, 2]


def test_no_gts_leaves_everything_unmatched():
    match = match_gt(np.random.default_rng(0).random((6, 4)) + 0.1, np.zeros((0, 4)), 0.5)
    assert match.num_matched == 0


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2])
def test_threshold_must_be_open_unit_interval(threshold):
    with pytest.raises(ValidationError):
        match_gt(np.ones((1, 4)), np.ones((1, 4)), threshold)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_every_gt_gets_a_prior(seed, threshold):
    rng = np.random.default_rng(seed)
    priors = np.column_stack([rng.random(40), rng.random(40), rng.uniform(0.05, 0.5, 40),
                              rng.uniform(0.05, 1.0, 40)])
    gts = np.column_stack([rng.random(4), np.full(4, 0.5), rng.uniform(0.05, 0.5, 4), np.ones(4)])
    match = match_gt(priors, gts, threshold)
    assert sorted(set(match.gt_index[match.gt_index >= 0].tolist())) == [0, 1, 2, 3]
    assert len(set(match.best_prior.tolist())) == 4


# ── Offsets ───────────────────────────────────────────────────────────────────

def test_offsets_identity():
    p = Box(0.3, 0.5, 0.2, 0.7)
    assert encode_offsets(p, p) == BoxOffsets(0.0, 0.0, 0.0, 0.0)
    assert decode_offsets(p, BoxOffsets(0.0, 0.0, 0.0, 0.0)) == p


def test_offsets_formula():
    t = encode_offsets(Box(0.5, 0.5, 0.2, 1.0), Box(0.6, 0.5, 0.4, 1.0))
    assert t.t_cx == pytest.approx(0.5)
    assert t.t_w == pytest.approx(math.log(2))
    assert decode_offsets(Box(0.5, 0.5, 0.2, 1.0), BoxOffsets(0, 0, math.log(2), 0)).w == pytest.approx(0.4)


def test_offset_round_trip_on_many_boxes():
    rng = np.random.default_rng(2024)
    n = 10_000
    priors = np.column_stack([rng.random(n), rng.random(n), rng.uniform(0.01, 1, n), rng.uniform(0.01, 1, n)])
    gts = np.column_stack([rng.random(n), rng.random(n), rng.uniform(0.01, 1, n), rng.uniform(0.01, 1, n)])
    back = decode_offsets_array(priors, encode_offsets_array(priors, gts))
    rel = np.abs(back - gts) / np.maximum(np.abs(gts), 1e-3)
    assert rel.max() < 1e-12


# ── Mineração ─────────────────────────────────────────────────────────────────

def _match(gt_index):
    gt_index = np.asarray(gt_index)
    return MatchResult(gt_index, np.zeros(gt_index.size))


def test_mining_quota():
    match = _match([0, 0] + [-1] * 10)
    losses = np.arange(12, dtype=float)
    neg = hard_negative_mine(losses, match, 3.0)
    assert neg.tolist() == [11, 10, 9, 8, 7, 6]


def test_mining_without_positives():
    assert hard_negative_mine(np.ones(5), _match([-1] * 5), 3.0).size == 0


def test_mining_keeps_all_when_short():
    neg = hard_negative_mine(np.ones(4), _match([0, 1, -1, -1]), 3.0)
    assert neg.tolist() == [2, 3]


def test_mining_ties_break_by_index_and_skip_matched():
    match = _match([-1, 0, -1, -1, -1])
    neg = hard_negative_mine(np.array([1.0, 9.0, 1.0, 2.0, 1.0]), match, 2.0)
    assert neg.tolist() == [3, 0]


# ── Segmento ↔ caixa ──────────────────────────────────────────────────────────

def test_full_segment_box():
    box = gt_segment_to_box(GroundTruthSegment(0, 0, 100), _img())
    assert box == Box(0.5, 0.5, 1.0, 1.0)


def test_segment_box_affine():
    box = gt_segment_to_box(GroundTruthSegment(0, 25, 75), _img())
    assert box.cx == pytest.approx(0.5)
    assert box.w == pytest.approx(0.5)


def test_disjoint_segments_disjoint_boxes():
    arr = segments_to_boxes([GroundTruthSegment(0, 0, 30), GroundTruthSegment(1, 50, 90)], _img(437, 512))
    assert arr[0, 0] + arr[0, 2] / 2 <= arr[1, 0] - arr[1, 2] / 2 + 1e-12


def test_segment_outside_sequence():
    with pytest.raises(ValidationError):
        gt_segment_to_box(GroundTruthSegment(0, 90, 120), _img())


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 600), st.sampled_from([64, 128, 256, 512]), st.data())
def test_segment_box_interval_round_trip(source_len, width, data):
    start = data.draw(st.integers(0, source_len - 1))
    end = data.draw(st.integers(start + 1, source_len))
    img = _img(source_len, width)
    box = gt_segment_to_box(GroundTruthSegment(0, start, end), img)
    s, e = box_to_interval(box.to_array(), img)
    assert abs(s - start) <= 1
    assert abs(e - end) <= 1
