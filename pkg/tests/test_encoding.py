import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_sequence
from core.encoding import (DEFAULT_JOINT_ORDER, ActionImage, ColumnMap, DatasetStats,
                           JointOrder, compute_dataset_stats, encode_for_detector,
                           encode_global, encode_invariant, letterbox_rows, load_action_image,
                           resample_width, save_action_image)
from core.errors import DegenerateStatsError, EmptyDatasetError, ValidationError
from core.skeleton_io import NUM_JOINTS, SkeletonSequence

ORDER = DEFAULT_JOINT_ORDER


def _dyadic_sequence(seed: int, n_frames: int = 8) -> SkeletonSequence:
    """Coordenadas múltiplas de 2⁻⁸ em [-4, 4]: somas e escalas por 2^k são exatas."""
    rng = np.random.default_rng(seed)
    coords = rng.integers(-1024, 1025, size=(n_frames, NUM_JOINTS, 3)) / 256.0
    return make_sequence(coords)


def _image(width: int = 10, source_len: int = 10) -> ActionImage:
    pixels = np.tile(np.arange(width, dtype=np.uint8)[None, :, None], (25, 1, 3))
    return ActionImage(pixels, 1, ColumnMap(), source_len)


# ── JointOrder ────────────────────────────────────────────────────────────────

def test_default_order_is_a_bijection_in_five_parts():
    assert sorted(ORDER.permutation) == list(range(NUM_JOINTS))
    assert len(ORDER.parts) == 5


def test_non_bijective_order_rejected():
    with pytest.raises(ValidationError):
        JointOrder.from_mapping({"a": range(24), "b": (0,)})


# ── compute_dataset_stats ─────────────────────────────────────────────────────

def test_stats_of_constant_zero_sequence():
    seq = make_sequence(np.zeros((1, NUM_JOINTS, 3)))
    assert compute_dataset_stats([seq]) == DatasetStats(0.0, 0.0)


def test_stats_span_and_order_independence():
    a = make_sequence(np.full((2, NUM_JOINTS, 3), -1.0))
    b = make_sequence(np.full((3, NUM_JOINTS, 3), 2.0))
    assert compute_dataset_stats([a, b]) == DatasetStats(-1.0, 2.0)
    assert compute_dataset_stats([b, a]) == compute_dataset_stats([a, b])


def test_stats_ignore_absent_persons():
    coords = np.full((2, 2, NUM_JOINTS, 3), 5.0)
    present = np.array([[True, False], [True, False]])
    coords[:, 0] = 1.0
    seq = SkeletonSequence(coords=coords, present=present)
    assert compute_dataset_stats([seq]) == DatasetStats(1.0, 1.0)


def test_stats_need_present_joints():
    coords = np.zeros((2, 2, NUM_JOINTS, 3))
    seq = SkeletonSequence(coords=coords, present=np.zeros((2, 2), dtype=bool))
    with pytest.raises(EmptyDatasetError):
        compute_dataset_stats([seq])


# ── encode_global ─────────────────────────────────────────────────────────────

def test_global_endpoints_and_midpoint():
    coords = np.zeros((3, NUM_JOINTS, 3))
    coords[0] = -1.0
    coords[1] = 0.0
    coords[2] = 1.0
    img = encode_global(make_sequence(coords), ORDER, DatasetStats(-1.0, 1.0))
    assert img.pixels.shape == (25, 3, 3)
    assert np.all(img.pixels[:, 0] == 0)
    assert np.all(img.pixels[:, 1] == 127)
    assert np.all(img.pixels[:, 2] == 255)


def test_global_clamps_out_of_range_coordinates():
    coords = np.zeros((2, NUM_JOINTS, 3))
    coords[0] = -5.0
    coords[1] = 5.0
    img = encode_global(make_sequence(coords), ORDER, DatasetStats(-1.0, 1.0))
    assert np.all(img.pixels[:, 0] == 0)
    assert np.all(img.pixels[:, 1] == 255)


def test_global_degenerate_stats():
    with pytest.raises(DegenerateStatsError):
        encode_global(make_sequence(np.ones((2, NUM_JOINTS, 3))), ORDER, DatasetStats(1.0, 1.0))


def test_rows_follow_joint_order():
    coords = np.zeros((1, NUM_JOINTS, 3))
    coords[0, :, 0] = np.arange(NUM_JOINTS) / (NUM_JOINTS - 1)
    img = encode_global(make_sequence(coords), ORDER, DatasetStats(0.0, 1.0))
    expected = np.floor(255.0 * np.array(ORDER.permutation) / (NUM_JOINTS - 1))
    np.testing.assert_array_equal(img.pixels[:, 0, 0], expected)


def test_second_person_gives_fifty_rows():
    coords = np.ones((2, 2, NUM_JOINTS, 3))
    present = np.array([[True, False], [True, True]])
    img = encode_global(SkeletonSequence(coords, present), ORDER, DatasetStats(0.0, 2.0))
    assert img.persons_encoded == 2
    assert img.height == 50
    # pessoa 2 ausente no frame 0 → linhas zeradas
    assert np.all(img.pixels[25:, 0] == 0)
    assert np.all(img.pixels[25:, 1] == 127)


# ── encode_invariant ──────────────────────────────────────────────────────────

def test_invariant_hand_example():
    coords = np.zeros((2, NUM_JOINTS, 3))
    coords[1] = (1.0, 0.5, 0.25)
    img = encode_invariant(make_sequence(coords), ORDER)
    np.testing.assert_array_equal(img.pixels[:, 0], np.zeros((25, 3)))
    np.testing.assert_array_equal(img.pixels[:, 1], np.tile([255, 127, 63], (25, 1)))


def test_invariant_shift_and_scale_examples():
    base = _dyadic_sequence(0)
    shifted = make_sequence(base.coords[:, 0] + np.array([10.0, 20.0, 30.0]))
    scaled = make_sequence(base.coords[:, 0] * 3.7)
    ref = encode_invariant(base, ORDER).pixels
    np.testing.assert_array_equal(encode_invariant(shifted, ORDER).pixels, ref)
    assert np.max(np.abs(encode_invariant(scaled, ORDER).pixels.astype(int) - ref)) <= 1


def test_invariant_translation_is_bit_exact_over_many_sequences():
    rng = np.random.default_rng(99)
    for seed in range(1000):
        seq = _dyadic_sequence(seed, n_frames=4)
        shift = rng.integers(-4096, 4097, size=3) / 64.0
        moved = make_sequence(seq.coords[:, 0] + shift)
        np.testing.assert_array_equal(encode_invariant(moved, ORDER).pixels,
                                      encode_invariant(seq, ORDER).pixels)


def test_invariant_power_of_two_scaling_is_bit_exact():
    rng = np.random.default_rng(7)
    for seed in range(1000):
        seq = _dyadic_sequence(seed, n_frames=4)
        s = 2.0 ** int(rng.integers(-8, 9))
        scaled = make_sequence(seq.coords[:, 0] * s)
        np.testing.assert_array_equal(encode_invariant(scaled, ORDER).pixels,
                                      encode_invariant(seq, ORDER).pixels)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.floats(min_value=1e-3, max_value=1e3))
def test_invariant_arbitrary_scale_within_one_level(seed, s):
    seq = _dyadic_sequence(seed, n_frames=4)
    scaled = make_sequence(seq.coords[:, 0] * s)
    diff = encode_invariant(scaled, ORDER).pixels.astype(int) - encode_invariant(seq, ORDER).pixels
    assert np.max(np.abs(diff)) <= 1


def test_invariant_reaches_255_and_stays_in_range():
    img = encode_invariant(_dyadic_sequence(3), ORDER)
    assert img.pixels.max() == 255
    assert img.pixels.min() >= 0


def test_anisotropic_scaling_changes_the_image():
    coords = np.zeros((2, NUM_JOINTS, 3))
    coords[1] = (1.0, 0.5, 0.25)
    stretched = coords * np.array([1.0, 2.0, 1.0])
    a = encode_invariant(make_sequence(coords), ORDER).pixels
    b = encode_invariant(make_sequence(stretched), ORDER).pixels
    assert not np.array_equal(a, b)


def test_global_equals_invariant_when_channel_ranges_match():
    coords = np.zeros((2, NUM_JOINTS, 3))
    coords[1] = (1.0, 1.0, 1.0)
    seq = make_sequence(coords)
    stats = compute_dataset_stats([seq])
    np.testing.assert_array_equal(encode_global(seq, ORDER, stats).pixels,
                                  encode_invariant(seq, ORDER).pixels)


def test_static_person_encodes_zero_rows(caplog):
    seq = make_sequence(np.ones((3, NUM_JOINTS, 3)))
    img = encode_invariant(seq, ORDER)
    assert np.all(img.pixels == 0)
    assert "static" in caplog.text


def test_invariant_empty_sequence():
    seq = SkeletonSequence(np.zeros((0, 2, NUM_JOINTS, 3)), np.zeros((0, 2), dtype=bool))
    with pytest.raises(ValidationError):
        encode_invariant(seq, ORDER)


# ── resample / letterbox ──────────────────────────────────────────────────────

def test_resample_same_width_is_identity():
    img = _image()
    out = resample_width(img, 10)
    np.testing.assert_array_equal(out.pixels, img.pixels)
    assert out.col_to_frame == ColumnMap()


def test_resample_half_width_picks_odd_columns():
    out = resample_width(_image(), 5)
    np.testing.assert_array_equal(out.pixels[0, :, 0], [1, 3, 5, 7, 9])


def test_resample_zero_width():
    with pytest.raises(ValidationError):
        resample_width(_image(), 0)


@pytest.mark.parametrize("source_len,target", [(100, 512), (437, 512), (300, 128), (7, 3)])
def test_resampled_frame_mapping_endpoints(source_len, target):
    raw = ActionImage(np.zeros((25, source_len, 3), np.uint8), 1, ColumnMap(), source_len)
    img = resample_width(raw, target)
    assert abs(img.x_to_frame(img.frame_to_x(0)) - 0) <= 1
    assert abs(img.x_to_frame(img.frame_to_x(source_len - 1)) - (source_len - 1)) <= 1
    assert img.x_to_frame(1.0) == pytest.approx(source_len)


def test_letterbox_pads_single_person_to_fifty_rows():
    out = letterbox_rows(_image())
    assert out.height == 50
    assert np.all(out.pixels[25:] == 0)


def test_encode_for_detector_shape():
    seq = _dyadic_sequence(1, n_frames=30)
    img = encode_for_detector(seq, width=64)
    assert img.pixels.shape == (50, 64, 3)
    assert img.source_len == 30


# ── PNG + sidecar ─────────────────────────────────────────────────────────────

def test_save_and_load_action_image(tmp_path):
    img = encode_for_detector(_dyadic_sequence(2, n_frames=20), width=32)
    sidecar = save_action_image(img, tmp_path / "a.png")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    assert meta["source_len"] == 20
    back = load_action_image(tmp_path / "a.png")
    np.testing.assert_array_equal(back.pixels, img.pixels)
    assert back.col_to_frame == img.col_to_frame


def test_saving_twice_is_byte_identical(tmp_path):
    img = encode_for_detector(_dyadic_sequence(4, n_frames=20), width=32)
    save_action_image(img, tmp_path / "a.png")
    save_action_image(img, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
