"""Synthetic datasets: determinism, ranges, label structure, caption/vocab
consistency, long-video recipes, clip file round trips."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from turbotrain import data
from turbotrain.errors import DataError


def test_clip_shape_range_and_determinism():
    a = data.gen_shapes_clip(5, 123)
    b = data.gen_shapes_clip(5, 123)
    c = data.gen_shapes_clip(5, 124)
    assert a.frames.shape == (data.CLIP_FRAMES, data.CLIP_SIZE, data.CLIP_SIZE, 3)
    assert a.frames.dtype == np.float32
    assert a.frames.min() >= 0.0 and a.frames.max() <= 1.0
    assert a.label == 5
    np.testing.assert_array_equal(a.frames, b.frames)
    assert not np.array_equal(a.frames, c.frames)


def test_clip_rejects_bad_class():
    with pytest.raises(DataError):
        data.gen_shapes_clip(data.NUM_CLASSES, 0)


def test_clip_contains_signal_above_noise():
    clip = data.gen_shapes_clip(0, 7)
    assert clip.frames.max() > 3 * data.NOISE_AMPLITUDE


def test_classes_are_visually_distinct():
    # same seed, different class -> different pixels
    a = data.gen_shapes_clip(1, 9).frames
    b = data.gen_shapes_clip(2, 9).frames
    assert np.abs(a - b).max() > 0.1


def test_dataset_is_label_balanced():
    ds = data.shapes_dataset(64, 0)
    labels = np.array([c.label for c in ds])
    counts = np.bincount(labels, minlength=data.NUM_CLASSES)
    assert counts.min() >= 1
    assert counts.max() - counts.min() <= 1


@settings(max_examples=16, deadline=None)
@given(class_id=st.integers(0, 15), seed=st.integers(0, 1 << 20))
def test_caption_tokens_encode_the_class(class_id, seed):
    toks = data.gen_caption(class_id, seed)
    shape_id, direction_id = divmod(class_id, data.NUM_DIRECTIONS)
    assert len(toks) == 3
    assert toks[0] // 2 == shape_id
    assert toks[1] in (16, 17)
    assert (toks[2] - 8) // 2 == direction_id
    assert all(0 <= t < data.VOCAB_SIZE for t in toks)


def test_synonym_captions_embed_nearby():
    # the two synonyms for one concept share a base vector plus small noise,
    # so same-class captions stay closer than cross-class ones
    e_same1 = data.toy_text_embed(data.gen_caption(3, 1))
    e_same2 = data.toy_text_embed(data.gen_caption(3, 2))
    e_other = data.toy_text_embed(data.gen_caption(12, 1))
    assert e_same1 @ e_same2 > e_same1 @ e_other


def test_text_embedder_is_frozen():
    v1 = data.toy_text_embed([0, 16, 9])
    v2 = data.toy_text_embed([0, 16, 9])
    np.testing.assert_array_equal(v1, v2)
    assert v1.shape == (data.TEXT_DIM,)
    assert abs(np.linalg.norm(v1) - 1.0) < 1e-5


def test_activity_recipes_structure():
    rec = data.ACTIVITY_RECIPES
    assert len(rec) == data.NUM_ACTIVITIES
    assert all(len(r) == data.RECIPE_LEN for r in rec)
    # pairwise Hamming distance of at least 2 keeps activities separable
    for i in range(len(rec)):
        for j in range(i + 1, len(rec)):
            ham = sum(a != b for a, b in zip(rec[i], rec[j]))
            assert ham >= 2, (i, j)
    # every primitive that appears does so in at least two activities
    used = {}
    for r in rec:
        for p in r:
            used[p] = used.get(p, 0) + 1
    assert all(v >= 2 for v in used.values())


def test_long_video_layout():
    v = data.gen_long_video(2, 77)
    assert v.frames.shape == (data.LONG_FRAMES, data.CLIP_SIZE, data.CLIP_SIZE, 3)
    assert v.activity_label == 2
    assert len(v.segment_list) == data.RECIPE_LEN
    seg_len = data.SEGMENT_SECONDS
    prev_end = 0.0
    for prim, start_s, end_s in v.segment_list:
        assert abs((end_s - start_s) - seg_len) < 1e-9
        assert start_s >= prev_end - 1e-9
        prev_end = end_s
    assert prev_end <= data.LONG_SECONDS + 1e-9
    assert tuple(p for p, _, _ in v.segment_list) == data.ACTIVITY_RECIPES[2]


def test_compact_long_video_round_trip():
    v = data.gen_long_video(0, 5)
    c = data.CompactLongVideo(v)
    assert np.abs(c.frames - v.frames).max() <= 1.0 / 255.0 + 1e-6
    assert c.frames.dtype == np.float32


def test_short_clip_sampling():
    rng = np.random.default_rng(0)
    idx = data.sample_short_clip(np.zeros(240), 8, True, rng)
    assert len(idx) == 8 and idx.max() < 240
    center = data.sample_short_clip(np.zeros(240), 8, False)
    np.testing.assert_array_equal(center, np.arange(116, 124))
    padded = data.sample_short_clip(np.zeros(5), 8, False)
    np.testing.assert_array_equal(padded, [0, 1, 2, 3, 4, 4, 4, 4])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 64), seed=st.integers(0, 1 << 16))
def test_long_frame_sampling_is_sorted_unique(n, seed):
    rng = np.random.default_rng(seed)
    idx = data.sample_long_video_frames(240, n, rng)
    assert len(idx) == n
    assert (np.diff(idx) > 0).all()
    assert idx[0] <= 0.2 * 240
    assert 0 <= idx[0] and idx[-1] < 240


def test_align_sample_has_distractors():
    s = data.gen_align_sample(3)
    assert len(s.sentences) == len(s.segments) == len(s.sentence_embeds)
    assert sum(1 for seg in s.segments if seg is None) >= 1
    assert sum(1 for seg in s.segments if seg is not None) == data.RECIPE_LEN


def test_pairs_dataset_matches_captions_to_clips():
    ds = data.pairs_dataset(16, 0)
    for clip in ds:
        shape_id, direction_id = divmod(clip.label, data.NUM_DIRECTIONS)
        assert clip.caption_tokens[0] // 2 == shape_id


def test_clip_file_round_trip(tmp_path):
    clip = data.gen_shapes_clip(9, 42)
    path = tmp_path / "clip.bin"
    data.save_clip(path, clip)
    back = data.load_clip(path)
    np.testing.assert_array_equal(back.frames, clip.frames)
    assert back.label == clip.label
