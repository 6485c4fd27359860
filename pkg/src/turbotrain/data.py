"""Deterministic synthetic datasets: moving-shape clips, templated captions
with a frozen toy text embedder, and long procedural videos.

Every generator is a pure function of (params, seed).  Class identity in
the short-clip task requires both appearance (which shape) and motion
(which direction), so a single frame is not sufficient — this forces
temporal modeling.  Long videos embed an ordered recipe of sub-actions
separated by background noise, so denser temporal sampling helps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

NUM_SHAPES = 4
NUM_DIRECTIONS = 4
NUM_CLASSES = NUM_SHAPES * NUM_DIRECTIONS   # 16 shape-motion primitives
NUM_ACTIVITIES = 8
RECIPE_LEN = 4

CLIP_FRAMES = 8
CLIP_SIZE = 32
NOISE_AMPLITUDE = 0.05
VELOCITY = 1.5  # pixels per frame

LONG_FPS = 4
LONG_SECONDS = 60
LONG_FRAMES = LONG_FPS * LONG_SECONDS
SEGMENT_SECONDS = 6

_SHAPE_COLORS = np.array(
    [[0.9, 0.2, 0.2], [0.2, 0.9, 0.2], [0.2, 0.4, 0.9], [0.9, 0.9, 0.2]]
)
_DIRECTIONS = np.array([[1, 0], [-1, 0], [0, -1], [0, 1]], dtype=np.float64)  # dx, dy
DIRECTION_NAMES = ("rightward", "leftward", "upward", "downward")
SHAPE_NAMES = ("square", "disc", "triangle", "cross")


@dataclass
class VideoClip:
    frames: np.ndarray           # (T, H, W, C) in [0, 1]
    label: int | None = None
    caption_tokens: list | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class LongVideo:
    frames: np.ndarray           # (T_long, H, W, C)
    activity_label: int
    segment_list: list           # [(sub_action_id, start_s, end_s), ...]
    fps: int = LONG_FPS


@dataclass
class AlignSample:
    video: LongVideo
    sentences: list              # token lists
    sentence_embeds: np.ndarray  # (K, text_dim)
    segments: list               # (start_s, end_s) or None when unalignable


def _shape_mask(shape_id, size=9):
    """Binary stencil of one shape on a size x size canvas."""
    c = size // 2
    yy, xx = np.mgrid[0:size, 0:size]
    if shape_id == 0:                                    # square
        return np.ones((size, size), dtype=bool)
    if shape_id == 1:                                    # disc
        return (yy - c) ** 2 + (xx - c) ** 2 <= c * c
    if shape_id == 2:                                    # triangle
        return (yy >= np.abs(xx - c) * 2 - 1) & (yy <= size - 1)
    if shape_id == 3:                                    # cross
        return (np.abs(xx - c) <= 1) | (np.abs(yy - c) <= 1)
    raise DataError(f"unknown shape id {shape_id}")


def _render_moving_shape(shape_id, direction_id, start_xy, n_frames, rng, size=CLIP_SIZE):
    frames = np.zeros((n_frames, size, size, 3), dtype=np.float64)
    stencil = _shape_mask(shape_id)
    sh = stencil.shape[0]
    color = _SHAPE_COLORS[shape_id]
    dx, dy = _DIRECTIONS[direction_id] * VELOCITY
    x, y = start_xy
    ys, xs = np.nonzero(stencil)
    for k in range(n_frames):
        px = (np.round(xs + x).astype(int)) % size
        py = (np.round(ys + y).astype(int)) % size
        frames[k, py, px] = color
        x += dx
        y += dy
    frames += rng.uniform(0.0, NOISE_AMPLITUDE, size=frames.shape)
    return np.clip(frames, 0.0, 1.0)


def gen_shapes_clip(class_id, seed):
    """One 8-frame 32x32 clip: a shape translating in a fixed direction."""
    if not 0 <= class_id < NUM_CLASSES:
        raise DataError(f"class_id must be in [0,{NUM_CLASSES})")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, class_id)))
    shape_id, direction_id = divmod(class_id, NUM_DIRECTIONS)
    start = rng.uniform(4, CLIP_SIZE - 4, size=2)
    frames = _render_moving_shape(shape_id, direction_id, start, CLIP_FRAMES, rng)
    return VideoClip(
        frames=frames.astype(np.float32),
        label=class_id,
        meta={"seed": seed, "shape": shape_id, "direction": direction_id},
    )


# ---------------------------------------------------------------- captions

# vocab: 2 synonyms per shape (ids 0..7), 2 per direction (8..15),
# 2 for "moving" (16..17)
VOCAB_SIZE = 18
TEXT_DIM = 32
_TEXT_SEED = 777


def _vocab_embeddings():
    """Frozen random-projection token table; synonym pairs stay close."""
    rng = np.random.default_rng(_TEXT_SEED)
    base = rng.standard_normal((VOCAB_SIZE // 2, TEXT_DIM))
    table = np.empty((VOCAB_SIZE, TEXT_DIM))
    table[0::2] = base
    table[1::2] = base + 0.15 * rng.standard_normal(base.shape)
    return table / np.linalg.norm(table, axis=1, keepdims=True)


_VOCAB_TABLE = _vocab_embeddings()


def gen_caption(class_id, seed):
    """'<shape> moving <direction>' as integer tokens with synonym noise."""
    if not 0 <= class_id < NUM_CLASSES:
        raise DataError(f"class_id must be in [0,{NUM_CLASSES})")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2, class_id)))
    shape_id, direction_id = divmod(class_id, NUM_DIRECTIONS)
    shape_tok = 2 * shape_id + rng.integers(2)
    moving_tok = 16 + rng.integers(2)
    dir_tok = 8 + 2 * direction_id + rng.integers(2)
    return [int(shape_tok), int(moving_tok), int(dir_tok)]


def toy_text_embed(tokens):
    """Bag-of-tokens through the frozen projection table, L2 normalized."""
    v = _VOCAB_TABLE[np.asarray(tokens, dtype=np.int64)].sum(axis=0)
    return (v / np.linalg.norm(v)).astype(np.float32)


# ---------------------------------------------------------------- long videos

def _activity_recipes():
    """Fixed recipes: NUM_ACTIVITIES ordered tuples of RECIPE_LEN primitives.

    Activities come in pairs that share the same shape sequence and differ
    only in the motion directions of every segment.  Shape identity is
    visible in a single frame, but direction requires two temporally close
    frames of the same segment, so denser frame sampling is rewarded.

    Constraints kept by construction: any two recipes differ in >= 2
    positions (here all 4), and every used primitive appears in exactly 2
    activities, so a single short window never identifies the activity.
    """
    shape_seqs = [tuple((k + p) % NUM_SHAPES for p in range(RECIPE_LEN))
                  for k in range(NUM_ACTIVITIES // 2)]
    dir_patterns = [tuple(range(RECIPE_LEN)),
                    tuple((p + 2) % RECIPE_LEN for p in range(RECIPE_LEN))]
    recipes = []
    for shapes in shape_seqs:
        for dirs in dir_patterns:
            recipes.append(tuple(s * NUM_DIRECTIONS + d for s, d in zip(shapes, dirs)))
    return recipes


ACTIVITY_RECIPES = _activity_recipes()


def gen_long_video(activity_id, seed, render=True):
    """60 s at 4 fps: 4 sub-action segments with background-noise gaps."""
    if not 0 <= activity_id < NUM_ACTIVITIES:
        raise DataError(f"activity_id must be in [0,{NUM_ACTIVITIES})")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3, activity_id)))
    recipe = ACTIVITY_RECIPES[activity_id]
    seg_frames = SEGMENT_SECONDS * LONG_FPS
    slack = LONG_FRAMES - RECIPE_LEN * seg_frames
    # ordered random gaps before each segment plus a tail gap
    cuts = np.sort(rng.uniform(0, 1, size=RECIPE_LEN))
    gap_starts = (cuts * slack).astype(int)
    frames = rng.uniform(0.0, NOISE_AMPLITUDE, size=(LONG_FRAMES, CLIP_SIZE, CLIP_SIZE, 3))
    segments = []
    for k, primitive in enumerate(recipe):
        start = int(gap_starts[k] + k * seg_frames)
        shape_id, direction_id = divmod(primitive, NUM_DIRECTIONS)
        if render:
            start_xy = rng.uniform(4, CLIP_SIZE - 4, size=2)
            frames[start : start + seg_frames] = _render_moving_shape(
                shape_id, direction_id, start_xy, seg_frames, rng)
        segments.append((primitive, start / LONG_FPS, (start + seg_frames) / LONG_FPS))
    return LongVideo(
        frames=np.clip(frames, 0.0, 1.0).astype(np.float32),
        activity_label=activity_id,
        segment_list=segments,
    )


# ---------------------------------------------------------------- sampling

def sample_short_clip(video_frames, n_frames, train_mode, rng=None):
    """Frame indices for a short clip; train takes a random window, eval the
    center window; short videos pad by repeating the last frame."""
    total = len(video_frames)
    if total >= n_frames:
        if train_mode:
            start = int(rng.integers(0, total - n_frames + 1))
        else:
            start = (total - n_frames) // 2
        return np.arange(start, start + n_frames)
    idx = np.arange(n_frames)
    idx[total:] = total - 1
    return idx


def sample_long_video_frames(duration_frames, n, rng):
    """Random start/end inside the first/last 20% of the video, then n
    uniformly spaced frame indices in between."""
    if n < 2:
        raise DataError(f"need n >= 2 frames, got {n}")
    if n > duration_frames:
        raise DataError(f"cannot take {n} frames from {duration_frames}")
    start = rng.uniform(0.0, 0.2 * duration_frames)
    end = rng.uniform(0.8 * duration_frames, duration_frames)
    idx = np.round(np.linspace(start, min(end, duration_frames - 1), n)).astype(int)
    # clamp duplicates introduced by rounding to distinct indices when possible
    for i in range(1, n):
        if idx[i] <= idx[i - 1]:
            idx[i] = min(idx[i - 1] + 1, duration_frames - 1)
    return idx


# ---------------------------------------------------------------- alignment

def gen_align_sample(seed, unalignable_fraction=0.2):
    """A long video, one caption per embedded sub-action with its segment,
    plus unalignable distractor captions."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,)))
    activity_id = int(rng.integers(NUM_ACTIVITIES))
    video = gen_long_video(activity_id, seed)
    sentences, segments = [], []
    for primitive, start_s, end_s in video.segment_list:
        sentences.append(gen_caption(primitive, int(rng.integers(1 << 30))))
        segments.append((start_s, end_s))
    n_distract = max(1, round(len(sentences) * unalignable_fraction / (1 - unalignable_fraction)))
    for _ in range(n_distract):
        cls = int(rng.integers(NUM_CLASSES))
        sentences.append(gen_caption(cls, int(rng.integers(1 << 30))))
        segments.append(None)
    embeds = np.stack([toy_text_embed(s) for s in sentences])
    return AlignSample(video=video, sentences=sentences, sentence_embeds=embeds, segments=segments)


# ---------------------------------------------------------------- datasets

def shapes_dataset(num_samples, seed_base):
    """Clips with labels cycling through the 16 classes; disjoint splits come
    from disjoint seed_base ranges."""
    return [gen_shapes_clip(i % NUM_CLASSES, seed_base + i) for i in range(num_samples)]


def pairs_dataset(num_samples, seed_base):
    out = []
    for i in range(num_samples):
        clip = gen_shapes_clip(i % NUM_CLASSES, seed_base + i)
        clip.caption_tokens = gen_caption(clip.label, seed_base + i)
        out.append(clip)
    return out


class CompactLongVideo:
    """LongVideo stored as uint8 to keep minute-long datasets in memory."""

    def __init__(self, video: LongVideo):
        self._frames_u8 = np.round(video.frames * 255.0).astype(np.uint8)
        self.activity_label = video.activity_label
        self.segment_list = video.segment_list
        self.fps = video.fps

    @property
    def frames(self):
        return self._frames_u8.astype(np.float32) / 255.0

    def __len__(self):
        return len(self._frames_u8)


def long_dataset(num_samples, seed_base, compact=True):
    videos = (gen_long_video(i % NUM_ACTIVITIES, seed_base + i) for i in range(num_samples))
    return [CompactLongVideo(v) if compact else v for v in videos]


# ---------------------------------------------------------------- disk cache

def save_clip(path, clip):
    """JSON header line + raw little-endian float32 frame buffer."""
    header = {
        "shape": list(clip.frames.shape),
        "dtype": "float32",
        "seed": clip.meta.get("seed"),
        "label": clip.label,
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode())
        f.write(clip.frames.astype("<f4").tobytes())


def load_clip(path):
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        frames = np.frombuffer(f.read(), dtype="<f4").reshape(header["shape"])
    return VideoClip(frames=frames, label=header["label"], meta={"seed": header["seed"]})
