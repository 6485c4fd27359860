"""Optimization loop, schedules, the three task pipelines, and evaluation.

Tasks: short-clip classification (CE + reconstruction), contrastive
clip-caption training (InfoNCE + reconstruction, frozen toy text embedder),
and long-video activity classification (classification over frames sampled
from minute-long videos).  Evaluation covers variable-mask inference,
multi-crop long-video inference, per-second feature extraction and
temporal-alignment Recall@1.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses, model as M, tensor as T
from .costs import flops_estimate
from .data import LONG_FPS, sample_long_video_frames, toy_text_embed
from .errors import ConfigError, DataError, GraphError
from .model import TurboConfig
from .partition import apply_partition, make_partition, sample_rng
from .patches import PatchGeometry, embed, patchify, sinusoidal_pe

LONG_PRESETS = {
    "F16": (16, 0.5, 0.5),
    "F32": (32, 0.75, 0.25),
    "F64": (64, 0.875, 0.125),
}


# ---------------------------------------------------------------- optimizer

@dataclass
class OptimState:
    lr_base: float
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.05
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class AdamW:
    """Decoupled weight decay: applied to the weights, never to the moments."""

    def __init__(self, params, lr_base=1e-3, betas=(0.9, 0.999), weight_decay=0.05, eps=1e-8):
        self.params = dict(params)
        self.state = OptimState(lr_base=lr_base, betas=betas, weight_decay=weight_decay, eps=eps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def step(self, lr=None):
        lr = self.state.lr_base if lr is None else lr
        st = self.state
        st.step_count += 1
        b1, b2 = st.betas
        bc1 = 1.0 - b1 ** st.step_count
        bc2 = 1.0 - b2 ** st.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.isfinite(g).all():
                raise GraphError(f"non-finite gradient in {name}")
            if st.weight_decay:
                p.data *= 1.0 - lr * st.weight_decay
            m = st.m[name]
            v = st.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def clip_gradients(params, max_norm=1.0):
    """Global-norm gradient clipping; returns the pre-clip norm."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if max_norm and norm > max_norm:
        s = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * s
    return norm


# ---------------------------------------------------------------- schedule

@dataclass(frozen=True)
class Schedule:
    base_lr: float
    warmup_epochs: float
    total_epochs: int
    steps_per_epoch: int
    min_lr: float = 0.0


def lr_at(schedule, global_step):
    """Linear warmup to base_lr, then cosine decay to min_lr."""
    ws = schedule.warmup_epochs * schedule.steps_per_epoch
    total = schedule.total_epochs * schedule.steps_per_epoch
    if ws > 0 and global_step < ws:
        return schedule.base_lr * global_step / ws
    if global_step >= total:
        return schedule.min_lr
    progress = (global_step - ws) / max(total - ws, 1)
    cos = 0.5 * (1.0 + math.cos(math.pi * progress))
    return schedule.min_lr + (schedule.base_lr - schedule.min_lr) * cos


# ---------------------------------------------------------------- forward

class _PipelineCache:
    """Per-config constants reused every step (PE tables, flops)."""

    def __init__(self, state):
        cfg = state.config
        dtype = state["embed.weight"].data.dtype
        self.enc_pe = sinusoidal_pe(cfg.geometry.n + 1, cfg.enc_dim, dtype=dtype)
        self.dec_pe = M.decoder_pe_table(cfg, cfg.geometry.n, dtype=dtype)
        self.flops_gf = flops_estimate(cfg).total_gflops


def encode_batch(state, videos, plans, cache=None, geometry=None):
    """patchify -> embed (+PE) -> keep visible -> encoder.

    Returns (encoded, raw_rows, recon_targets)."""
    cfg = state.config
    geom = geometry or cfg.geometry
    rows = patchify(np.asarray(videos), geom)
    pe = cache.enc_pe if cache is not None and geom.n == cfg.geometry.n else None
    tokens = embed(rows, state["embed.weight"], state["embed.bias"], state["cls"], geom, pe=pe)
    visible, targets = apply_partition(tokens, plans, rows)
    return M.encoder_forward(state, visible), rows, targets


def _train_plans(cfg, n, seed, epoch, indices):
    return [make_partition(n, cfg.m, cfg.r, sample_rng(seed, epoch, int(i))) for i in indices]


def classification_step(state, videos, labels, plans, cache):
    cfg = state.config
    encoded, _, targets = encode_batch(state, videos, plans, cache)
    logits = M.classify_head(state, M.cls_feature(encoded))
    pred = M.decoder_forward(state, encoded, plans, cache.dec_pe)
    parts = {
        "ce": losses.ce_loss(logits, labels),
        "pmae": losses.pmae_loss(pred, targets) if pred is not None
        else T.Tensor(np.zeros((), dtype=logits.data.dtype)),
    }
    weights = {"lambda_ce": losses.lambda_ce(cfg.num_classes, cfg.log_base)}
    return losses.combine("classify", parts, weights), logits


def contrastive_step(state, videos, text_feats, plans, cache):
    cfg = state.config
    encoded, _, targets = encode_batch(state, videos, plans, cache)
    z_v = M.project_visual(state, M.cls_feature(encoded))
    z_t = M.project_text(state, text_feats)
    pred = M.decoder_forward(state, encoded, plans, cache.dec_pe)
    parts = {
        "nce": losses.info_nce(z_v, z_t, cfg.temperature),
        "pmae": losses.pmae_loss(pred, targets) if pred is not None
        else T.Tensor(np.zeros((), dtype=z_v.data.dtype)),
    }
    weights = {"lambda_nce": losses.lambda_nce(len(videos), cfg.log_base)}
    return losses.combine("contrast", parts, weights), (z_v, z_t)


# ---------------------------------------------------------------- loops

@dataclass
class TrainResult:
    state: M.ModelState
    optimizer: AdamW
    log: list
    schedule: Schedule


def _emit(log, writer, record):
    log.append(record)
    if writer is not None:
        writer.write(json.dumps(record) + "\n")
        writer.flush()


def _run_loop(state, items, batch_fn, *, epochs, batch_size, base_lr, warmup_epochs,
              weight_decay, seed, task, log_writer=None, grad_clip=1.0, min_lr=0.0,
              checkpoint_cb=None, start_step=0, optimizer=None):
    cfg = state.config
    cache = _PipelineCache(state)
    steps_per_epoch = max(len(items) // batch_size, 1)
    schedule = Schedule(base_lr, warmup_epochs, epochs, steps_per_epoch, min_lr)
    opt = optimizer or AdamW(dict(state.named_parameters()), lr_base=base_lr,
                             weight_decay=weight_decay)
    log = []
    step = start_step
    start_epoch = start_step // steps_per_epoch
    for epoch in range(start_epoch, epochs):
        order = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(9, epoch))
        ).permutation(len(items))
        for b in range(steps_per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            if len(idx) < 2:
                continue
            t0 = time.perf_counter()
            plans = _train_plans(cfg, cfg.geometry.n, seed, epoch, idx)
            bundle = batch_fn(epoch, idx, plans, cache)
            lr = lr_at(schedule, step)
            bundle.total.backward()
            if not bundle.total.finite_check():
                raise GraphError(f"non-finite loss at step {step}")
            clip_gradients(opt.params, grad_clip)
            opt.step(lr)
            opt.zero_grad()
            step += 1
            _emit(log, log_writer, {
                "step": step, "epoch": epoch, "task": task,
                "loss_total": float(bundle.total.data),
                "loss_ce": bundle.parts.get("ce", 0.0),
                "loss_nce": bundle.parts.get("nce", 0.0),
                "loss_pmae": bundle.parts.get("pmae", 0.0),
                "lr": lr, "flops_gf": cache.flops_gf,
                "wall_ms": (time.perf_counter() - t0) * 1e3,
                "m": cfg.m, "r": cfg.r,
            })
        if checkpoint_cb is not None:
            checkpoint_cb(state, opt, step, epoch)
    return TrainResult(state=state, optimizer=opt, log=log, schedule=schedule)


def train_classify(config, dataset, *, epochs=30, batch_size=32, base_lr=1e-3,
                   warmup_epochs=2, weight_decay=0.05, seed=0, log_writer=None,
                   grad_clip=1.0, state=None, checkpoint_cb=None, start_step=0,
                   optimizer=None):
    state = state or M.init_model(config, seed=seed)
    frames = np.stack([c.frames for c in dataset])
    labels = np.array([c.label for c in dataset], dtype=np.int64)

    def batch_fn(epoch, idx, plans, cache):
        bundle, _ = classification_step(state, frames[idx], labels[idx], plans, cache)
        return bundle

    return _run_loop(state, dataset, batch_fn, epochs=epochs, batch_size=batch_size,
                     base_lr=base_lr, warmup_epochs=warmup_epochs,
                     weight_decay=weight_decay, seed=seed, task=config.task,
                     log_writer=log_writer, grad_clip=grad_clip,
                     checkpoint_cb=checkpoint_cb, start_step=start_step,
                     optimizer=optimizer)


def train_contrast(config, dataset, *, epochs=30, batch_size=16, base_lr=1e-3,
                   warmup_epochs=2, weight_decay=0.05, seed=0, log_writer=None,
                   grad_clip=1.0, state=None, checkpoint_cb=None, start_step=0,
                   optimizer=None):
    if batch_size < 2:
        raise ConfigError("contrastive training needs batch_size >= 2")
    state = state or M.init_model(config, seed=seed)
    frames = np.stack([c.frames for c in dataset])
    # the text embedder is frozen: features are precomputed constants
    text_feats = np.stack([toy_text_embed(c.caption_tokens) for c in dataset])

    def batch_fn(epoch, idx, plans, cache):
        bundle, _ = contrastive_step(state, frames[idx], text_feats[idx], plans, cache)
        return bundle

    return _run_loop(state, dataset, batch_fn, epochs=epochs, batch_size=batch_size,
                     base_lr=base_lr, warmup_epochs=warmup_epochs,
                     weight_decay=weight_decay, seed=seed, task="contrast",
                     log_writer=log_writer, grad_clip=grad_clip,
                     checkpoint_cb=checkpoint_cb, start_step=start_step,
                     optimizer=optimizer)


def train_long(config, dataset, *, epochs=20, batch_size=8, base_lr=1e-3,
               warmup_epochs=2, weight_decay=0.05, seed=0, log_writer=None,
               grad_clip=1.0, state=None, checkpoint_cb=None, start_step=0,
               optimizer=None):
    """Long-video classification: frames are re-sampled from each video every
    epoch via the 20%-endpoint uniform procedure."""
    state = state or M.init_model(config, seed=seed)
    n_frames = config.geometry.T
    labels = np.array([v.activity_label for v in dataset], dtype=np.int64)

    def batch_fn(epoch, idx, plans, cache):
        clips = []
        for i in idx:
            rng = sample_rng(seed, epoch, 10_000 + int(i))
            fidx = sample_long_video_frames(len(dataset[i].frames), n_frames, rng)
            clips.append(dataset[i].frames[fidx])
        bundle, _ = classification_step(state, np.stack(clips), labels[idx], plans, cache)
        return bundle

    return _run_loop(state, dataset, batch_fn, epochs=epochs, batch_size=batch_size,
                     base_lr=base_lr, warmup_epochs=warmup_epochs,
                     weight_decay=weight_decay, seed=seed, task="long_classify",
                     log_writer=log_writer, grad_clip=grad_clip,
                     checkpoint_cb=checkpoint_cb, start_step=start_step,
                     optimizer=optimizer)


# ---------------------------------------------------------------- inference

def _eval_plans(cfg, n, infer_m, sample_indices):
    if infer_m >= 1.0:
        raise ConfigError("inference mask ratio must be < 1")
    return [make_partition(n, infer_m, 0.0, sample_rng(7_000_000, 0, int(i)))
            for i in sample_indices]


def infer_classify(state, clips, infer_m=0.0, sample_indices=None, geometry=None):
    """Class distributions for a batch of clips at mask ratio infer_m, r=0."""
    cfg = state.config
    geom = geometry or cfg.geometry
    frames = np.stack([c.frames if hasattr(c, "frames") else c for c in clips])
    if sample_indices is None:
        sample_indices = range(len(frames))
    plans = _eval_plans(cfg, geom.n, infer_m, sample_indices)
    encoded, _, _ = encode_batch(state, frames, plans, geometry=geom)
    logits = M.classify_head(state, M.cls_feature(encoded))
    return T.softmax(logits, axis=-1).data


def evaluate_classify(state, dataset, infer_m=0.0, batch_size=64):
    """Top-1 accuracy of argmax predictions over a labelled clip dataset."""
    hits = 0
    for lo in range(0, len(dataset), batch_size):
        chunk = dataset[lo : lo + batch_size]
        probs = infer_classify(state, chunk, infer_m,
                               sample_indices=range(lo, lo + len(chunk)))
        preds = probs.argmax(axis=1)
        hits += int((preds == np.array([c.label for c in chunk])).sum())
    return hits / len(dataset)


def visual_embeddings(state, clips, infer_m=0.0, geometry=None, sample_indices=None):
    cfg = state.config
    geom = geometry or cfg.geometry
    frames = np.stack([c.frames if hasattr(c, "frames") else c for c in clips])
    if sample_indices is None:
        sample_indices = range(len(frames))
    plans = _eval_plans(cfg, geom.n, infer_m, sample_indices)
    encoded, _, _ = encode_batch(state, frames, plans, geometry=geom)
    return M.project_visual(state, M.cls_feature(encoded)).data


def retrieval_top1(state, dataset, batch_size=16):
    """Clip -> caption in-batch retrieval accuracy over eval batches."""
    hits = total = 0
    for lo in range(0, len(dataset) - batch_size + 1, batch_size):
        chunk = dataset[lo : lo + batch_size]
        z_v = visual_embeddings(state, chunk, infer_m=0.0,
                                sample_indices=range(lo, lo + batch_size))
        text = np.stack([toy_text_embed(c.caption_tokens) for c in chunk])
        z_t = M.project_text(state, text).data
        sims = z_v @ z_t.T
        hits += int((sims.argmax(axis=1) == np.arange(len(chunk))).sum())
        total += len(chunk)
    return hits / total


def infer_long_multicrop(state, video, n_frames, repeats=10, seed=0):
    """Average class probabilities over repeated frame samplings."""
    clips = []
    for rep in range(repeats):
        rng = sample_rng(seed, 0, 50_000 + rep)
        fidx = sample_long_video_frames(len(video.frames), n_frames, rng)
        clips.append(video.frames[fidx])
    cfg = state.config
    geom = replace_geometry(cfg.geometry, n_frames)
    probs = infer_classify(state, np.stack(clips), infer_m=0.0, geometry=geom)
    return probs.mean(axis=0)


def evaluate_long(state, dataset, n_frames=None, repeats=10, seed=0):
    n_frames = n_frames or state.config.geometry.T
    hits = 0
    for i, video in enumerate(dataset):
        probs = infer_long_multicrop(state, video, n_frames, repeats, seed=seed + i)
        hits += int(probs.argmax() == video.activity_label)
    return hits / len(dataset)


def replace_geometry(geom, n_frames):
    return PatchGeometry(T=n_frames, H=geom.H, W=geom.W, t=geom.t, h=geom.h,
                         w=geom.w, channels=geom.channels)


def per_second_features(state, video, infer_m=0.0):
    """One projected visual feature per second (4 fps toy protocol)."""
    total_frames = len(video.frames)
    seconds = total_frames // LONG_FPS
    if seconds < 1:
        raise DataError("video shorter than one second")
    cfg = state.config
    geom = replace_geometry(cfg.geometry, LONG_FPS)
    windows = np.stack([video.frames[s * LONG_FPS : (s + 1) * LONG_FPS]
                        for s in range(seconds)])
    return visual_embeddings(state, windows, infer_m=infer_m, geometry=geom)


def align_recall_at_1(features, sentence_embeds, segments):
    """Recall@1 over alignable sentences: the argmax-similarity second must
    fall inside the ground-truth segment."""
    features = np.asarray(features)
    sentence_embeds = np.asarray(sentence_embeds)
    alignable = [k for k, seg in enumerate(segments) if seg is not None]
    if not alignable:
        raise DataError("no alignable sentences to score")
    sims = sentence_embeds @ features.T          # (K, seconds)
    hits = 0
    for k in alignable:
        ts = float(sims[k].argmax()) + 0.5
        start, end = segments[k]
        hits += int(start <= ts <= end)
    return hits / len(alignable)
