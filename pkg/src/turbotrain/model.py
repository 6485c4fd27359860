"""Encoder / decoder transformer, classifier head, and projection heads.

The encoder is a standard pre-norm ViT operating on whatever token count
it is given (CLS plus any number of visible tokens), so training with a
mask ratio m and evaluating at a different m' needs no weight surgery.
The decoder consumes the projected visible tokens (CLS dropped) plus one
mask-token slot per reconstruction position, i.e. N_i + N_r tokens total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .errors import ConfigError, GeometryError
from .patches import PatchGeometry, sinusoidal_pe

TASKS = ("classify", "contrast", "long_classify")


@dataclass(frozen=True)
class TurboConfig:
    geometry: PatchGeometry
    enc_depth: int = 4
    enc_dim: int = 64
    enc_heads: int = 4
    dec_depth: int = 2
    dec_dim: int = 32
    dec_heads: int = 2
    num_classes: int = 16
    proj_dim: int = 32
    text_dim: int = 32
    m: float = 0.5
    r: float = 0.5
    task: str = "classify"
    temperature: float = 1.0
    normalize_embeddings: bool = True
    log_base: str = "e"

    def __post_init__(self):
        if self.enc_dim % self.enc_heads:
            raise ConfigError(f"enc_dim {self.enc_dim} not divisible by {self.enc_heads} heads")
        if self.dec_dim % self.dec_heads:
            raise ConfigError(f"dec_dim {self.dec_dim} not divisible by {self.dec_heads} heads")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if not (0.0 <= self.r <= self.m <= 1.0):
            raise ConfigError(f"need 0 <= r <= m <= 1, got m={self.m}, r={self.r}")
        if self.m >= 1.0:
            raise ConfigError("m = 1 leaves no visible content tokens for the task head")


def toy_config(**overrides):
    """Desk-scale preset: enc 4x64, dec 2x32, 8 frames of 32x32, patch 2x8x8."""
    geom = PatchGeometry(T=8, H=32, W=32, t=2, h=8, w=8)
    cfg = TurboConfig(geometry=geom)
    return replace(cfg, **overrides) if overrides else cfg


def reference_config(calibration_decoder=False, **overrides):
    """Full-scale preset: ViT-B encoder (12x768), 16 frames of 224x224,
    patch 2x16x16.  Decoder is 8x512 per the stated architecture; the
    4x384 calibration variant matches the published GFLOPs table."""
    geom = PatchGeometry(T=16, H=224, W=224, t=2, h=16, w=16)
    cfg = TurboConfig(
        geometry=geom,
        enc_depth=12,
        enc_dim=768,
        enc_heads=12,
        dec_depth=4 if calibration_decoder else 8,
        dec_dim=384 if calibration_decoder else 512,
        dec_heads=6 if calibration_decoder else 8,
        num_classes=101,
        proj_dim=256,
    )
    return replace(cfg, **overrides) if overrides else cfg


def _trunc_normal(rng, shape, std=0.02, dtype=np.float32):
    # resample until inside +-2 std (proper truncation, not clipping)
    out = rng.standard_normal(shape) * std
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.standard_normal(bad.sum()) * std
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)


class ModelState:
    """Named parameter tensors; names are stable for checkpointing."""

    def __init__(self, config: TurboConfig, params: dict):
        self.config = config
        self.params = params

    def __getitem__(self, name):
        return self.params[name]

    def named_parameters(self):
        return self.params.items()

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def finite_check(self):
        return all(p.finite_check() for p in self.params.values())

    def param_total(self):
        return sum(p.size for p in self.params.values())


def _block_params(rng, prefix, dim, dtype, params):
    params[f"{prefix}.ln1.gain"] = T.Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.ln1.bias"] = T.Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.attn.qkv.weight"] = T.Tensor(
        _trunc_normal(rng, (dim, 3 * dim), dtype=dtype), requires_grad=True)
    params[f"{prefix}.attn.qkv.bias"] = T.Tensor(np.zeros(3 * dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.attn.out.weight"] = T.Tensor(
        _trunc_normal(rng, (dim, dim), dtype=dtype), requires_grad=True)
    params[f"{prefix}.attn.out.bias"] = T.Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.ln2.gain"] = T.Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.ln2.bias"] = T.Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.mlp.fc1.weight"] = T.Tensor(
        _trunc_normal(rng, (dim, 4 * dim), dtype=dtype), requires_grad=True)
    params[f"{prefix}.mlp.fc1.bias"] = T.Tensor(np.zeros(4 * dim, dtype=dtype), requires_grad=True)
    params[f"{prefix}.mlp.fc2.weight"] = T.Tensor(
        _trunc_normal(rng, (4 * dim, dim), dtype=dtype), requires_grad=True)
    params[f"{prefix}.mlp.fc2.bias"] = T.Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)


def _mlp_head_params(rng, prefix, dim_in, dim_out, dtype, params):
    params[f"{prefix}.fc1.weight"] = T.Tensor(
        _trunc_normal(rng, (dim_in, dim_in), dtype=dtype), requires_grad=True)
    params[f"{prefix}.fc1.bias"] = T.Tensor(np.zeros(dim_in, dtype=dtype), requires_grad=True)
    params[f"{prefix}.fc2.weight"] = T.Tensor(
        _trunc_normal(rng, (dim_in, dim_out), dtype=dtype), requires_grad=True)
    params[f"{prefix}.fc2.bias"] = T.Tensor(np.zeros(dim_out, dtype=dtype), requires_grad=True)


def init_model(config, seed=0, dtype=None):
    dtype = dtype or T.default_dtype()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    g = config.geometry
    D, Dd, P = config.enc_dim, config.dec_dim, g.patch_dim
    params = {}
    params["embed.weight"] = T.Tensor(_trunc_normal(rng, (P, D), dtype=dtype), requires_grad=True)
    params["embed.bias"] = T.Tensor(np.zeros(D, dtype=dtype), requires_grad=True)
    params["cls"] = T.Tensor(_trunc_normal(rng, (D,), dtype=dtype), requires_grad=True)
    for i in range(config.enc_depth):
        _block_params(rng, f"enc.blocks.{i}", D, dtype, params)
    params["enc.ln_final.gain"] = T.Tensor(np.ones(D, dtype=dtype), requires_grad=True)
    params["enc.ln_final.bias"] = T.Tensor(np.zeros(D, dtype=dtype), requires_grad=True)

    params["dec.proj.weight"] = T.Tensor(_trunc_normal(rng, (D, Dd), dtype=dtype), requires_grad=True)
    params["dec.proj.bias"] = T.Tensor(np.zeros(Dd, dtype=dtype), requires_grad=True)
    params["dec.mask_token"] = T.Tensor(_trunc_normal(rng, (Dd,), dtype=dtype), requires_grad=True)
    for i in range(config.dec_depth):
        _block_params(rng, f"dec.blocks.{i}", Dd, dtype, params)
    params["dec.ln_final.gain"] = T.Tensor(np.ones(Dd, dtype=dtype), requires_grad=True)
    params["dec.ln_final.bias"] = T.Tensor(np.zeros(Dd, dtype=dtype), requires_grad=True)
    params["dec.out.weight"] = T.Tensor(_trunc_normal(rng, (Dd, P), dtype=dtype), requires_grad=True)
    params["dec.out.bias"] = T.Tensor(np.zeros(P, dtype=dtype), requires_grad=True)

    params["head.weight"] = T.Tensor(
        _trunc_normal(rng, (D, config.num_classes), dtype=dtype), requires_grad=True)
    params["head.bias"] = T.Tensor(np.zeros(config.num_classes, dtype=dtype), requires_grad=True)

    _mlp_head_params(rng, "proj_v", D, config.proj_dim, dtype, params)
    _mlp_head_params(rng, "proj_t", config.text_dim, config.proj_dim, dtype, params)
    return ModelState(config, params)


def _attention(x, p, prefix, heads):
    B, L, D = x.shape
    dh = D // heads
    qkv = T.matmul(x, p[f"{prefix}.attn.qkv.weight"]) + p[f"{prefix}.attn.qkv.bias"]
    q = T.slice_axis(qkv, 2, 0, D)
    k = T.slice_axis(qkv, 2, D, 2 * D)
    v = T.slice_axis(qkv, 2, 2 * D, 3 * D)
    q = T.transpose(q.reshape(B, L, heads, dh), (0, 2, 1, 3))
    k = T.transpose(k.reshape(B, L, heads, dh), (0, 2, 1, 3))
    v = T.transpose(v.reshape(B, L, heads, dh), (0, 2, 1, 3))
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    attn = T.softmax(scores, axis=-1)
    out = T.transpose(T.matmul(attn, v), (0, 2, 1, 3)).reshape(B, L, D)
    return T.matmul(out, p[f"{prefix}.attn.out.weight"]) + p[f"{prefix}.attn.out.bias"]


def _mlp(x, p, prefix):
    h = T.gelu(T.matmul(x, p[f"{prefix}.mlp.fc1.weight"]) + p[f"{prefix}.mlp.fc1.bias"])
    return T.matmul(h, p[f"{prefix}.mlp.fc2.weight"]) + p[f"{prefix}.mlp.fc2.bias"]


def _block(x, p, prefix, heads):
    h = x + _attention(
        T.layernorm(x, p[f"{prefix}.ln1.gain"], p[f"{prefix}.ln1.bias"]), p, prefix, heads)
    return h + _mlp(
        T.layernorm(h, p[f"{prefix}.ln2.gain"], p[f"{prefix}.ln2.bias"]), p, prefix)


def _stack(x, p, scope, depth, heads):
    for i in range(depth):
        x = _block(x, p, f"{scope}.blocks.{i}", heads)
    return T.layernorm(x, p[f"{scope}.ln_final.gain"], p[f"{scope}.ln_final.bias"])


def encoder_forward(state, visible_tokens):
    """(B, L, D) in -> (B, L, D) out; index 0 carries the CLS feature."""
    cfg = state.config
    if visible_tokens.shape[-1] != cfg.enc_dim:
        raise ConfigError(
            f"encoder expects dim {cfg.enc_dim}, got {visible_tokens.shape[-1]}")
    return _stack(visible_tokens, state, "enc", cfg.enc_depth, cfg.enc_heads)


def decoder_pe_table(config, n=None, dtype=np.float32):
    """Sinusoidal table at decoder width, indexed by flat content-token id."""
    n = n if n is not None else config.geometry.n
    return sinusoidal_pe(n, config.dec_dim, dtype=dtype)


def decoder_forward(state, encoded_visible, plans, dec_pe=None):
    """Predict raw patch rows at each plan's recon positions.

    Decoder input is N_i projected visible tokens (CLS dropped) plus N_r
    mask-token slots; every slot carries the PE of its original position.
    Output rows follow plan.recon_idx order.
    """
    cfg = state.config
    B = encoded_visible.shape[0]
    if len(plans) != B:
        raise GeometryError(f"{len(plans)} plans for batch of {B}")
    n_r = len(plans[0].recon_idx)
    if n_r == 0:
        return None
    n_i = encoded_visible.shape[1] - 1
    for plan in plans:
        if len(plan.visible_idx) != n_i or len(plan.recon_idx) != n_r:
            raise GeometryError("plans in one batch must share partition sizes")
    if dec_pe is None:
        dec_pe = decoder_pe_table(cfg, plans[0].n, dtype=encoded_visible.data.dtype)
    dtype = encoded_visible.data.dtype

    vis = T.slice_axis(encoded_visible, 1, 1, n_i + 1)  # drop CLS
    vis = T.matmul(vis, state["dec.proj.weight"]) + state["dec.proj.bias"]
    vis_pe = np.stack([dec_pe[plan.visible_idx] for plan in plans])
    vis = vis + T.Tensor(vis_pe.astype(dtype))

    mask_pe = np.stack([dec_pe[plan.recon_idx] for plan in plans])
    mask = T.Tensor(mask_pe.astype(dtype)) + state["dec.mask_token"]

    x = T.concat([vis, mask], axis=1) if n_i > 0 else mask
    x = _stack(x, state, "dec", cfg.dec_depth, cfg.dec_heads)
    rec = T.slice_axis(x, 1, n_i, n_i + n_r)
    return T.matmul(rec, state["dec.out.weight"]) + state["dec.out.bias"]


def cls_feature(encoded):
    """(B, L, D) -> (B, D) CLS row."""
    B, _, D = encoded.shape
    return T.slice_axis(encoded, 1, 0, 1).reshape(B, D)


def classify_head(state, z_cls):
    """Single linear layer g(z_CLS) -> logits."""
    return T.matmul(z_cls, state["head.weight"]) + state["head.bias"]


def _project(state, x, prefix, normalize):
    h = T.gelu(T.matmul(x, state[f"{prefix}.fc1.weight"]) + state[f"{prefix}.fc1.bias"])
    z = T.matmul(h, state[f"{prefix}.fc2.weight"]) + state[f"{prefix}.fc2.bias"]
    if normalize:
        norm = T.sqrt((z * z).sum(axis=-1, keepdims=True) + 1e-12)
        z = z / norm
    return z


def project_visual(state, z_cls):
    return _project(state, z_cls, "proj_v", state.config.normalize_embeddings)


def project_text(state, text_feat):
    if not isinstance(text_feat, T.Tensor):
        text_feat = T.Tensor(np.asarray(text_feat))
    return _project(state, text_feat, "proj_t", state.config.normalize_embeddings)
