"""Analytic FLOPs / parameter / activation-memory model.

Counting convention: one multiply-accumulate = one FLOP.  Per transformer
block with sequence length L and width D: qkv + output projections 4*L*D^2,
attention scores + weighted sum 2*L^2*D, MLP (4x hidden) 8*L*D^2.  Softmax,
layernorm, gelu and bias adds are excluded (linear-term noise).  Patch
embedding is counted over visible rows only.  All numbers are pure
functions of the configuration; nothing here is measured.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .model import TurboConfig
from .partition import partition_sizes

PAPER_SWEEP = [(0.0, 0.0), (0.5, 0.5), (0.75, 0.75), (0.75, 0.25), (0.9, 0.9), (0.9, 0.1)]

CSV_HEADER = "mask_pct,recon_pct,encoder_gflops,decoder_gflops,total_gflops,activation_mb"


@dataclass
class CostReport:
    encoder_gflops: float
    decoder_gflops: float
    embed_gflops: float
    head_gflops: float
    param_count: int
    activation_floats: int
    block_breakdown: dict = field(default_factory=dict)

    @property
    def total_gflops(self):
        return self.encoder_gflops + self.decoder_gflops + self.embed_gflops + self.head_gflops


def _block_flops(L, D):
    proj = 4 * L * D * D
    attn = 2 * L * L * D
    mlp = 8 * L * D * D
    return proj + attn + mlp, attn


def attention_score_flops(config, m):
    """The quadratic attention term alone, summed over encoder blocks."""
    n = config.geometry.n
    n_i, _, _ = partition_sizes(n, m, 0.0)
    L = n_i + 1
    return config.enc_depth * 2 * L * L * config.enc_dim


def flops_estimate(config: TurboConfig, m=None, r=None):
    g = config.geometry
    m = config.m if m is None else m
    r = config.r if r is None else r
    n = g.n
    n_i, n_r, _ = partition_sizes(n, m, r)
    D, Dd, P = config.enc_dim, config.dec_dim, g.patch_dim

    L_enc = n_i + 1
    enc_block, _ = _block_flops(L_enc, D)
    enc = config.enc_depth * enc_block

    dec = 0
    if n_r > 0:
        L_dec = n_i + n_r
        dec_block, _ = _block_flops(L_dec, Dd)
        dec = config.dec_depth * dec_block
        dec += L_dec * D * Dd          # input projection from encoder width
        dec += L_dec * Dd * P          # output projection to raw patch rows

    emb = n_i * P * D
    head = D * config.num_classes

    return CostReport(
        encoder_gflops=enc / 1e9,
        decoder_gflops=dec / 1e9,
        embed_gflops=emb / 1e9,
        head_gflops=head / 1e9,
        param_count=param_count(config),
        activation_floats=activation_memory(config, m, r, batch=1),
        block_breakdown={
            "enc_block_gflops": enc_block / 1e9,
            "enc_attention_gflops": config.enc_depth * 2 * L_enc * L_enc * D / 1e9,
        },
    )


def _block_param_count(D):
    ln = 2 * 2 * D
    qkv = D * 3 * D + 3 * D
    out = D * D + D
    mlp = D * 4 * D + 4 * D + 4 * D * D + D
    return ln + qkv + out + mlp


def param_count(config: TurboConfig):
    """Closed-form total; must equal the constructed model's count exactly."""
    g = config.geometry
    D, Dd, P, C = config.enc_dim, config.dec_dim, g.patch_dim, config.num_classes
    total = P * D + D                                   # patch embed
    total += D                                          # cls token
    total += config.enc_depth * _block_param_count(D)
    total += 2 * D                                      # encoder final LN
    total += D * Dd + Dd                                # decoder input projection
    total += Dd                                         # mask token
    total += config.dec_depth * _block_param_count(Dd)
    total += 2 * Dd                                     # decoder final LN
    total += Dd * P + P                                 # decoder output projection
    total += D * C + C                                  # classifier head
    total += (D * D + D) + (D * config.proj_dim + config.proj_dim)        # visual proj MLP
    td = config.text_dim
    total += (td * td + td) + (td * config.proj_dim + config.proj_dim)    # text proj MLP
    return total


def _block_activation_floats(L, D, heads):
    # stored for backward: block input, two LN outputs, qkv, attention
    # probabilities (heads*L^2), attention output, MLP hidden state
    return L * D * 4 + heads * L * L + L * D + 3 * L * D + 4 * L * D


def activation_memory(config: TurboConfig, m=None, r=None, batch=1):
    """Peak forward-activation float count kept for the backward pass."""
    g = config.geometry
    m = config.m if m is None else m
    r = config.r if r is None else r
    n_i, n_r, _ = partition_sizes(g.n, m, r)
    total = config.enc_depth * _block_activation_floats(n_i + 1, config.enc_dim, config.enc_heads)
    if n_r > 0:
        total += config.dec_depth * _block_activation_floats(
            n_i + n_r, config.dec_dim, config.dec_heads)
        total += (n_i + n_r) * config.dec_dim
    total += g.n * g.patch_dim + (g.n + 1) * config.enc_dim
    return batch * total


def sweep(config: TurboConfig, pairs=None):
    """CSV rows (one CostReport per (m, r) pair); header always emitted."""
    pairs = PAPER_SWEEP if pairs is None else pairs
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for m, r in pairs:
        rep = flops_estimate(config, m, r)
        mb = rep.activation_floats * 4 / 1e6
        out.write(
            f"{100 * m:g},{100 * r:g},{rep.encoder_gflops:.4f},"
            f"{rep.decoder_gflops:.4f},{rep.total_gflops:.4f},{mb:.3f}\n"
        )
    return out.getvalue()
