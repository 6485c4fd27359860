"""Analytic cost model: published-number reproduction, closed-form parameter
count against a constructed model, scaling behaviour."""

import numpy as np

from turbotrain import costs
from turbotrain.model import init_model, reference_config, toy_config

# published compute table for the 16-frame ViT-B recipe (GFLOPs)
PUBLISHED = {
    (0.0, 0.0): 180.6,
    (0.5, 0.5): 99.3,
    (0.75, 0.75): 57.6,
    (0.75, 0.25): 45.9,
    (0.9, 0.9): 35.2,
    (0.9, 0.1): 18.3,
}


def test_reproduces_published_flops_table():
    cfg = reference_config(calibration_decoder=True)
    for (m, r), want in PUBLISHED.items():
        got = costs.flops_estimate(cfg, m, r).total_gflops
        tol = 0.03 if m == 0.0 else 0.10
        assert abs(got - want) / want <= tol, f"m={m} r={r}: {got:.1f} vs {want}"


def test_flops_monotone_in_mask_ratio():
    cfg = toy_config()
    prev = None
    for m in (0.0, 0.25, 0.5, 0.75, 0.9):
        tot = costs.flops_estimate(cfg, m, m * 0.5).total_gflops
        if prev is not None:
            assert tot < prev
        prev = tot


def test_flops_monotone_in_recon_ratio():
    cfg = toy_config()
    a = costs.flops_estimate(cfg, 0.75, 0.1).total_gflops
    b = costs.flops_estimate(cfg, 0.75, 0.75).total_gflops
    assert a < b


def test_no_decoder_cost_without_reconstruction():
    cfg = toy_config()
    rep = costs.flops_estimate(cfg, 0.5, 0.0)
    assert rep.decoder_gflops == 0.0


def test_attention_share_grows_with_sequence():
    # the quadratic term must overtake the linear ones at large n
    small = reference_config(calibration_decoder=True)
    attn = costs.attention_score_flops(small, 0.0)
    total = costs.flops_estimate(small, 0.0, 0.0).encoder_gflops * 1e9
    share_full = attn / total
    attn_m = costs.attention_score_flops(small, 0.9)
    total_m = costs.flops_estimate(small, 0.9, 0.0).encoder_gflops * 1e9
    assert attn_m / total_m < share_full


def test_param_count_matches_constructed_model():
    for cfg in (toy_config(), toy_config(task="contrast"),
                reference_config(calibration_decoder=True)):
        state = init_model(cfg, seed=0) if cfg.enc_dim <= 64 else None
        if state is None:
            continue
        total = sum(p.size for _, p in state.named_parameters())
        assert costs.param_count(cfg) == total


def test_sweep_csv_shape():
    cfg = reference_config(calibration_decoder=True)
    text = costs.sweep(cfg).strip().splitlines()
    assert text[0] == costs.CSV_HEADER
    assert len(text) == 1 + len(costs.PAPER_SWEEP)
    for line in text[1:]:
        fields = line.split(",")
        assert len(fields) == 6
        assert all(np.isfinite(float(f)) for f in fields)


def test_activation_memory_shrinks_with_masking():
    cfg = reference_config(calibration_decoder=True)
    full = costs.activation_memory(cfg, 0.0, 0.0)
    masked = costs.activation_memory(cfg, 0.9, 0.1)
    assert masked < full
