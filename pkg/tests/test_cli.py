"""End-to-end command-line checks: train/eval round trip, resume, flops CSV,
gradcheck exit codes, data caching, usage errors."""

import json
import os

import numpy as np
import pytest

from turbotrain import data
from turbotrain.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from turbotrain.costs import CSV_HEADER


def _write_cfg(tmp_path, **kv):
    base = {
        "task": "classify",
        "epochs": 2,
        "batch_size": 8,
        "train_samples": 16,
        "test_samples": 8,
        "mask_ratio": 0.5,
        "recon_ratio": 0.25,
        "out_dir": str(tmp_path / "run"),
    }
    base.update(kv)
    p = tmp_path / "run.cfg"
    p.write_text("".join(f"{k}={v}\n" for k, v in base.items()))
    return str(p)


def test_train_then_eval(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["train", cfg]) == EXIT_OK
    out_dir = tmp_path / "run"
    assert (out_dir / "final.ckpt").exists()
    lines = (out_dir / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 2 * 2
    assert all(np.isfinite(json.loads(l)["loss_total"]) for l in lines)
    capsys.readouterr()

    assert main(["eval", str(out_dir / "final.ckpt")]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["metric_name"] == "accuracy"
    assert 0.0 <= report["value"] <= 1.0


def test_eval_with_inference_mask(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    main(["train", cfg])
    capsys.readouterr()
    assert main(["eval", str(tmp_path / "run" / "final.ckpt"),
                 "--infer-mask", "0.75"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["infer_mask"] == 0.75


def test_resume_from_checkpoint(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, checkpoint_every=1)
    assert main(["train", cfg, "--with-optim"]) == EXIT_OK
    run_dir = tmp_path / "run"
    mid = [f for f in os.listdir(run_dir) if f.startswith("step")]
    assert mid
    ckpt = str(run_dir / sorted(mid)[0])
    assert main(["train", cfg, "--resume", ckpt, "--with-optim"]) == EXIT_OK


def test_flops_csv(capsys):
    assert main(["flops", "--preset", "reference"]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == CSV_HEADER
    assert len(out) == 7
    full = float(out[1].split(",")[4])
    assert abs(full - 180.6) / 180.6 < 0.03


def test_flops_custom_sweep(capsys):
    assert main(["flops", "--preset", "toy", "--sweep", "0.5:0.25"]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 2
    assert out[1].startswith("50,25,")


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--coords", "8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_gen_data_writes_clips(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, train_samples=4, test_samples=2)
    out = tmp_path / "cache"
    assert main(["gen-data", cfg, "--out", str(out)]) == EXIT_OK
    files = sorted(os.listdir(out))
    assert len(files) == 6
    clip = data.load_clip(out / files[0])
    assert clip.frames.shape == (8, 32, 32, 3)


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["train", str(tmp_path / "missing.cfg")]) == EXIT_USAGE
    bad = tmp_path / "bad.cfg"
    bad.write_text("task=classify\nwibble=1\n")
    assert main(["train", str(bad)]) == EXIT_USAGE


def test_unknown_subcommand():
    assert main(["frobnicate"]) == EXIT_USAGE
