"""Flat key=value config parsing: defaults, errors with line numbers,
overrides, validation."""

import pytest

from turbotrain.config import parse_config_text, load_config
from turbotrain.errors import ConfigError

MINIMAL = "task=classify\n"


def test_defaults_fill_in():
    run = parse_config_text(MINIMAL)
    assert run.task == "classify"
    assert run.epochs == 30
    assert run.batch_size == 32
    assert run.mask_ratio == 0.5
    assert run.dataset == "shapes"


def test_task_is_required():
    with pytest.raises(ConfigError, match="task"):
        parse_config_text("epochs=10\n")


def test_unknown_key_reports_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("task=classify\nepochs=10\nwibble=1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("task=classify\ntask=contrast\n")


def test_unparseable_value_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("task=classify\nepochs=ten\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="key=value"):
        parse_config_text("task classify\n")


def test_comments_and_blanks_ignored():
    run = parse_config_text("# a comment\n\ntask=classify\nepochs = 5\n")
    assert run.epochs == 5


def test_ratio_constraint_enforced():
    with pytest.raises(ConfigError, match="ratio"):
        parse_config_text("task=classify\nmask_ratio=0.25\nrecon_ratio=0.5\n")
    with pytest.raises(ConfigError, match="ratio"):
        parse_config_text("task=classify\nmask_ratio=1.0\nrecon_ratio=0.0\n")


def test_bool_parsing():
    run = parse_config_text("task=contrast\nnormalize_embeddings=false\n")
    assert run.normalize_embeddings is False
    with pytest.raises(ConfigError):
        parse_config_text("task=contrast\nnormalize_embeddings=2\n")


def test_overrides_win():
    run = parse_config_text(MINIMAL, {"seed": 9})
    assert run.seed == 9
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text(MINIMAL, {"nope": 1})


def test_model_config_round_trip():
    run = parse_config_text("task=contrast\nmask_ratio=0.75\nrecon_ratio=0.25\n")
    cfg = run.model_config()
    assert cfg.task == "contrast"
    assert (cfg.m, cfg.r) == (0.75, 0.25)
    assert cfg.geometry.n == 64


def test_load_config_from_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("task=classify\nepochs=3\n")
    assert load_config(p).epochs == 3
