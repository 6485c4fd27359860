"""Flat key=value run-configuration files.

Unknown keys are a hard error (no silent typos); every malformed input
yields a diagnostic with its line number, never a crash.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .model import TurboConfig
from .patches import PatchGeometry

_BOOLS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

# key -> (type, default); None default means required
SCHEMA = {
    "task": (str, None),
    "frames": (int, 8),
    "image_size": (int, 32),
    "patch_t": (int, 2),
    "patch_h": (int, 8),
    "patch_w": (int, 8),
    "enc_depth": (int, 4),
    "enc_dim": (int, 64),
    "enc_heads": (int, 4),
    "dec_depth": (int, 2),
    "dec_dim": (int, 32),
    "dec_heads": (int, 2),
    "mask_ratio": (float, 0.5),
    "recon_ratio": (float, 0.5),
    "num_classes": (int, 16),
    "proj_dim": (int, 32),
    "batch_size": (int, 32),
    "epochs": (int, 30),
    "base_lr": (float, 1e-3),
    "warmup_epochs": (float, 2.0),
    "weight_decay": (float, 0.05),
    "seed": (int, 0),
    "dataset": (str, "shapes"),
    "normalize_embeddings": (bool, True),
    "temperature": (float, 1.0),
    "log_base": (str, "e"),
    "out_dir": (str, "runs"),
    # dataset sizing (toy-scale knobs)
    "train_samples": (int, 2000),
    "test_samples": (int, 400),
    "checkpoint_every": (int, 0),
}

_TASKS = {"classify", "contrast", "long_classify"}
_DATASETS = {"shapes", "pairs", "longvideo"}


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key)

    def model_config(self):
        geom = PatchGeometry(
            T=self.frames, H=self.image_size, W=self.image_size,
            t=self.patch_t, h=self.patch_h, w=self.patch_w,
        )
        return TurboConfig(
            geometry=geom,
            enc_depth=self.enc_depth, enc_dim=self.enc_dim, enc_heads=self.enc_heads,
            dec_depth=self.dec_depth, dec_dim=self.dec_dim, dec_heads=self.dec_heads,
            num_classes=self.num_classes, proj_dim=self.proj_dim,
            m=self.mask_ratio, r=self.recon_ratio,
            task=self.task, temperature=self.temperature,
            normalize_embeddings=self.normalize_embeddings, log_base=self.log_base,
        )


def _coerce(key, raw, lineno):
    typ, _ = SCHEMA[key]
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low not in _BOOLS:
                raise ValueError(raw)
            return _BOOLS[low]
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key}={raw!r} as {typ.__name__}")


def parse_config_text(text, overrides=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw, lineno)
    for key, raw in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _coerce(key, str(raw), 0) if not isinstance(raw, SCHEMA[key][0]) else raw
    for key, (typ, default) in SCHEMA.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default
    _validate(values)
    return RunConfig(values)


def load_config(path, overrides=None):
    with open(path) as f:
        return parse_config_text(f.read(), overrides)


def _validate(v):
    if v["task"] not in _TASKS:
        raise ConfigError(f"task must be one of {sorted(_TASKS)}, got {v['task']!r}")
    if v["dataset"] not in _DATASETS:
        raise ConfigError(f"dataset must be one of {sorted(_DATASETS)}, got {v['dataset']!r}")
    m, r = v["mask_ratio"], v["recon_ratio"]
    if not (0.0 <= r <= m < 1.0):
        raise ConfigError(f"ratios must satisfy 0 <= r <= m < 1, got m={m}, r={r}")
    if v["batch_size"] < 2:
        raise ConfigError("batch_size must be >= 2")
