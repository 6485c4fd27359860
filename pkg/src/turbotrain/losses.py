"""Training objectives: pixel reconstruction, cross-entropy, bidirectional
InfoNCE, and the weighted combinations used by each task.

Loss-balance weights follow 1/log(num_classes) for cross-entropy and
1/log(batch_size) for InfoNCE; "log" is natural log by default so that the
uniform-logit loss times its weight equals exactly 1 (configurable base).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, DataError, ShapeMismatch

_LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


@dataclass
class LossBundle:
    total: T.Tensor
    parts: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)


def _log_base(base):
    if str(base) not in _LOG_BASES:
        raise ConfigError(f"log base must be one of {sorted(_LOG_BASES)}, got {base!r}")
    return _LOG_BASES[str(base)]


def lambda_ce(num_classes, base="e"):
    if num_classes < 2:
        raise ConfigError(f"cross-entropy weight needs num_classes >= 2, got {num_classes}")
    return 1.0 / (math.log(num_classes) / math.log(_log_base(base)))


def lambda_nce(batch_size, base="e"):
    if batch_size < 2:
        raise ConfigError(f"InfoNCE needs batch_size >= 2 for negatives, got {batch_size}")
    return 1.0 / (math.log(batch_size) / math.log(_log_base(base)))


def normalize_targets(rows, eps=1e-6):
    """Standardize each patch row to mean 0 / var 1 with its own statistics."""
    rows = np.asarray(rows)
    mu = rows.mean(axis=-1, keepdims=True)
    var = rows.var(axis=-1, keepdims=True)
    return (rows - mu) / np.sqrt(var + eps)


def pmae_loss(predicted_rows, target_rows, normalize=True):
    """Mean squared error over all elements; exact 0 when there are no targets."""
    target_rows = np.asarray(target_rows)
    if target_rows.size == 0:
        return T.Tensor(np.zeros((), dtype=T.default_dtype()))
    if tuple(predicted_rows.shape) != target_rows.shape:
        raise ShapeMismatch(
            f"prediction {predicted_rows.shape} vs target {target_rows.shape}"
        )
    tgt = normalize_targets(target_rows) if normalize else target_rows
    diff = predicted_rows - T.Tensor(tgt.astype(predicted_rows.data.dtype))
    return (diff * diff).mean()


def log_softmax(x, axis=-1):
    # max shift is a constant wrt the graph; the shifted logsumexp is exact
    shift = T.Tensor(np.max(x.data, axis=axis, keepdims=True))
    xs = x - shift
    return xs - T.log(T.exp(xs).sum(axis=axis, keepdims=True))


def ce_loss(logits, labels):
    """Softmax cross-entropy, mean over the batch."""
    labels = np.asarray(labels, dtype=np.int64)
    B, C = logits.shape
    if labels.min() < 0 or labels.max() >= C:
        raise DataError(f"label out of range [0,{C})")
    onehot = np.zeros((B, C), dtype=logits.data.dtype)
    onehot[np.arange(B), labels] = 1.0
    lp = log_softmax(logits, axis=-1)
    return T.scale((lp * T.Tensor(onehot)).sum(), -1.0 / B)


def info_nce(z_v, z_t, temperature=1.0):
    """Bidirectional InfoNCE with in-batch negatives.

    -1/2 * mean_i [ log softmax_row(S)_ii + log softmax_col(S)_ii ],
    S_ij = (z_v_i . z_t_j) / temperature.
    """
    B = z_v.shape[0]
    if B < 2:
        raise ConfigError(f"InfoNCE needs batch >= 2, got {B}")
    if temperature <= 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    s = T.scale(T.matmul(z_v, T.transpose(z_t, (1, 0))), 1.0 / temperature)
    eye = T.Tensor(np.eye(B, dtype=s.data.dtype))
    v2t = (log_softmax(s, axis=1) * eye).sum()
    t2v = (log_softmax(s, axis=0) * eye).sum()
    return T.scale(v2t + t2v, -0.5 / B)


def combine(task, parts, weights):
    """Weighted total per task; parts values are scalar Tensors."""
    pmae = parts.get("pmae")
    if pmae is None:
        raise ConfigError("combine: missing pmae part")
    if task in ("classify", "long_classify"):
        if "ce" not in parts or "lambda_ce" not in weights:
            raise ConfigError("classification combine needs ce part and lambda_ce weight")
        total = T.scale(parts["ce"], weights["lambda_ce"]) + pmae
    elif task == "contrast":
        if "nce" not in parts or "lambda_nce" not in weights:
            raise ConfigError("contrastive combine needs nce part and lambda_nce weight")
        total = T.scale(parts["nce"], weights["lambda_nce"]) + pmae
    else:
        raise ConfigError(f"unknown task {task!r}")
    scalar_parts = {k: float(v.data) for k, v in parts.items()}
    return LossBundle(total=total, parts=scalar_parts, weights=dict(weights))
