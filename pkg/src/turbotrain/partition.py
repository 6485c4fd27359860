"""Three-way token partition: visible / reconstruction-target / ignored.

With n content tokens, mask ratio m and reconstruction ratio r (r <= m),
floor(n*(1-m)) tokens stay visible to the encoder, floor(n*r) become
regression targets for the decoder, and the remainder is ignored for the
whole training step.  r == m degenerates to plain masked autoencoding
(empty ignore set).  The CLS token is outside the partition domain and is
always visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ConstraintError, GeometryError
from .patches import patchify


@dataclass(frozen=True)
class PartitionPlan:
    n: int
    m: float
    r: float
    visible_idx: np.ndarray
    recon_idx: np.ndarray
    ignored_idx: np.ndarray
    seed: int = 0

    @property
    def sizes(self):
        return len(self.visible_idx), len(self.recon_idx), len(self.ignored_idx)


def partition_sizes(n, m, r):
    """(N_i, N_r, N_ignore) under floor rounding; ignored takes the remainder."""
    _validate(n, m, r)
    n_i = math.floor(n * (1.0 - m))
    n_r = math.floor(n * r)
    return n_i, n_r, n - n_i - n_r


def _validate(n, m, r):
    if n < 1:
        raise ConfigError(f"need at least one token, got n={n}")
    if not (0.0 <= m <= 1.0) or r < 0.0:
        raise ConfigError(f"ratios out of range: m={m}, r={r}")
    if r > m:
        raise ConstraintError(f"reconstruction ratio must satisfy r <= m, got r={r} > m={m}")


def make_partition(n, m, r, rng):
    """Uniformly random partition without replacement, deterministic in rng.

    rng may be a numpy Generator or an integer seed.
    """
    _validate(n, m, r)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n_i, n_r, _ = partition_sizes(n, m, r)
    perm = rng.permutation(n)
    return PartitionPlan(
        n=n,
        m=m,
        r=r,
        visible_idx=perm[:n_i],
        recon_idx=perm[n_i : n_i + n_r],
        ignored_idx=perm[n_i + n_r :],
    )


def sample_rng(global_seed, epoch, sample_index):
    """Per-sample RNG stream; deterministic and order-independent."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=global_seed, spawn_key=(epoch, sample_index))
    )


def apply_partition(tokens, plans, raw_rows=None):
    """Gather visible tokens (CLS kept at slot 0) and raw reconstruction targets.

    tokens: TokenBatch with embeddings (B, n+1, D); plans: one PartitionPlan
    per batch element, all with identical (n, m, r); raw_rows: (B, n, P)
    numpy array of pre-embedding patch rows used as regression targets.
    """
    emb = tokens.embeddings
    B = emb.shape[0]
    if len(plans) != B:
        raise GeometryError(f"{len(plans)} plans for batch of {B}")
    n = emb.shape[1] - 1
    for plan in plans:
        if plan.n != n:
            raise GeometryError(f"plan over {plan.n} tokens, batch has {n}")
    # +1 offsets skip the CLS slot; CLS itself is always index 0
    vis_idx = np.stack([np.concatenate(([0], plan.visible_idx + 1)) for plan in plans])
    visible = T.gather_tokens(emb, vis_idx)
    targets = None
    if raw_rows is not None:
        raw_rows = np.asarray(raw_rows)
        targets = np.stack([raw_rows[b][plans[b].recon_idx] for b in range(B)])
    return visible, targets


def recon_targets(video, geom, plan):
    """Raw patch rows at the reconstruction indices of a single clip."""
    rows = patchify(video, geom)
    return rows[plan.recon_idx]
