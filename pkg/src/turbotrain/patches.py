"""Video patchification and token embedding.

A clip of T frames is cut into non-overlapping t*h*w spatio-temporal
patches (floor semantics: remainder frames/pixels are dropped), flattened
per patch in (frame, row, column, channel) order, linearly embedded, and
prepended with a learnable CLS token.  Positional encodings are a 1-D
sinusoidal table over the flat token index with CLS at index 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import GeometryError


@dataclass(frozen=True)
class PatchGeometry:
    """Frame/patch extents and the derived token counts."""

    T: int
    H: int
    W: int
    t: int
    h: int
    w: int
    channels: int = 3

    def __post_init__(self):
        for name in ("t", "h", "w"):
            if getattr(self, name) < 1:
                raise GeometryError(f"patch extent {name} must be >= 1")
        if self.t > self.T or self.h > self.H or self.w > self.W:
            raise GeometryError(
                f"patch ({self.t},{self.h},{self.w}) larger than volume "
                f"({self.T},{self.H},{self.W})"
            )

    @property
    def n_t(self):
        return self.T // self.t

    @property
    def n_h(self):
        return self.H // self.h

    @property
    def n_w(self):
        return self.W // self.w

    @property
    def n(self):
        return self.n_t * self.n_h * self.n_w

    @property
    def patch_dim(self):
        return self.t * self.h * self.w * self.channels


@dataclass
class TokenBatch:
    """Embedded tokens [CLS, v_1..v_n] + PE; embeddings shape (B, n+1, D)."""

    embeddings: T.Tensor
    geometry: PatchGeometry
    pe_kind: str = "sinusoidal"


def count_tokens(T_, H, W, t, h, w):
    geom = PatchGeometry(T_, H, W, t, h, w)
    return geom.n_t, geom.n_h, geom.n_w, geom.n


def patchify(video, geom):
    """(T,H,W,C) or (B,T,H,W,C) array -> (.., n, t*h*w*C) patch rows.

    Row order is time-major, then height, then width.
    """
    video = np.asarray(video)
    batched = video.ndim == 5
    if not batched:
        video = video[None]
    B = video.shape[0]
    if video.shape[-1] != geom.channels:
        raise GeometryError(
            f"expected {geom.channels} channels, got {video.shape[-1]}"
        )
    if video.shape[1] < geom.t or video.shape[2] < geom.h or video.shape[3] < geom.w:
        raise GeometryError(f"video {video.shape[1:]} smaller than one patch")
    nt = video.shape[1] // geom.t
    nh = video.shape[2] // geom.h
    nw = video.shape[3] // geom.w
    v = video[:, : nt * geom.t, : nh * geom.h, : nw * geom.w]
    v = v.reshape(B, nt, geom.t, nh, geom.h, nw, geom.w, geom.channels)
    v = v.transpose(0, 1, 3, 5, 2, 4, 6, 7)  # B, nt, nh, nw, t, h, w, C
    rows = v.reshape(B, nt * nh * nw, geom.t * geom.h * geom.w * geom.channels)
    return rows if batched else rows[0]


def unpatchify(rows, geom):
    """Exact inverse of patchify on the covered region."""
    rows = np.asarray(rows)
    batched = rows.ndim == 3
    if not batched:
        rows = rows[None]
    B = rows.shape[0]
    if rows.shape[1] != geom.n:
        raise GeometryError(f"expected {geom.n} rows, got {rows.shape[1]}")
    v = rows.reshape(B, geom.n_t, geom.n_h, geom.n_w, geom.t, geom.h, geom.w, geom.channels)
    v = v.transpose(0, 1, 4, 2, 5, 3, 6, 7)
    v = v.reshape(
        B, geom.n_t * geom.t, geom.n_h * geom.h, geom.n_w * geom.w, geom.channels
    )
    return v if batched else v[0]


def sinusoidal_pe(num_positions, dim, dtype=np.float64):
    """Interleaved sine/cosine table over flat index; PE[0,(0,1)] = (0,1)."""
    pos = np.arange(num_positions, dtype=np.float64)[:, None]
    i = np.arange((dim + 1) // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    pe = np.zeros((num_positions, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : dim // 2])
    return pe.astype(dtype)


def embed(patch_rows, w_embed, b_embed, cls_param, geom, pe=None):
    """Embed raw patch rows and prepend CLS; returns a TokenBatch.

    patch_rows: (B, n, P) numpy array (raw pixels, not differentiated).
    """
    rows = np.asarray(patch_rows)
    if rows.ndim == 2:
        rows = rows[None]
    B, n, P = rows.shape
    D = w_embed.shape[1]
    if pe is None:
        pe = sinusoidal_pe(n + 1, D, dtype=w_embed.data.dtype)
    tok = T.matmul(T.Tensor(rows.astype(w_embed.data.dtype)), w_embed) + b_embed
    cls = T.Tensor(np.zeros((B, 1, D), dtype=w_embed.data.dtype)) + cls_param
    full = T.concat([cls, tok], axis=1) + T.Tensor(pe[None, : n + 1].astype(w_embed.data.dtype))
    return TokenBatch(embeddings=full, geometry=geom)
