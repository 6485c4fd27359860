"""Checkpoint serialization.

Layout: magic b"TURBO1\\n", an 8-byte little-endian unsigned header length,
a JSON header {version, created, config, step, manifest}, then contiguous
little-endian float32 blobs in manifest order.  The manifest maps each
tensor name to (shape, dtype, byte offset into the blob region).  The
"created" timestamp is the only field excluded from byte-for-byte
reproducibility comparisons.
"""

from __future__ import annotations

import json
import struct
import time

import numpy as np

from .errors import ConfigError
from .model import ModelState

MAGIC = b"TURBO1\n"
VERSION = 1


def save_checkpoint(path, state: ModelState, config_values=None, step=0, optimizer=None):
    """Write model (and optionally optimizer) tensors; float32 on disk."""
    arrays = {name: p.data for name, p in state.named_parameters()}
    if optimizer is not None:
        st = optimizer.state
        for name in optimizer.params:
            arrays[f"optim.m.{name}"] = st.m[name]
            arrays[f"optim.v.{name}"] = st.v[name]
    manifest = {}
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest[name] = {"shape": list(arr.shape), "dtype": "float32", "offset": offset}
        offset += len(blob)
        blobs.append(blob)
    header = {
        "version": VERSION,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": dict(config_values or {}),
        "step": int(step),
        "optim_steps": int(optimizer.state.step_count) if optimizer is not None else None,
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Returns (header dict, {name: float32 ndarray})."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode())
        blob = f.read()
    arrays = {}
    for name, entry in header["manifest"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arrays[name] = np.frombuffer(
            blob, dtype="<f4", count=count, offset=start
        ).reshape(shape).copy()
    return header, arrays


def restore_model(state: ModelState, arrays):
    """Load parameter arrays into an initialized model, bit-exact."""
    for name, p in state.named_parameters():
        if name not in arrays:
            raise ConfigError(f"checkpoint missing parameter {name!r}")
        arr = arrays[name].astype(p.data.dtype)
        if arr.shape != p.data.shape:
            raise ConfigError(
                f"{name}: checkpoint shape {arr.shape} vs model {p.data.shape}")
        p.data = arr
    return state


def restore_optimizer(optimizer, arrays, header):
    for name in optimizer.params:
        mk, vk = f"optim.m.{name}", f"optim.v.{name}"
        if mk in arrays:
            optimizer.state.m[name] = arrays[mk].astype(optimizer.state.m[name].dtype)
            optimizer.state.v[name] = arrays[vk].astype(optimizer.state.v[name].dtype)
    if header.get("optim_steps") is not None:
        optimizer.state.step_count = int(header["optim_steps"])
    return optimizer


def checkpoint_fingerprint(path):
    """Bytes of the checkpoint with the created timestamp normalized out."""
    with open(path, "rb") as f:
        raw = f.read()
    hlen = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])[0]
    start = len(MAGIC) + 8
    header = json.loads(raw[start : start + hlen].decode())
    header.pop("created", None)
    return json.dumps(header, sort_keys=True).encode() + raw[start + hlen :]
