"""Sparse-token video transformer training with a partial masked
autoencoder objective, plus an analytic training-cost model."""

from .model import TurboConfig, init_model, reference_config, toy_config
from .partition import PartitionPlan, make_partition, partition_sizes
from .patches import PatchGeometry, count_tokens, patchify, unpatchify
from .tensor import Tensor

__all__ = [
    "PatchGeometry", "PartitionPlan", "Tensor", "TurboConfig",
    "count_tokens", "init_model", "make_partition", "partition_sizes",
    "patchify", "reference_config", "toy_config", "unpatchify",
]

__version__ = "0.1.0"
