"""Chunk-based streaming/offline speech encoder kernels and CTC decoding."""

from . import containers, conv, ctc, encoder, kernels, masking, streaming
from .errors import (ChunkEncError, ConfigError, ContractViolation, ShapeError,
                     SizeError, StateError)
from .masking import ChunkSpec, DctPolicy
from .encoder import EncoderConfig

__version__ = "0.1.0"

__all__ = [
    "ChunkEncError", "ChunkSpec", "ConfigError", "ContractViolation",
    "DctPolicy", "EncoderConfig", "ShapeError", "SizeError", "StateError",
    "containers", "conv", "ctc", "encoder", "kernels", "masking", "streaming",
]
