"""Attention visibility masks and the dynamic chunk-size sampling policy.

Masks are dense (T_q, T_k) bool arrays, True = attendable. Chunk masks give
every query frame its whole chunk plus a bounded run of left context, so the
encoder look-ahead stays below the chunk size no matter how many layers are
stacked; window masks give fixed per-frame spans whose look-ahead compounds
per layer.

``None`` stands for unlimited context everywhere a chunk size or left
context is optional (utterance-sized chunk, all left frames).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, ContractViolation
from .rng import Xorshift64

DEFAULT_FRAME_MS = 40.0


@dataclass(frozen=True)
class ChunkSpec:
    """Streaming geometry: chunk size, window overlap, attention left context.

    ``left_context_frames=None`` means all left context. The overlap ratio
    must be one of 0, 0.5, 0.75; the resulting window stride is
    ``round(C * (1 - r))`` and must be at least one frame.
    """

    chunk_frames: int
    overlap_ratio: float = 0.0
    left_context_frames: Optional[int] = None
    frame_ms: float = DEFAULT_FRAME_MS

    ALLOWED_OVERLAPS = (0.0, 0.5, 0.75)

    def __post_init__(self):
        if self.chunk_frames < 1:
            raise ConfigError(f"chunk_frames must be >= 1, got {self.chunk_frames}")
        if self.overlap_ratio not in self.ALLOWED_OVERLAPS:
            raise ConfigError(
                f"overlap_ratio must be one of {self.ALLOWED_OVERLAPS}, got {self.overlap_ratio}")
        if self.left_context_frames is not None and self.left_context_frames < 0:
            raise ConfigError(
                f"left_context_frames must be >= 0 or None, got {self.left_context_frames}")
        if self.frame_ms <= 0:
            raise ConfigError(f"frame_ms must be positive, got {self.frame_ms}")
        if self.stride < 1:
            raise ConfigError(f"window stride is {self.stride}, need >= 1")

    @property
    def stride(self) -> int:
        # floor(x + 0.5), not banker's rounding, so every language agrees
        return int(np.floor(self.chunk_frames * (1.0 - self.overlap_ratio) + 0.5))

    @property
    def chunk_ms(self) -> float:
        return self.chunk_frames * self.frame_ms

    @property
    def left_context_ms(self) -> Optional[float]:
        if self.left_context_frames is None:
            return None
        return self.left_context_frames * self.frame_ms


@dataclass(frozen=True)
class DctPolicy:
    """Sampling policy for dynamic chunk training draws."""

    c_min: int = 8
    c_max: int = 32
    full_context_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.c_min <= self.c_max:
            raise ConfigError(f"need 1 <= c_min <= c_max, got [{self.c_min}, {self.c_max}]")
        if not 0.0 <= self.full_context_prob <= 1.0:
            raise ConfigError(f"full_context_prob must be in [0, 1], got {self.full_context_prob}")


def chunk_mask(t: int, c: int, left_context: Optional[int]) -> np.ndarray:
    """Chunk visibility: frame t sees its chunk plus ``left_context`` frames.

    Query frame in chunk i (i = t // c) sees key columns
    [max(0, i*c - left_context), min(t_total, (i+1)*c)); ``None`` drops the
    lower bound to 0.
    """
    if t < 1 or c < 1:
        raise ConfigError(f"need T >= 1 and C >= 1, got T={t}, C={c}")
    if left_context is not None and left_context < 0:
        raise ConfigError(f"left_context must be >= 0 or None, got {left_context}")
    mask = np.zeros((t, t), dtype=bool)
    for row in range(t):
        chunk_idx = row // c
        end = min(t, (chunk_idx + 1) * c)
        start = 0 if left_context is None else max(0, chunk_idx * c - left_context)
        mask[row, start:end] = True
    return mask


def window_mask(t: int, right: int, left: int) -> np.ndarray:
    """Sliding-window visibility: frame t sees [t-left, t+right] clipped."""
    if t < 1:
        raise ConfigError(f"need T >= 1, got {t}")
    if right < 0 or left < 0:
        raise ConfigError(f"window spans must be >= 0, got right={right}, left={left}")
    mask = np.zeros((t, t), dtype=bool)
    for row in range(t):
        mask[row, max(0, row - left):min(t, row + right + 1)] = True
    return mask


def full_mask(rows: int, cols: Optional[int] = None) -> np.ndarray:
    return np.ones((rows, rows if cols is None else cols), dtype=bool)


def sample_dct(policy: DctPolicy, t: int, rng: Xorshift64) -> Tuple[int, Optional[int]]:
    """Draw one (chunk size, left context) training configuration.

    Draw order, one rng call each: (1) full-context Bernoulli (uniform <
    full_context_prob, always drawn); on full context, returns (t, None).
    Otherwise (2) chunk size uniform on [c_min, c_max]; (3) left context as
    whole chunks, uniform on [0, ceil(t/C) - 1], returned in frames, with the
    maximum draw standing for all left context (None).
    """
    if t < 1:
        raise ConfigError(f"need T >= 1, got {t}")
    if rng.uniform() < policy.full_context_prob:
        return t, None
    c = rng.randint(policy.c_min, policy.c_max)
    max_left_chunks = (t + c - 1) // c - 1
    left_chunks = rng.randint(0, max_left_chunks)
    if left_chunks == max_left_chunks:
        return c, None
    return c, left_chunks * c


def receptive_field(mask_kind: str, layers: int, c: Optional[int] = None,
                    right: Optional[int] = None, t: int = 0) -> int:
    """Look-ahead (future frames influencing frame t) for a stacked encoder.

    Chunk masking bounds the look-ahead by the frame's distance to its chunk
    end regardless of depth; window masking compounds ``right`` per layer.
    Left context never adds look-ahead, so it does not appear here.
    """
    if layers < 1:
        raise ConfigError(f"need layers >= 1, got {layers}")
    if mask_kind == "chunk":
        if c is None or c < 1:
            raise ConfigError("chunk receptive field needs a chunk size")
        return (t // c + 1) * c - 1 - t
    if mask_kind == "window":
        if right is None or right < 0:
            raise ConfigError("window receptive field needs a right span")
        return layers * right
    raise ConfigError(f"mask_kind must be 'chunk' or 'window', got {mask_kind!r}")


def mask_to_ascii(mask: np.ndarray) -> str:
    """Render a mask as one grid row per query frame: '#' visible, '.' hidden."""
    if mask.ndim != 2:
        raise ContractViolation(f"mask must be 2-D, got shape {mask.shape}")
    return "\n".join("".join("#" if v else "." for v in row) for row in mask)
