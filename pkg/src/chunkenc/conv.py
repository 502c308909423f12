"""The three depthwise-convolution behaviors and the full conv sub-module.

Regular convolution pads symmetrically and leaks (k-1)/2 future frames;
causal convolution pads left only and sees no future at all; chunk
convolution runs per chunk with the previous chunks' tail as left context
and zero padding at the chunk's right edge, so a frame can use future
context up to, but never past, its chunk boundary.

Chunk convolution threads a cache of the last L = (k-1)/2 input frames so a
stream can be fed chunk by chunk and reproduce the one-shot result exactly.
"""

from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError

CONV_MODES = ("regular", "causal", "dcconv")


def left_context_frames(kernel_size: int) -> int:
    """Cached left-context length L = (k - 1) / 2 for chunk convolution."""
    if kernel_size % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {kernel_size}")
    return (kernel_size - 1) // 2


def fresh_cache(kernel_size: int, channels: int, dtype) -> np.ndarray:
    """Zero left-context buffer, used before the first chunk of a stream."""
    return np.zeros((left_context_frames(kernel_size), channels), dtype=dtype)


def conv_regular(x: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Symmetric zero padding: frame t sees [t-L, t+L]."""
    return kernels.depthwise_conv1d(x, kern, kernels.symmetric_padding(kern.shape[0]))


def conv_causal(x: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Left-shifted kernel: frame t sees [t-(k-1), t] only."""
    return kernels.depthwise_conv1d(x, kern, kernels.causal_padding(kern.shape[0]))


def conv_dcconv(x: np.ndarray, kern: np.ndarray, chunk: int,
                cache: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Chunk convolution with cached left context.

    The input splits at multiples of ``chunk``. Each chunk is prepended with
    the L frames before it (from the cache for the first chunk, from the
    input itself afterwards, spanning earlier chunks when L > chunk) and
    convolved with symmetric padding; the first L outputs, which belong to
    the context, are dropped. A frame therefore sees [t-L, t+L] clipped to
    its chunk's right boundary. Returns the output and the rolled cache
    (last L frames of cache plus input).
    """
    k, d = np.shape(kern)
    length = left_context_frames(k)
    if chunk < 1:
        raise ConfigError(f"chunk size must be >= 1, got {chunk}")
    x = np.ascontiguousarray(x)
    if cache is None:
        cache = fresh_cache(k, d, x.dtype)
    elif cache.shape != (length, d):
        raise ShapeError(f"conv cache shape {cache.shape} != ({length}, {d})")
    t = x.shape[0]
    extended = np.concatenate([cache.astype(x.dtype, copy=False), x], axis=0)
    pieces = []
    for start in range(0, t, chunk):
        stop = min(t, start + chunk)
        window = extended[start:stop + length]
        y = kernels.depthwise_conv1d(window, kern, kernels.symmetric_padding(k))
        pieces.append(y[length:])
    out = np.concatenate(pieces, axis=0) if pieces else np.zeros_like(x)
    new_cache = extended[extended.shape[0] - length:].copy() if length else cache
    return out, new_cache


class ConvParams(object):
    """Weights of one Conformer convolution sub-module.

    Pipeline: layer_norm -> pointwise (d -> 2d) -> GLU -> depthwise (mode) ->
    per-channel scale-shift norm -> swish -> pointwise (d -> d) -> residual.
    The scale-shift norm is the inference form y = (x - m) * s + b with
    stored statistics, so it is streaming-safe; defaults are the identity.
    """

    def __init__(self, norm_gamma, norm_beta, pw_in_w, pw_in_b, depthwise,
                 pw_out_w, pw_out_b, ssn_mean=None, ssn_scale=None, ssn_shift=None):
        self.norm_gamma = norm_gamma
        self.norm_beta = norm_beta
        self.pw_in_w = pw_in_w
        self.pw_in_b = pw_in_b
        self.depthwise = depthwise
        self.pw_out_w = pw_out_w
        self.pw_out_b = pw_out_b
        d = depthwise.shape[1]
        dtype = depthwise.dtype
        self.ssn_mean = np.zeros(d, dtype) if ssn_mean is None else ssn_mean
        self.ssn_scale = np.ones(d, dtype) if ssn_scale is None else ssn_scale
        self.ssn_shift = np.zeros(d, dtype) if ssn_shift is None else ssn_shift
        d_model = pw_in_w.shape[0]
        if pw_in_w.shape != (d_model, 2 * d_model) or depthwise.shape[1] != d_model:
            raise ShapeError(
                f"conv params inconsistent: pw_in {pw_in_w.shape}, depthwise {depthwise.shape}")
        if pw_out_w.shape != (d_model, d_model):
            raise ShapeError(f"pw_out shape {pw_out_w.shape} != ({d_model}, {d_model})")

    @property
    def kernel_size(self) -> int:
        return self.depthwise.shape[0]


def _depthwise_by_mode(x, params: ConvParams, mode: str, chunk, cache):
    """Run the selected depthwise behavior, threading the cache when present.

    A cache is only meaningful for chunked processing (dcconv offline) or
    streaming. For streaming, causal mode caches k-1 frames instead of L and
    regular mode is handled upstream (a stream has no future to read).
    """
    kern = params.depthwise
    if mode == "regular":
        return conv_regular(x, kern), None
    if mode == "causal":
        if cache is None:
            return conv_causal(x, kern), None
        span = kern.shape[0] - 1
        if cache.shape != (span, x.shape[1]):
            raise ShapeError(f"causal cache shape {cache.shape} != ({span}, {x.shape[1]})")
        merged = np.concatenate([cache, x], axis=0)
        y = conv_causal(merged, kern)
        return y[span:], merged[merged.shape[0] - span:].copy()
    if mode == "dcconv":
        if chunk is None:
            chunk = max(1, x.shape[0])
        return conv_dcconv(x, kern, chunk, cache)
    raise ConfigError(f"conv mode must be one of {CONV_MODES}, got {mode!r}")


def conv_pipeline(x: np.ndarray, params: ConvParams, mode: str,
                  chunk: Optional[int] = None, cache: Optional[np.ndarray] = None):
    """Convolution sub-module without the residual.

    Returns (output, new_cache, depthwise_input) — the depthwise input rows
    (post-GLU) are what a streaming runtime must retain as left context for
    subsequent windows.
    """
    h = kernels.layer_norm(x, params.norm_gamma, params.norm_beta)
    h = kernels.glu(kernels.linear(h, params.pw_in_w, params.pw_in_b))
    y, new_cache = _depthwise_by_mode(h, params, mode, chunk, cache)
    y = (y - params.ssn_mean) * params.ssn_scale + params.ssn_shift
    y = kernels.swish(y)
    y = kernels.linear(y, params.pw_out_w, params.pw_out_b)
    return y, new_cache, h


def conv_module(x: np.ndarray, params: ConvParams, mode: str,
                chunk: Optional[int] = None, cache: Optional[np.ndarray] = None):
    """Full convolution sub-module with residual: x + pipeline(x)."""
    y, new_cache, _ = conv_pipeline(x, params, mode, chunk, cache)
    return x + y, new_cache
