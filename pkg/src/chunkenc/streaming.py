"""Stateful chunk-by-chunk inference over the encoder stack.

A stream buffers raw input frames through the subsampler, forms encoder-rate
windows of ``chunk_frames`` starting at the first uncommitted frame, runs
each window through all layers with full attention over [cached keys ||
window], and commits exactly the first ``stride`` output frames of every
window (the flush commits whatever remains). Caches hold only committed
material: per layer, the projected K/V of committed frames (capped at the
attention left context) and the depthwise-conv input tail. With no overlap
the committed outputs reproduce the offline chunk-masked forward pass
exactly; with overlap, committed frames simply see more within-window
right context than the worst offline position would.

Latency here is algorithmic frame latency: a frame commits when the last
frame of its committing window arrives.
"""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .encoder import EncoderConfig, block_forward, cast_weights, layer_view, subsample
from .errors import ConfigError, StateError
from .masking import ChunkSpec, full_mask
from .conv import left_context_frames


@dataclass(frozen=True)
class LatencyReport:
    per_frame_ms: List[float]
    average_ms: float
    chunk_count: int


def average_latency(spec: ChunkSpec) -> float:
    """Steady-state mean commit latency in milliseconds.

    A frame at offset p in [0, stride) of its committing window waits for
    the window to fill: (C - p) frames. Averaging over p gives
    (C - (stride - 1) / 2) * frame_ms.
    """
    return (spec.chunk_frames - (spec.stride - 1) / 2.0) * spec.frame_ms


class StreamState(object):
    """Single-owner incremental encoder state; create via ``open_stream``."""

    def __init__(self, config: EncoderConfig, weights: Dict[str, np.ndarray],
                 spec: ChunkSpec):
        if not isinstance(spec, ChunkSpec):
            raise ConfigError(f"spec must be a ChunkSpec, got {type(spec).__name__}")
        self.config = config
        self.spec = spec
        self.dtype = config.dtype
        self.weights = cast_weights(weights, self.dtype)
        d = config.d_model
        # streams cannot read the future, so regular conv degrades to the
        # chunk behavior (right-clipped at the window edge)
        self._conv_mode = "dcconv" if config.conv_mode == "regular" else config.conv_mode
        if self._conv_mode == "causal":
            ctx_rows = config.kernel_size - 1
        else:
            ctx_rows = left_context_frames(config.kernel_size)
        self._kv = [(np.zeros((0, d), self.dtype), np.zeros((0, d), self.dtype))
                    for _ in range(config.layers)]
        self._conv_ctx = [np.zeros((ctx_rows, d), self.dtype) for _ in range(config.layers)]
        self._residue = np.zeros((0, config.input_dim), self.dtype)
        self._pending = np.zeros((0, d), self.dtype)
        self._committed = 0
        self._windows = 0
        self._latency_ms: List[float] = []
        self._closed = False

    @property
    def committed_frames(self) -> int:
        return self._committed

    def _check_open(self):
        if self._closed:
            raise StateError("stream is closed")

    def _run_window(self, window: np.ndarray, commit_n: int) -> np.ndarray:
        w = window.shape[0]
        start = self._committed
        cap = self.spec.left_context_frames
        x = window
        for i in range(self.config.layers):
            k_cache, v_cache = self._kv[i]
            mask = full_mask(w, k_cache.shape[0] + w)
            x, aux = block_forward(
                x, mask, layer_view(self.weights, i), self.config.block_kind,
                self._conv_mode, w, self.config.heads, self.config.merge_kind,
                kv_cache=(k_cache, v_cache), conv_cache=self._conv_ctx[i], offset=start)
            k_new = np.concatenate([k_cache, aux.kv[0][:commit_n]], axis=0)
            v_new = np.concatenate([v_cache, aux.kv[1][:commit_n]], axis=0)
            if cap is not None:
                k_new = k_new[max(0, k_new.shape[0] - cap):]
                v_new = v_new[max(0, v_new.shape[0] - cap):]
            self._kv[i] = (k_new, v_new)
            ctx = np.concatenate([self._conv_ctx[i], aux.conv_rows[:commit_n]], axis=0)
            self._conv_ctx[i] = ctx[ctx.shape[0] - self._conv_ctx[i].shape[0]:]
        self._windows += 1
        self._latency_ms.extend(
            float((w - p) * self.spec.frame_ms) for p in range(commit_n))
        self._committed += commit_n
        return x[:commit_n]

    def push_frames(self, features: np.ndarray) -> np.ndarray:
        """Feed input-rate frames; returns newly committed encoder frames."""
        self._check_open()
        features = np.ascontiguousarray(features, dtype=self.dtype)
        if features.ndim != 2 or features.shape[1] != self.config.input_dim:
            raise ConfigError(
                f"features must be (T0, {self.config.input_dim}), got {features.shape}")
        buf = np.concatenate([self._residue, features], axis=0)
        f = self.config.subsample_factor
        whole = (buf.shape[0] // f) * f
        if whole:
            new = subsample(buf[:whole], self.weights, f)
            self._pending = np.concatenate([self._pending, new], axis=0)
        self._residue = buf[whole:]
        c = self.spec.chunk_frames
        stride = self.spec.stride
        out = []
        while self._pending.shape[0] >= c:
            out.append(self._run_window(self._pending[:c], stride))
            self._pending = self._pending[stride:]
        if out:
            return np.concatenate(out, axis=0)
        return np.zeros((0, self.config.d_model), self.dtype)

    def flush(self) -> np.ndarray:
        """Process the final partial window, commit the rest, close the stream."""
        self._check_open()
        self._closed = True
        self._residue = self._residue[:0]
        if self._pending.shape[0] == 0:
            return np.zeros((0, self.config.d_model), self.dtype)
        out = self._run_window(self._pending, self._pending.shape[0])
        self._pending = self._pending[:0]
        return out

    def latency_report(self) -> LatencyReport:
        avg = float(np.mean(self._latency_ms)) if self._latency_ms else 0.0
        return LatencyReport(list(self._latency_ms), avg, self._windows)


def open_stream(config: EncoderConfig, weights: Dict[str, np.ndarray],
                spec: ChunkSpec) -> StreamState:
    return StreamState(config, weights, spec)


def stream_utterance(config: EncoderConfig, weights: Dict[str, np.ndarray],
                     spec: ChunkSpec, features: np.ndarray,
                     push_size: int = 0) -> np.ndarray:
    """Run one utterance through a fresh stream and return all committed frames.

    ``push_size`` splits the input into pushes of that many input frames
    (0 = one push); the result is identical either way.
    """
    state = open_stream(config, weights, spec)
    pieces = []
    if push_size <= 0:
        pieces.append(state.push_frames(features))
    else:
        for lo in range(0, features.shape[0], push_size):
            pieces.append(state.push_frames(features[lo:lo + push_size]))
    pieces.append(state.flush())
    return np.concatenate(pieces, axis=0)
