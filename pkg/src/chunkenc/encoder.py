"""Conformer-style encoder stacks built from the kernel primitives.

Two block layouts share one weight scheme:

* sequential (macaron): x + half FF, x + MHSA(LN(x)), conv module with its
  own residual, x + half FF, final LN;
* parallel: MHSA and the conv pipeline run on the same input, their outputs
  merge (concat + linear, or sum), residual around the merge, then one half
  FF and the final LN.

Position information is absolute sinusoidal, added to the attention input
with a global frame offset, so a window computed mid-stream sees exactly the
positions the offline pass sees.

Weight names (``EncoderWeights`` is a plain dict of float arrays):

    subsample.proj.{weight,bias}
    layer.{i}.ff_pre.{norm.gamma,norm.beta,lin1.weight,lin1.bias,lin2.weight,lin2.bias}
    layer.{i}.attn.{norm.gamma,norm.beta,q.weight,q.bias,k.weight,k.bias,
                    v.weight,v.bias,out.weight,out.bias}
    layer.{i}.conv.{norm.gamma,norm.beta,pw_in.weight,pw_in.bias,depthwise.weight,
                    ssn.mean,ssn.scale,ssn.shift,pw_out.weight,pw_out.bias}
    layer.{i}.merge.{weight,bias}              # parallel blocks only
    layer.{i}.ff_post.{...}                    # same scheme as ff_pre
    layer.{i}.final_norm.{gamma,beta}
    head.{weight,bias}                         # optional CTC projection

``ff_pre`` exists only in sequential blocks. Linear weights are stored
(in_dim, out_dim) row-major.
"""

import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from . import kernels
from .conv import ConvParams, conv_pipeline
from .errors import ConfigError, ShapeError
from .masking import chunk_mask, full_mask
from .rng import Xorshift64

BLOCK_KINDS = ("sequential", "parallel")
MERGE_KINDS = ("concat", "sum")


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 4
    d_model: int = 64
    heads: int = 4
    ff_dim: int = 128
    kernel_size: int = 15
    block_kind: str = "sequential"
    conv_mode: str = "dcconv"
    subsample_factor: int = 4
    input_dim: int = 80
    merge_kind: str = "concat"
    precision: str = "single"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.subsample_factor < 1:
            raise ConfigError(f"subsample_factor must be >= 1, got {self.subsample_factor}")
        if self.block_kind not in BLOCK_KINDS:
            raise ConfigError(f"block_kind must be one of {BLOCK_KINDS}, got {self.block_kind!r}")
        if self.merge_kind not in MERGE_KINDS:
            raise ConfigError(f"merge_kind must be one of {MERGE_KINDS}, got {self.merge_kind!r}")
        kernels.resolve_dtype(self.precision)

    @property
    def dtype(self):
        return kernels.resolve_dtype(self.precision)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


def _uniform(rng: Xorshift64, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    n = int(np.prod(shape))
    flat = np.empty(n, dtype=np.float64)
    for i in range(n):
        flat[i] = (rng.uniform() * 2.0 - 1.0) * bound
    return flat.reshape(shape).astype(np.float32)


def init_weights(config: EncoderConfig, seed: Optional[int] = None,
                 vocab_size: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Deterministic float32 initialization, uniform in +-1/sqrt(fan_in).

    Tensors are drawn from a single xorshift64* stream in the insertion
    order of the returned dict (row-major within a tensor), so one seed
    always yields byte-identical weights. Norm and scale-shift parameters
    are set to the identity, not drawn. ``vocab_size`` appends a CTC
    projection head.
    """
    rng = Xorshift64(config.seed if seed is None else seed)
    d = config.d_model
    w: Dict[str, np.ndarray] = {}

    def lin(prefix, fan_in, fan_out):
        w[prefix + ".weight"] = _uniform(rng, (fan_in, fan_out), fan_in)
        w[prefix + ".bias"] = _uniform(rng, (fan_out,), fan_in)

    def norm(prefix, dim):
        w[prefix + ".gamma"] = np.ones(dim, dtype=np.float32)
        w[prefix + ".beta"] = np.zeros(dim, dtype=np.float32)

    def ff(prefix):
        norm(prefix + ".norm", d)
        lin(prefix + ".lin1", d, config.ff_dim)
        lin(prefix + ".lin2", config.ff_dim, d)

    lin("subsample.proj", config.subsample_factor * config.input_dim, d)
    for i in range(config.layers):
        p = f"layer.{i}"
        if config.block_kind == "sequential":
            ff(p + ".ff_pre")
        norm(p + ".attn.norm", d)
        for name in ("q", "k", "v", "out"):
            lin(f"{p}.attn.{name}", d, d)
        norm(p + ".conv.norm", d)
        lin(p + ".conv.pw_in", d, 2 * d)
        w[p + ".conv.depthwise.weight"] = _uniform(
            rng, (config.kernel_size, d), config.kernel_size)
        w[p + ".conv.ssn.mean"] = np.zeros(d, dtype=np.float32)
        w[p + ".conv.ssn.scale"] = np.ones(d, dtype=np.float32)
        w[p + ".conv.ssn.shift"] = np.zeros(d, dtype=np.float32)
        lin(p + ".conv.pw_out", d, d)
        if config.block_kind == "parallel":
            lin(p + ".merge", 2 * d, d)
        ff(p + ".ff_post")
        norm(p + ".final_norm", d)
    if vocab_size is not None:
        if vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {vocab_size}")
        lin("head", d, vocab_size)
    return w


def cast_weights(weights: Dict[str, np.ndarray], dtype) -> Dict[str, np.ndarray]:
    """Cast every tensor to ``dtype``; identity when already there."""
    if all(v.dtype == dtype for v in weights.values()):
        return weights
    return {k: np.ascontiguousarray(v, dtype=dtype) for k, v in weights.items()}


class _View(object):
    """Prefix view over the weight dict with a missing-tensor error."""

    def __init__(self, weights, prefix):
        self._w = weights
        self._p = prefix

    def __getitem__(self, name):
        key = self._p + name
        try:
            return self._w[key]
        except KeyError:
            raise ConfigError(f"weights missing tensor {key!r}") from None

    def sub(self, prefix):
        return _View(self._w, self._p + prefix)


def _ff_apply(x, view, sub):
    h = kernels.layer_norm(x, view[sub + ".norm.gamma"], view[sub + ".norm.beta"])
    h = kernels.swish(kernels.linear(h, view[sub + ".lin1.weight"], view[sub + ".lin1.bias"]))
    return kernels.linear(h, view[sub + ".lin2.weight"], view[sub + ".lin2.bias"])


def _conv_params(view) -> ConvParams:
    return ConvParams(
        view["conv.norm.gamma"], view["conv.norm.beta"],
        view["conv.pw_in.weight"], view["conv.pw_in.bias"],
        view["conv.depthwise.weight"],
        view["conv.pw_out.weight"], view["conv.pw_out.bias"],
        view["conv.ssn.mean"], view["conv.ssn.scale"], view["conv.ssn.shift"])


def mhsa(x: np.ndarray, mask: np.ndarray, attn_weights, heads: int,
         kv_cache: Optional[Tuple[np.ndarray, np.ndarray]] = None,
         offset: int = 0, return_kv: bool = False):
    """Multi-head self-attention over [cache || current] keys and values.

    ``attn_weights`` is indexable by "q.weight", "q.bias", ..., "out.bias".
    The mask has one row per current frame and one column per cached plus
    current frame. Absolute positions offset+0..offset+T-1 are added to the
    input before projection.
    """
    t, d = x.shape
    if d % heads != 0:
        raise ShapeError(f"model dim {d} not divisible by heads {heads}")
    xp = x + kernels.sinusoidal_positions(offset, t, d, x.dtype)
    q = kernels.linear(xp, attn_weights["q.weight"], attn_weights["q.bias"])
    k = kernels.linear(xp, attn_weights["k.weight"], attn_weights["k.bias"])
    v = kernels.linear(xp, attn_weights["v.weight"], attn_weights["v.bias"])
    if kv_cache is not None:
        k_all = np.concatenate([kv_cache[0], k], axis=0)
        v_all = np.concatenate([kv_cache[1], v], axis=0)
    else:
        k_all, v_all = k, v
    if mask.shape != (t, k_all.shape[0]):
        raise ShapeError(
            f"mask shape {mask.shape} != ({t}, {k_all.shape[0]}) for cached attention")
    dh = d // heads
    scale = 1.0 / math.sqrt(dh)
    ctx = np.empty((t, d), dtype=x.dtype)
    for h in range(heads):
        cols = slice(h * dh, (h + 1) * dh)
        scores = kernels.matmul(q[:, cols], k_all[:, cols].T)
        probs = kernels.masked_softmax(scores, mask, scale)
        ctx[:, cols] = kernels.matmul(probs, v_all[:, cols])
    out = kernels.linear(ctx, attn_weights["out.weight"], attn_weights["out.bias"])
    if return_kv:
        return out, (k, v)
    return out


class BlockAux(NamedTuple):
    """Per-window byproducts a streaming runtime needs to maintain caches."""

    kv: Tuple[np.ndarray, np.ndarray]  # projected K, V of the current rows
    conv_cache: Optional[np.ndarray]   # rolled dcconv/causal left context
    conv_rows: np.ndarray              # depthwise-conv input rows (post-GLU)


def block_forward(x: np.ndarray, mask: np.ndarray, layer_weights, block_kind: str,
                  conv_mode: str, chunk: Optional[int], heads: int,
                  merge_kind: str = "concat",
                  kv_cache: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                  conv_cache: Optional[np.ndarray] = None,
                  offset: int = 0) -> Tuple[np.ndarray, BlockAux]:
    """One encoder block; returns the output and the cache byproducts."""
    view = layer_weights if isinstance(layer_weights, _View) else _View(layer_weights, "")
    params = _conv_params(view)
    if block_kind == "sequential":
        x = x + 0.5 * _ff_apply(x, view, "ff_pre")
        attn_in = kernels.layer_norm(x, view["attn.norm.gamma"], view["attn.norm.beta"])
        attn_out, kv = mhsa(attn_in, mask, view.sub("attn."), heads,
                            kv_cache, offset, return_kv=True)
        x = x + attn_out
        y, new_cache, conv_rows = conv_pipeline(x, params, conv_mode, chunk, conv_cache)
        x = x + y
    elif block_kind == "parallel":
        attn_in = kernels.layer_norm(x, view["attn.norm.gamma"], view["attn.norm.beta"])
        attn_out, kv = mhsa(attn_in, mask, view.sub("attn."), heads,
                            kv_cache, offset, return_kv=True)
        y, new_cache, conv_rows = conv_pipeline(x, params, conv_mode, chunk, conv_cache)
        if merge_kind == "concat":
            both = np.concatenate([attn_out, y], axis=1)
            merged = kernels.linear(both, view["merge.weight"], view["merge.bias"])
        else:
            merged = attn_out + y
        x = x + merged
    else:
        raise ConfigError(f"block_kind must be one of {BLOCK_KINDS}, got {block_kind!r}")
    x = x + 0.5 * _ff_apply(x, view, "ff_post")
    x = kernels.layer_norm(x, view["final_norm.gamma"], view["final_norm.beta"])
    return x, BlockAux(kv=kv, conv_cache=new_cache, conv_rows=conv_rows)


def layer_view(weights: Dict[str, np.ndarray], index: int) -> _View:
    return _View(weights, f"layer.{index}.")


def subsample(features: np.ndarray, weights, factor: int) -> np.ndarray:
    """Stack ``factor`` consecutive input frames, project, swish.

    Output frame t reads input frames [t*factor, (t+1)*factor) and nothing
    else; a trailing residue shorter than one window yields no frame.
    """
    features = np.ascontiguousarray(features)
    t0, d0 = features.shape
    t = t0 // factor
    view = weights if isinstance(weights, _View) else _View(weights, "")
    w = view["subsample.proj.weight"]
    if w.shape[0] != factor * d0:
        raise ShapeError(
            f"subsample weight rows {w.shape[0]} != factor*input_dim {factor * d0}")
    if t == 0:
        return np.zeros((0, w.shape[1]), dtype=features.dtype)
    stacked = features[:t * factor].reshape(t, factor * d0)
    return kernels.swish(kernels.linear(stacked, w, view["subsample.proj.bias"]))


def encoder_blocks_forward(x: np.ndarray, config: EncoderConfig,
                           weights: Dict[str, np.ndarray],
                           chunk: Optional[int] = None,
                           left_context: Optional[int] = None) -> np.ndarray:
    """Run the block stack on already-subsampled frames (offline, chunk-masked)."""
    t = x.shape[0]
    if t == 0:
        return x
    if chunk is None:
        mask = full_mask(t)
    else:
        mask = chunk_mask(t, chunk, left_context)
    for i in range(config.layers):
        x, _ = block_forward(x, mask, layer_view(weights, i), config.block_kind,
                             config.conv_mode, chunk, config.heads, config.merge_kind)
    return x


def encoder_forward(features: np.ndarray, config: EncoderConfig,
                    weights: Dict[str, np.ndarray],
                    chunk: Optional[int] = None,
                    left_context: Optional[int] = None) -> np.ndarray:
    """Offline encoder pass; ``chunk=None`` means full context.

    With a chunk size, attention uses the chunk mask and the convolution is
    chunked with the same size, so the whole stack's look-ahead is bounded
    by the chunk's right boundary (for conv_mode=dcconv). This is the oracle
    a streaming run must match.
    """
    dtype = config.dtype
    weights = cast_weights(weights, dtype)
    features = np.ascontiguousarray(features, dtype=dtype)
    x = subsample(features, weights, config.subsample_factor)
    return encoder_blocks_forward(x, config, weights, chunk, left_context)
