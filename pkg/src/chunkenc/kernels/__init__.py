"""Dense numerical primitives shared by every other module.

Matrices are plain 2-D C-contiguous ``np.ndarray`` in float32 (single) or
float64 (double); attention masks are 2-D bool arrays. All operations are
pure and deterministic: reductions run in ascending index order, so repeated
calls at one precision are bitwise identical.

The three hot kernels (matmul, masked_softmax, depthwise_conv1d) have a
numba-jitted implementation and a pure-numpy fallback. Selection order:
``CHUNKENC_BACKEND=numba|numpy`` environment variable if set, else numba
when importable, else numpy. ``set_backend``/``active_backend`` override and
inspect the choice at runtime.
"""

import math
import os

import numpy as np

from ..errors import ConfigError, ContractViolation, ShapeError
from . import _numpy_impl

DTYPES = {"single": np.float32, "double": np.float64}

_BACKENDS = {"numpy": _numpy_impl}
try:
    from . import _numba_impl

    _BACKENDS["numba"] = _numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_impl = None

_active_name = None
_active = None


def set_backend(name: str) -> None:
    """Select the kernel backend ("numba" or "numpy") for this process."""
    global _active_name, _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    _active_name = name
    _active = _BACKENDS[name]


def active_backend() -> str:
    return _active_name


def available_backends():
    return sorted(_BACKENDS)


_env = os.environ.get("CHUNKENC_BACKEND")
if _env is not None:
    set_backend(_env)
else:
    set_backend("numba" if "numba" in _BACKENDS else "numpy")


def resolve_dtype(precision: str):
    try:
        return DTYPES[precision]
    except KeyError:
        raise ConfigError(f"precision must be one of {sorted(DTYPES)}, got {precision!r}")


def _as_matrix(x, name: str) -> np.ndarray:
    x = np.ascontiguousarray(x)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with ascending-index contraction."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        raise ShapeError(f"matmul dtype mismatch: {a.dtype} vs {b.dtype}")
    return _active.matmul(a, b)


def masked_softmax(scores: np.ndarray, mask: np.ndarray, scale: float) -> np.ndarray:
    """Row softmax of ``scores * scale`` with hidden positions forced to 0.

    Hidden scores are treated as -inf; stabilization subtracts the row max
    over visible entries only. Hidden outputs are exactly 0.0 and each row
    sums to 1. A fully hidden row has no valid distribution and is rejected.
    """
    scores = _as_matrix(scores, "scores")
    mask = np.ascontiguousarray(mask, dtype=bool)
    if mask.shape != scores.shape:
        raise ShapeError(f"mask shape {mask.shape} != scores shape {scores.shape}")
    if not mask.any(axis=1).all():
        raise ContractViolation("masked_softmax: some row has no visible entry")
    return _active.masked_softmax(scores, mask, scores.dtype.type(scale))


def symmetric_padding(k: int) -> tuple:
    return ((k - 1) // 2, (k - 1) // 2)


def causal_padding(k: int) -> tuple:
    return (k - 1, 0)


def depthwise_conv1d(x: np.ndarray, kernels: np.ndarray, padding) -> np.ndarray:
    """Per-channel 1-D cross-correlation over time with zero padding.

    ``padding`` is an explicit ``(left, right)`` pair; ``symmetric_padding``
    and ``causal_padding`` build the two standard plans. Output length is
    ``T + left + right - (k - 1)``, which is T for both standard plans.
    """
    x = _as_matrix(x, "x")
    kernels = _as_matrix(kernels, "kernels")
    k, d = kernels.shape
    if k % 2 == 0:
        raise ConfigError(f"depthwise kernel size must be odd, got {k}")
    if d != x.shape[1]:
        raise ShapeError(f"kernel channels {d} != input channels {x.shape[1]}")
    if x.dtype != kernels.dtype:
        raise ShapeError(f"conv dtype mismatch: {x.dtype} vs {kernels.dtype}")
    left, right = padding
    if left < 0 or right < 0 or x.shape[0] + left + right - (k - 1) < 0:
        raise ConfigError(f"invalid padding {padding} for kernel {k}, T={x.shape[0]}")
    return _active.depthwise_conv1d(x, kernels, int(left), int(right))


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Per-row standardization followed by an affine transform."""
    x = _as_matrix(x, "x")
    gamma = np.asarray(gamma, dtype=x.dtype)
    beta = np.asarray(beta, dtype=x.dtype)
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm affine shapes {gamma.shape}/{beta.shape} != ({x.shape[1]},)")
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    mu = x.mean(axis=1, keepdims=True)
    var = np.square(x - mu).mean(axis=1, keepdims=True)
    y = (x - mu) / np.sqrt(var + x.dtype.type(eps))
    return y * gamma + beta


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; both branches share it
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)


def glu(x: np.ndarray) -> np.ndarray:
    """Gated linear unit: first half of the columns gated by the second."""
    x = _as_matrix(x, "x")
    if x.shape[1] % 2 != 0:
        raise ShapeError(f"glu needs an even column count, got {x.shape[1]}")
    half = x.shape[1] // 2
    return x[:, :half] * _sigmoid(x[:, half:])


def swish(x: np.ndarray) -> np.ndarray:
    return x * _sigmoid(x)


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray = None) -> np.ndarray:
    """Affine map ``x @ w + b`` (w is in_dim x out_dim)."""
    y = matmul(x, w)
    if b is not None:
        b = np.asarray(b, dtype=y.dtype)
        if b.shape != (y.shape[1],):
            raise ShapeError(f"bias shape {b.shape} != ({y.shape[1]},)")
        y = y + b
    return y


def sinusoidal_positions(offset: int, n: int, d: int, dtype=np.float64) -> np.ndarray:
    """Absolute sinusoidal position rows for indices offset..offset+n-1.

    Rows depend only on the absolute index, so a slice computed at a later
    offset matches the corresponding rows computed from zero. Angles are
    evaluated in float64 and cast once, keeping both precisions consistent.
    """
    if offset < 0:
        raise ContractViolation(f"position offset must be >= 0, got {offset}")
    pos = np.arange(offset, offset + n, dtype=np.float64)[:, None]
    idx = np.arange(0, d, 2, dtype=np.float64)
    inv_freq = np.exp(-math.log(10000.0) * idx / d)
    angles = pos * inv_freq[None, :]
    out = np.zeros((n, d), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles[:, : d // 2])
    return out.astype(dtype)
