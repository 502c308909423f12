"""Pure-numpy fallback kernels.

Reductions (matmul contraction, softmax denominator, conv taps) accumulate
in ascending index order into an output buffer of the input dtype, mirroring
the numba loops exactly. This keeps the two backends interchangeable and
makes masked positions contribute exact zeros, so restricting a computation
to the visible window reproduces the full-sequence result bit for bit.
"""

import numpy as np


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=a.dtype)
    for kk in range(k):
        out += a[:, kk, None] * b[None, kk, :]
    return out


def masked_softmax(scores: np.ndarray, mask: np.ndarray, scale) -> np.ndarray:
    scaled = scores * scores.dtype.type(scale)
    neg_inf = scores.dtype.type(-np.inf)
    visible = np.where(mask, scaled, neg_inf)
    row_max = visible.max(axis=1, keepdims=True)
    p = np.exp(visible - row_max)
    p[~mask] = 0.0
    denom = np.zeros(p.shape[0], dtype=p.dtype)
    for j in range(p.shape[1]):
        denom += p[:, j]
    return p / denom[:, None]


def depthwise_conv1d(x: np.ndarray, kernels: np.ndarray, left: int, right: int) -> np.ndarray:
    t_in, d = x.shape
    k = kernels.shape[0]
    t_out = t_in + left + right - (k - 1)
    out = np.zeros((t_out, d), dtype=x.dtype)
    for j in range(k):
        # output row t reads input row t + j - left; clip to the real rows
        lo = max(0, left - j)
        hi = min(t_out, t_in + left - j)
        if lo < hi:
            out[lo:hi] += x[lo + j - left:hi + j - left] * kernels[j]
    return out
