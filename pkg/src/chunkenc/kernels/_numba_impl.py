"""numba-jitted hot kernels.

Same accumulation order as the numpy fallback: ascending index, into an
output buffer of the input dtype, no fastmath (so LLVM cannot fuse or
reorder the reductions).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=a.dtype)
    for i in range(m):
        for j in range(n):
            for kk in range(k):
                out[i, j] += a[i, kk] * b[kk, j]
    return out


@njit(cache=True)
def masked_softmax(scores, mask, scale):
    # scale arrives pre-cast to scores.dtype so the f32 path stays pure f32
    rows, cols = scores.shape
    out = np.zeros((rows, cols), dtype=scores.dtype)
    zero = scale * 0
    for i in range(rows):
        row_max = zero
        found = False
        for j in range(cols):
            if mask[i, j]:
                v = scores[i, j] * scale
                if not found or v > row_max:
                    row_max = v
                    found = True
        denom = zero
        for j in range(cols):
            if mask[i, j]:
                out[i, j] = np.exp(scores[i, j] * scale - row_max)
            denom += out[i, j]
        for j in range(cols):
            out[i, j] /= denom
    return out


@njit(cache=True)
def depthwise_conv1d(x, kernels, left, right):
    t_in, d = x.shape
    k = kernels.shape[0]
    t_out = t_in + left + right - (k - 1)
    out = np.zeros((t_out, d), dtype=x.dtype)
    for t in range(t_out):
        for j in range(k):
            src = t + j - left
            if 0 <= src < t_in:
                for c in range(d):
                    out[t, c] += x[src, c] * kernels[j, c]
    return out
