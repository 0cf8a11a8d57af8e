"""Pure-NumPy convolution kernels over channels-last activations.

Activations are [batch, length, channels]; weights keep the conventional
[out, in, kernel] layout. Each kernel tap is one dense matmul over the
channel axis, which keeps all heavy lifting inside BLAS with no im2col
buffer. The compiled extension in ``_convkernels`` implements the same two
primitives via explicit im2col + a single gemm.
"""

from __future__ import annotations

import numpy as np


def conv1d(x: np.ndarray, w: np.ndarray, stride: int, dilation: int, padding: int):
    """Cross-correlation: y[b,l,co] = sum_ci,k x[b,l*s+k*d-p,ci] * w[co,ci,k]."""
    cout, _, kernel = w.shape
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (0, 0)))
    span = dilation * (kernel - 1) + 1
    lout = (x.shape[1] - span) // stride + 1
    wt = np.ascontiguousarray(w.transpose(2, 1, 0))  # [K, Ci, Co]
    y = x[:, 0 : (lout - 1) * stride + 1 : stride, :] @ wt[0]
    for k in range(1, kernel):
        lo = k * dilation
        y += x[:, lo : lo + (lout - 1) * stride + 1 : stride, :] @ wt[k]
    return y


def conv1d_grad_weight(
    x: np.ndarray, gy: np.ndarray, kernel: int, stride: int, dilation: int, padding: int
):
    """Weight gradient: gw[co,ci,k] = sum_b,l gy[b,l,co] * xpad[b,l*s+k*d,ci]."""
    cin = x.shape[2]
    batch, lout, cout = gy.shape
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (0, 0)))
    g2 = np.ascontiguousarray(gy).reshape(batch * lout, cout)
    gw = np.empty((kernel, cin, cout), dtype=x.dtype)
    for k in range(kernel):
        lo = k * dilation
        xs = x[:, lo : lo + (lout - 1) * stride + 1 : stride, :]
        gw[k] = np.ascontiguousarray(xs).reshape(batch * lout, cin).T @ g2
    return np.ascontiguousarray(gw.transpose(2, 1, 0))
