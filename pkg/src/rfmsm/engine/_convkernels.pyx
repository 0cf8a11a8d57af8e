# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution primitives over channels-last activations.

Same surface as kernels_numpy: conv1d and conv1d_grad_weight, with
activations [batch, length, channels] and weights [out, in, kernel].
Strategy: explicit im2col into a reused buffer (channel runs are contiguous,
so gathering is plain block copies) followed by a single BLAS gemm. float32
and float64 via fused types; single-threaded by construction.
"""

import numpy as np

from cython cimport floating
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm, sgemm


cdef void _gemm_abt(floating[:, ::1] a, floating[:, ::1] b, floating[:, ::1] c) noexcept nogil:
    # row-major c[M,N] = a[M,K] @ b[N,K].T
    cdef int m = <int> a.shape[0]
    cdef int k = <int> a.shape[1]
    cdef int n = <int> b.shape[0]
    cdef char ta = b'T'
    cdef char tb = b'N'
    cdef float a32 = 1.0, b32 = 0.0
    cdef double a64 = 1.0, b64 = 0.0
    if m == 0 or n == 0 or k == 0:
        return
    if floating is float:
        sgemm(&ta, &tb, &n, &m, &k, &a32, &b[0, 0], &k, &a[0, 0], &k, &b32, &c[0, 0], &n)
    else:
        dgemm(&ta, &tb, &n, &m, &k, &a64, &b[0, 0], &k, &a[0, 0], &k, &b64, &c[0, 0], &n)


cdef void _gemm_atb(floating[:, ::1] a, floating[:, ::1] b, floating[:, ::1] c) noexcept nogil:
    # row-major c[M,N] = a[K,M].T @ b[K,N]
    cdef int kk = <int> a.shape[0]
    cdef int m = <int> a.shape[1]
    cdef int n = <int> b.shape[1]
    cdef char ta = b'N'
    cdef char tb = b'T'
    cdef float a32 = 1.0, b32 = 0.0
    cdef double a64 = 1.0, b64 = 0.0
    if m == 0 or n == 0 or kk == 0:
        return
    if floating is float:
        sgemm(&ta, &tb, &n, &m, &kk, &a32, &b[0, 0], &n, &a[0, 0], &m, &b32, &c[0, 0], &n)
    else:
        dgemm(&ta, &tb, &n, &m, &kk, &a64, &b[0, 0], &n, &a[0, 0], &m, &b64, &c[0, 0], &n)


cdef void _fill_cols(
    floating[:, :, ::1] x,
    floating[:, ::1] xcol,
    Py_ssize_t lout,
    Py_ssize_t kernel,
    Py_ssize_t stride,
    Py_ssize_t dilation,
    Py_ssize_t padding,
) noexcept nogil:
    # xcol[b*lout + lo, (k*ci_dim)..] = x[b, lo*stride + k*dilation - padding, :]
    cdef Py_ssize_t nb = x.shape[0], length = x.shape[1], nc = x.shape[2]
    cdef Py_ssize_t b, k, lo, lo_start, lo_end, ix, num, hi
    cdef size_t run = nc * sizeof(floating)
    for b in range(nb):
        for k in range(kernel):
            num = padding - k * dilation
            lo_start = 0 if num <= 0 else (num + stride - 1) // stride
            hi = length - 1 + padding - k * dilation
            if hi < 0:
                continue
            lo_end = hi // stride
            if lo_end > lout - 1:
                lo_end = lout - 1
            ix = lo_start * stride + k * dilation - padding
            for lo in range(lo_start, lo_end + 1):
                memcpy(&xcol[b * lout + lo, k * nc], &x[b, ix, 0], run)
                ix += stride


def conv1d(floating[:, :, ::1] x, floating[:, :, ::1] w, int stride, int dilation, int padding):
    cdef Py_ssize_t nb = x.shape[0], length = x.shape[1], ci = x.shape[2]
    cdef Py_ssize_t co = w.shape[0], kernel = w.shape[2]
    cdef Py_ssize_t span = dilation * (kernel - 1) + 1
    cdef Py_ssize_t lout = (length + 2 * padding - span) // stride + 1
    dtype = np.float32 if floating is float else np.float64
    xcol_arr = np.zeros((nb * lout, kernel * ci), dtype=dtype)
    # weight rows reordered to the (k, ci) column layout of xcol
    w2_arr = np.ascontiguousarray(np.asarray(w).transpose(0, 2, 1).reshape(co, kernel * ci))
    y_arr = np.empty((nb * lout, co), dtype=dtype)
    cdef floating[:, ::1] xcol = xcol_arr
    cdef floating[:, ::1] w2 = w2_arr
    cdef floating[:, ::1] y2 = y_arr
    with nogil:
        _fill_cols(x, xcol, lout, kernel, stride, dilation, padding)
        _gemm_abt(xcol, w2, y2)
    return y_arr.reshape(nb, lout, co)


def conv1d_grad_weight(
    floating[:, :, ::1] x,
    floating[:, :, ::1] gy,
    int kernel,
    int stride,
    int dilation,
    int padding,
):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[2]
    cdef Py_ssize_t co = gy.shape[2], lout = gy.shape[1]
    dtype = np.float32 if floating is float else np.float64
    xcol_arr = np.zeros((nb * lout, kernel * ci), dtype=dtype)
    g2_arr = np.asarray(gy).reshape(nb * lout, co)
    gw_arr = np.empty((kernel * ci, co), dtype=dtype)
    cdef floating[:, ::1] xcol = xcol_arr
    cdef floating[:, ::1] g2 = g2_arr
    cdef floating[:, ::1] gw2 = gw_arr
    with nogil:
        _fill_cols(x, xcol, lout, kernel, stride, dilation, padding)
        _gemm_atb(xcol, g2, gw2)
    # (k, ci, co) -> (co, ci, k)
    return np.ascontiguousarray(gw_arr.reshape(kernel, ci, co).transpose(2, 1, 0))
