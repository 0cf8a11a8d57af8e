"""Backend selection and the full convolution kernel surface.

Activations are channels-last [batch, length, channels] throughout the
engine. Backends implement two dense primitives (forward cross-correlation
and the weight gradient); the scatter-style adjoint used for input gradients
and transposed convolution is composed here from per-tap matmuls, shared by
both backends.

Selection happens at import: the compiled extension is used when it imports
cleanly, else the NumPy fallback. ``RFMSM_BACKEND=native|numpy`` forces a
backend; :func:`backend_name` reports the active one.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import RfmsmError, ValidationError
from . import kernels_numpy

try:
    from . import _convkernels  # compiled extension, optional

    _HAVE_NATIVE = True
except ImportError:  # pragma: no cover - depends on build environment
    _convkernels = None
    _HAVE_NATIVE = False


_FORCED = os.environ.get("RFMSM_BACKEND", "").strip().lower()
if _FORCED == "native":
    if not _HAVE_NATIVE:
        raise RfmsmError("RFMSM_BACKEND=native but the compiled extension is unavailable")
    _BACKEND = _convkernels
elif _FORCED == "numpy":
    _BACKEND = kernels_numpy
elif _FORCED in ("", "auto"):
    _BACKEND = _convkernels if _HAVE_NATIVE else kernels_numpy
else:
    raise RfmsmError(f"unknown RFMSM_BACKEND value {_FORCED!r}")


def backend_name() -> str:
    return "native" if _BACKEND is _convkernels else "numpy"


def have_native() -> bool:
    return _HAVE_NATIVE


def get_backend(name: str | None = None):
    """Resolve a backend module by name (None = the active default)."""
    if name is None:
        return _BACKEND
    if name == "numpy":
        return kernels_numpy
    if name == "native":
        if not _HAVE_NATIVE:
            raise RfmsmError("compiled kernel extension is unavailable")
        return _convkernels
    raise ValidationError(f"unknown backend {name!r}")


def _check_conv_args(x, w, stride, dilation, padding):
    if x.ndim != 3:
        raise ValidationError("conv input must be [batch, length, channels]")
    if w.ndim != 3:
        raise ValidationError("conv weight must be [out, in, kernel]")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValidationError("stride/dilation must be >= 1 and padding >= 0")


def out_length(length: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    span = dilation * (kernel - 1) + 1
    return (length + 2 * padding - span) // stride + 1


def _spread(x, w, stride, dilation, padding, out_len):
    """Adjoint of conv1d: y[b,l*s+k*d-p,c2] += x[b,l,c1] * w[c1,c2,k].

    One matmul plus one strided accumulate per tap; backend-independent
    because the matmuls already go through BLAS.
    """
    batch, length, _ = x.shape
    _, c2, kernel = w.shape
    span = dilation * (kernel - 1) + 1
    buf_len = max((length - 1) * stride + span, out_len + padding)
    y = np.zeros((batch, buf_len, c2), dtype=x.dtype)
    reach = (length - 1) * stride + 1
    wt = np.ascontiguousarray(w.transpose(2, 0, 1))  # non-contiguous taps stall BLAS
    for k in range(kernel):
        lo = k * dilation
        contrib = x @ wt[k]
        y[:, lo : lo + reach : stride, :] += contrib
    return np.ascontiguousarray(y[:, padding : padding + out_len, :])


def _as_c(a):
    return np.ascontiguousarray(a)


def conv1d_forward(x, w, stride=1, dilation=1, padding=0, backend=None):
    backend = backend or _BACKEND
    _check_conv_args(x, w, stride, dilation, padding)
    if x.shape[2] != w.shape[1]:
        raise ValidationError(
            f"conv channel mismatch: input has {x.shape[2]}, weight expects {w.shape[1]}"
        )
    span = dilation * (w.shape[2] - 1) + 1
    if x.shape[1] + 2 * padding < span:
        raise ValidationError("input shorter than kernel span")
    return backend.conv1d(_as_c(x), _as_c(w), stride, dilation, padding)


def conv1d_backward(
    x, w, gy, stride=1, dilation=1, padding=0, need_gx=True, need_gw=True, backend=None
):
    backend = backend or _BACKEND
    gx = gw = None
    gy = _as_c(gy)
    if need_gx:
        gx = _spread(gy, _as_c(w), stride, dilation, padding, x.shape[1])
    if need_gw:
        gw = backend.conv1d_grad_weight(
            _as_c(x), gy, w.shape[2], stride, dilation, padding
        )
    return gx, gw


def convt1d_out_length(length: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    span = dilation * (kernel - 1) + 1
    return (length - 1) * stride + span - 2 * padding


def convt1d_forward(x, w, stride=1, dilation=1, padding=0, backend=None):
    """Transposed convolution; weight layout [in, out, kernel]."""
    _check_conv_args(x, w, stride, dilation, padding)
    if x.shape[2] != w.shape[0]:
        raise ValidationError(
            f"conv_transpose channel mismatch: input has {x.shape[2]}, weight expects {w.shape[0]}"
        )
    out_len = convt1d_out_length(x.shape[1], w.shape[2], stride, dilation, padding)
    if out_len < 1:
        raise ValidationError("conv_transpose output would be empty")
    return _spread(_as_c(x), _as_c(w), stride, dilation, padding, out_len)


def convt1d_backward(
    x, w, gy, stride=1, dilation=1, padding=0, need_gx=True, need_gw=True, backend=None
):
    backend = backend or _BACKEND
    gx = gw = None
    gy = _as_c(gy)
    if need_gx:
        # adjoint of the adjoint: a plain strided convolution of gy
        gx = backend.conv1d(gy, _as_c(w), stride, dilation, padding)
    if need_gw:
        # arg-swapped weight gradient already lands in [in, out, kernel] layout
        gw = backend.conv1d_grad_weight(
            gy, _as_c(x), w.shape[2], stride, dilation, padding
        )
    return gx, gw
