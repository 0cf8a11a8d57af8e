"""Reverse-mode gradient engine with swappable convolution backends."""

from .kernels import backend_name, get_backend, have_native
from .ops import (
    add,
    affine,
    avg_pool1d,
    conv1d,
    conv_transpose1d,
    cross_entropy,
    flatten,
    l1_loss,
    l2_loss,
    mul,
    pad1d,
    relu,
    reshape,
    sigmoid,
    tanh,
    upsample_nearest,
)
from .tensor import Tensor, as_tensor

__all__ = [
    "Tensor",
    "as_tensor",
    "add",
    "affine",
    "avg_pool1d",
    "backend_name",
    "conv1d",
    "conv_transpose1d",
    "cross_entropy",
    "flatten",
    "get_backend",
    "have_native",
    "l1_loss",
    "l2_loss",
    "mul",
    "pad1d",
    "relu",
    "reshape",
    "sigmoid",
    "tanh",
    "upsample_nearest",
]
