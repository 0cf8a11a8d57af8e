"""Differentiable operations used by the autoencoders and the linear probe."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from . import kernels
from .tensor import Tensor, accumulate, as_tensor, make_node


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValidationError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a.data, b.data, "add")

    def backward(g):
        accumulate(a, g)
        accumulate(b, g)

    return make_node(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a.data, b.data, "mul")

    def backward(g):
        accumulate(a, g * b.data)
        accumulate(b, g * a.data)

    return make_node(a.data * b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    out = np.where(mask, x.data, x.data.dtype.type(0))

    def backward(g):
        accumulate(x, g * mask)

    return make_node(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)

    def backward(g):
        accumulate(x, g * (1.0 - y * y))

    return make_node(y, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)

    def backward(g):
        accumulate(x, g * y * (1.0 - y))

    return make_node(y, (x,), backward)


def pad1d(x: Tensor, left: int, right: int) -> Tensor:
    x = as_tensor(x)
    if left < 0 or right < 0:
        raise ValidationError("pad amounts must be >= 0")
    length = x.data.shape[1]
    out = np.pad(x.data, ((0, 0), (left, right), (0, 0)))

    def backward(g):
        accumulate(x, g[:, left : left + length, :])

    return make_node(out, (x,), backward)


def conv1d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
    padding: int = 0,
) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    y = kernels.conv1d_forward(x.data, w.data, stride, dilation, padding)
    if b is not None:
        b = as_tensor(b)
        if b.data.shape != (w.data.shape[0],):
            raise ValidationError("conv bias must have one entry per output channel")
        y = y + b.data
        parents = (x, w, b)
    else:
        parents = (x, w)

    def backward(g):
        if b is not None:
            accumulate(b, g.sum(axis=(0, 1)))
        gx, gw = kernels.conv1d_backward(
            x.data,
            w.data,
            g,
            stride,
            dilation,
            padding,
            need_gx=x.requires_grad,
            need_gw=w.requires_grad,
        )
        if gx is not None:
            accumulate(x, gx)
        if gw is not None:
            accumulate(w, gw)

    return make_node(y, parents, backward)


def conv_transpose1d(
    x: Tensor,
    w: Tensor,
    b: Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
    padding: int = 0,
) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    y = kernels.convt1d_forward(x.data, w.data, stride, dilation, padding)
    if b is not None:
        b = as_tensor(b)
        if b.data.shape != (w.data.shape[1],):
            raise ValidationError("conv_transpose bias must have one entry per output channel")
        y = y + b.data
        parents = (x, w, b)
    else:
        parents = (x, w)

    def backward(g):
        if b is not None:
            accumulate(b, g.sum(axis=(0, 1)))
        gx, gw = kernels.convt1d_backward(
            x.data,
            w.data,
            g,
            stride,
            dilation,
            padding,
            need_gx=x.requires_grad,
            need_gw=w.requires_grad,
        )
        if gx is not None:
            accumulate(x, gx)
        if gw is not None:
            accumulate(w, gw)

    return make_node(y, parents, backward)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    x = as_tensor(x)
    if factor < 1:
        raise ValidationError("upsample factor must be >= 1")
    batch, length, ch = x.data.shape
    out = np.repeat(x.data, factor, axis=1)

    def backward(g):
        accumulate(x, g.reshape(batch, length, factor, ch).sum(axis=2))

    return make_node(out, (x,), backward)


def avg_pool1d(x: Tensor, width: int) -> Tensor:
    x = as_tensor(x)
    batch, length, ch = x.data.shape
    if width < 1 or length % width != 0:
        raise ValidationError(
            f"avg_pool width {width} must divide sequence length {length}"
        )
    out = x.data.reshape(batch, length // width, width, ch).mean(axis=2)
    inv = 1.0 / width

    def backward(g):
        accumulate(x, np.repeat(g * x.data.dtype.type(inv), width, axis=1))

    return make_node(out, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    orig = x.data.shape
    out = x.data.reshape(shape)

    def backward(g):
        accumulate(x, g.reshape(orig))

    return make_node(out, (x,), backward)


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.data.shape[0], -1))


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ValidationError("affine expects 2-D input and weight")
    if x.data.shape[1] != w.data.shape[0]:
        raise ValidationError(
            f"affine dimension mismatch: input {x.data.shape[1]} vs weight {w.data.shape[0]}"
        )
    if b.data.shape != (w.data.shape[1],):
        raise ValidationError("affine bias must match weight output dimension")
    out = x.data @ w.data + b.data

    def backward(g):
        accumulate(b, g.sum(axis=0))
        if w.requires_grad:
            accumulate(w, x.data.T @ g)
        if x.requires_grad:
            accumulate(x, g @ w.data.T)

    return make_node(out, (x, w, b), backward)


def _loss_target(target):
    return target.data if isinstance(target, Tensor) else np.asarray(target)


def l1_loss(pred: Tensor, target, weight=None) -> Tensor:
    """Mean absolute difference; with weights, sum(|d| w) / sum(w).

    Subgradient convention at d == 0: sign(0) = 0.
    """
    pred = as_tensor(pred)
    t = _loss_target(target)
    _same_shape(pred.data, t, "l1_loss")
    d = pred.data - t
    if weight is None:
        out = np.abs(d).mean()

        def backward(g):
            accumulate(pred, np.sign(d) * (g / d.size))

    else:
        weight = np.asarray(weight)
        _same_shape(pred.data, weight, "l1_loss weight")
        wsum = weight.sum()
        if wsum == 0:
            out = np.zeros((), dtype=pred.data.dtype)

            def backward(g):
                return None

        else:
            out = (np.abs(d) * weight).sum() / wsum

            def backward(g):
                accumulate(pred, np.sign(d) * weight * (g / wsum))

    return make_node(np.asarray(out, dtype=pred.data.dtype), (pred,), backward)


def l2_loss(pred: Tensor, target, weight=None) -> Tensor:
    """Mean squared difference; with weights, sum(d^2 w) / sum(w)."""
    pred = as_tensor(pred)
    t = _loss_target(target)
    _same_shape(pred.data, t, "l2_loss")
    d = pred.data - t
    if weight is None:
        out = (d * d).mean()

        def backward(g):
            accumulate(pred, d * (2.0 * g / d.size))

    else:
        weight = np.asarray(weight)
        _same_shape(pred.data, weight, "l2_loss weight")
        wsum = weight.sum()
        if wsum == 0:
            out = np.zeros((), dtype=pred.data.dtype)

            def backward(g):
                return None

        else:
            out = (d * d * weight).sum() / wsum

            def backward(g):
                accumulate(pred, d * weight * (2.0 * g / wsum))

    return make_node(np.asarray(out, dtype=pred.data.dtype), (pred,), backward)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true class (max-shifted)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.data.ndim != 2:
        raise ValidationError("cross_entropy expects [batch, classes] logits")
    batch, n_cls = logits.data.shape
    if labels.shape != (batch,):
        raise ValidationError("cross_entropy expects one integer label per row")
    if labels.size and (labels.min() < 0 or labels.max() >= n_cls):
        raise ValidationError(
            f"label out of range for {n_cls} classes: {int(labels.min())}..{int(labels.max())}"
        )
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    softmax = ez / denom
    rows = np.arange(batch)
    nll = np.log(denom[:, 0]) - z[rows, labels]
    out = nll.mean()

    def backward(g):
        gz = softmax.copy()
        gz[rows, labels] -= 1.0
        accumulate(logits, gz * (g / batch))

    return make_node(np.asarray(out, dtype=logits.data.dtype), (logits,), backward)
