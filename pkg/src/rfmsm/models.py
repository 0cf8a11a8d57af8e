"""1D autoencoder architectures, linear probe, losses, and initialization.

Two families:

* ``resnet1d``: stem conv then residual stages with stride-2 downsampling;
  the decoder mirrors the encoder with nearest-neighbor upsampling + conv.
* ``dilated``: stack of gated residual blocks with exponentially growing
  dilation and no downsampling; the probe applies stride pooling before the
  flatten to bound its input width.

Both are fully convolutional, so a pre-trained encoder accepts any frame
length divisible by its downsampling factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ValidationError

PARAM_BUDGET = 500_000  # desk-scale ceiling for default configs


@dataclass(frozen=True)
class ResNet1DDescriptor:
    stem_channels: int = 32
    stem_kernel: int = 7
    stage_channels: tuple[int, ...] = (32, 64, 128)
    blocks_per_stage: int = 2
    kernel: int = 3

    kind = "resnet1d"

    def __post_init__(self):
        if self.stem_kernel % 2 == 0 or self.kernel % 2 == 0:
            raise ValidationError("resnet1d kernels must be odd")
        if not self.stage_channels:
            raise ValidationError("resnet1d needs at least one stage")
        if self.blocks_per_stage < 1:
            raise ValidationError("blocks_per_stage must be >= 1")
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))

    @property
    def downsample_factor(self) -> int:
        return 2 ** len(self.stage_channels)

    @property
    def embed_channels(self) -> int:
        return self.stage_channels[-1]

    @property
    def probe_pool(self) -> int:
        return 1

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        shapes["enc.stem.w"] = (self.stem_channels, 2, self.stem_kernel)
        shapes["enc.stem.b"] = (self.stem_channels,)
        cin = self.stem_channels
        for si, cout in enumerate(self.stage_channels):
            for bj in range(self.blocks_per_stage):
                pre = f"enc.s{si}.b{bj}."
                c_from = cin if bj == 0 else cout
                shapes[pre + "conv1.w"] = (cout, c_from, self.kernel)
                shapes[pre + "conv1.b"] = (cout,)
                shapes[pre + "conv2.w"] = (cout, cout, self.kernel)
                shapes[pre + "conv2.b"] = (cout,)
                if bj == 0:
                    shapes[pre + "proj.w"] = (cout, c_from, 1)
                    shapes[pre + "proj.b"] = (cout,)
            cin = cout
        dec_chain = [self.stage_channels[-1]] + list(
            reversed(self.stage_channels[:-1])
        ) + [self.stem_channels]
        for di in range(len(self.stage_channels)):
            shapes[f"dec.s{di}.conv.w"] = (dec_chain[di + 1], dec_chain[di], self.kernel)
            shapes[f"dec.s{di}.conv.b"] = (dec_chain[di + 1],)
        shapes["dec.out.w"] = (2, self.stem_channels, self.kernel)
        shapes["dec.out.b"] = (2,)
        return shapes

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "stem_channels": self.stem_channels,
            "stem_kernel": self.stem_kernel,
            "stage_channels": list(self.stage_channels),
            "blocks_per_stage": self.blocks_per_stage,
            "kernel": self.kernel,
        }


@dataclass(frozen=True)
class DilatedConvDescriptor:
    channels: int = 32
    kernel: int = 2
    n_blocks: int = 8
    probe_pool: int = 8

    kind = "dilated"

    def __post_init__(self):
        if self.channels < 1 or self.n_blocks < 1 or self.kernel < 1:
            raise ValidationError("dilated descriptor fields must be >= 1")
        if self.probe_pool < 1:
            raise ValidationError("probe_pool must be >= 1")

    @property
    def downsample_factor(self) -> int:
        return 1

    @property
    def embed_channels(self) -> int:
        return self.channels

    def dilations(self) -> tuple[int, ...]:
        return tuple(2**i for i in range(self.n_blocks))

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.channels
        shapes: dict[str, tuple[int, ...]] = {
            "enc.in.w": (c, 2, 1),
            "enc.in.b": (c,),
        }
        for i in range(self.n_blocks):
            pre = f"enc.b{i}."
            shapes[pre + "filter.w"] = (c, c, self.kernel)
            shapes[pre + "filter.b"] = (c,)
            shapes[pre + "gate.w"] = (c, c, self.kernel)
            shapes[pre + "gate.b"] = (c,)
            shapes[pre + "res.w"] = (c, c, 1)
            shapes[pre + "res.b"] = (c,)
        shapes["dec.out.w"] = (2, c, 1)
        shapes["dec.out.b"] = (2,)
        return shapes

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "channels": self.channels,
            "kernel": self.kernel,
            "n_blocks": self.n_blocks,
            "probe_pool": self.probe_pool,
        }


def descriptor_from_dict(d: dict):
    if not isinstance(d, dict) or "kind" not in d:
        raise ValidationError("architecture descriptor needs a 'kind' key")
    kind = d["kind"]
    body = {k: v for k, v in d.items() if k != "kind"}
    if kind == "resnet1d":
        allowed = set(ResNet1DDescriptor.__dataclass_fields__)
        cls = ResNet1DDescriptor
    elif kind == "dilated":
        allowed = set(DilatedConvDescriptor.__dataclass_fields__)
        cls = DilatedConvDescriptor
    else:
        raise ValidationError(f"unknown architecture kind {kind!r}")
    unknown = set(body) - allowed
    if unknown:
        raise ValidationError(f"unknown {kind} descriptor keys: {sorted(unknown)}")
    if "stage_channels" in body:
        body["stage_channels"] = tuple(body["stage_channels"])
    return cls(**body)


def probe_divisor(descriptor) -> int:
    """Frame length must be divisible by this for probe training."""
    return descriptor.downsample_factor * descriptor.probe_pool


def flatten_dim(descriptor, frame_len: int) -> int:
    """Probe input width for a given frame length."""
    div = probe_divisor(descriptor)
    if frame_len % div != 0:
        raise ValidationError(
            f"frame length {frame_len} not divisible by {div} "
            f"(encoder downsample {descriptor.downsample_factor} x probe pool {descriptor.probe_pool}); "
            "pad or crop frames to a multiple"
        )
    return descriptor.embed_channels * (frame_len // div)


@dataclass
class ModelParams:
    """Named parameter arrays plus the architecture they belong to."""

    descriptor: object
    tensors: dict[str, np.ndarray]

    def param_count(self) -> int:
        return int(sum(v.size for v in self.tensors.values()))

    def validate(self) -> None:
        shapes = self.descriptor.param_shapes()
        if list(shapes) != list(self.tensors):
            raise ValidationError("parameter names do not match architecture descriptor")
        for name, shape in shapes.items():
            arr = self.tensors[name]
            if tuple(arr.shape) != shape:
                raise ValidationError(
                    f"parameter {name} has shape {arr.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"parameter {name} contains non-finite values")

    def copy(self) -> "ModelParams":
        return ModelParams(self.descriptor, {k: v.copy() for k, v in self.tensors.items()})


@dataclass
class ProbeParams:
    """Flatten + single affine layer."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValidationError("probe weight must be [flatten_dim, n_cls] with matching bias")


@dataclass(frozen=True)
class Batch:
    """Model inputs plus either reconstruction targets or class labels."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.inputs.shape[1] != 2:
            raise ValidationError("batch inputs must be [batch, 2, length]")
        if self.targets.ndim == 3 and self.targets.shape != self.inputs.shape:
            raise ValidationError("reconstruction targets must match input shape")
        if self.targets.ndim == 1 and self.targets.shape[0] != self.inputs.shape[0]:
            raise ValidationError("one label per frame required")


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_params(descriptor, seed, dtype=np.float32) -> ModelParams:
    """Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in descriptor.param_shapes().items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = _uniform_init(rng, shape, fan_in, dtype)
    return ModelParams(descriptor, tensors)


def init_probe(flat_dim: int, n_cls: int, seed, dtype=np.float32) -> ProbeParams:
    if flat_dim < 1 or n_cls < 1:
        raise ValidationError("probe dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return ProbeParams(
        weight=_uniform_init(rng, (flat_dim, n_cls), flat_dim, dtype),
        bias=np.zeros(n_cls, dtype=dtype),
    )


# ---------------------------------------------------------------------------
# Forward graphs (operate on Tensors so training can differentiate them).
# Graph activations are channels-last [batch, length, channels]; the public
# array operations below translate from/to the [batch, channels, length]
# convention used by datasets and checkpoint consumers.
# ---------------------------------------------------------------------------


def encoder_graph(x: Tensor, p: dict[str, Tensor], d) -> Tensor:
    if d.kind == "resnet1d":
        h = engine.relu(engine.conv1d(x, p["enc.stem.w"], p["enc.stem.b"], padding=d.stem_kernel // 2))
        pad = d.kernel // 2
        for si in range(len(d.stage_channels)):
            for bj in range(d.blocks_per_stage):
                pre = f"enc.s{si}.b{bj}."
                stride = 2 if bj == 0 else 1
                y = engine.relu(
                    engine.conv1d(h, p[pre + "conv1.w"], p[pre + "conv1.b"], stride=stride, padding=pad)
                )
                y = engine.conv1d(y, p[pre + "conv2.w"], p[pre + "conv2.b"], padding=pad)
                shortcut = (
                    engine.conv1d(h, p[pre + "proj.w"], p[pre + "proj.b"], stride=2)
                    if bj == 0
                    else h
                )
                h = engine.relu(engine.add(y, shortcut))
        return h
    if d.kind == "dilated":
        h = engine.conv1d(x, p["enc.in.w"], p["enc.in.b"])
        for i, dil in enumerate(d.dilations()):
            pre = f"enc.b{i}."
            hp = engine.pad1d(h, dil * (d.kernel - 1), 0)
            filt = engine.tanh(engine.conv1d(hp, p[pre + "filter.w"], p[pre + "filter.b"], dilation=dil))
            gate = engine.sigmoid(engine.conv1d(hp, p[pre + "gate.w"], p[pre + "gate.b"], dilation=dil))
            gated = engine.mul(filt, gate)
            h = engine.add(h, engine.conv1d(gated, p[pre + "res.w"], p[pre + "res.b"]))
        return h
    raise ValidationError(f"unknown architecture kind {d.kind!r}")


def decoder_graph(h: Tensor, p: dict[str, Tensor], d) -> Tensor:
    if d.kind == "resnet1d":
        pad = d.kernel // 2
        for di in range(len(d.stage_channels)):
            h = engine.relu(
                engine.conv1d(
                    engine.upsample_nearest(h, 2),
                    p[f"dec.s{di}.conv.w"],
                    p[f"dec.s{di}.conv.b"],
                    padding=pad,
                )
            )
        return engine.conv1d(h, p["dec.out.w"], p["dec.out.b"], padding=pad)
    if d.kind == "dilated":
        return engine.conv1d(h, p["dec.out.w"], p["dec.out.b"])
    raise ValidationError(f"unknown architecture kind {d.kind!r}")


def autoencoder_graph(x: Tensor, p: dict[str, Tensor], d) -> Tensor:
    return decoder_graph(encoder_graph(x, p, d), p, d)


def probe_graph(embedding: Tensor, weight: Tensor, bias: Tensor, pool: int = 1) -> Tensor:
    h = embedding if pool == 1 else engine.avg_pool1d(embedding, pool)
    return engine.affine(engine.flatten(h), weight, bias)


def params_as_tensors(
    params: dict[str, np.ndarray], trainable: bool = True, frozen_prefixes: tuple[str, ...] = ()
) -> dict[str, Tensor]:
    out = {}
    for name, arr in params.items():
        frozen = any(name.startswith(pre) for pre in frozen_prefixes)
        out[name] = Tensor(arr, requires_grad=trainable and not frozen)
    return out


def _check_encode_length(d, length: int) -> None:
    div = d.downsample_factor
    if length % div != 0:
        raise ValidationError(
            f"frame length {length} not divisible by encoder downsample factor {div}"
        )


# ---------------------------------------------------------------------------
# Public array-level operations
# ---------------------------------------------------------------------------


def param_dtype(tensors: dict[str, np.ndarray]):
    return next(iter(tensors.values())).dtype


def to_channels_last(batch: np.ndarray, dtype=None) -> np.ndarray:
    """[batch, channels, length] -> contiguous [batch, length, channels]."""
    arr = np.asarray(batch)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return np.ascontiguousarray(arr.transpose(0, 2, 1))


def to_channels_first(batch: np.ndarray) -> np.ndarray:
    """[batch, length, channels] -> contiguous [batch, channels, length]."""
    return np.ascontiguousarray(np.asarray(batch).transpose(0, 2, 1))


def encode(batch: np.ndarray, params: ModelParams) -> np.ndarray:
    """Forward the encoder; returns [batch, embed_channels, length/downsample]."""
    batch = np.asarray(batch)
    if batch.ndim != 3 or batch.shape[1] != 2:
        raise ValidationError("encode expects [batch, 2, length] input")
    _check_encode_length(params.descriptor, batch.shape[2])
    tensors = params_as_tensors(params.tensors, trainable=False)
    x = to_channels_last(batch, param_dtype(params.tensors))
    out = encoder_graph(Tensor(x), tensors, params.descriptor)
    return to_channels_first(out.data)


def decode(embedding: np.ndarray, params: ModelParams) -> np.ndarray:
    """Forward the decoder; output length mirrors the encoder input length."""
    embedding = np.asarray(embedding)
    if embedding.ndim != 3 or embedding.shape[1] != params.descriptor.embed_channels:
        raise ValidationError(
            f"embedding must be [batch, {params.descriptor.embed_channels}, length]"
        )
    tensors = params_as_tensors(params.tensors, trainable=False)
    h = to_channels_last(embedding, param_dtype(params.tensors))
    out = decoder_graph(Tensor(h), tensors, params.descriptor)
    return to_channels_first(out.data)


def probe_forward(embedding: np.ndarray, probe: ProbeParams, pool: int = 1) -> np.ndarray:
    """logits = flatten(pool(embedding)) @ W + b."""
    embedding = np.asarray(embedding)
    if embedding.ndim != 3:
        raise ValidationError("probe_forward expects [batch, channels, length]")
    flat = embedding.shape[1] * (embedding.shape[2] // pool)
    if embedding.shape[2] % pool != 0:
        raise ValidationError(f"probe pool {pool} must divide embedding length {embedding.shape[2]}")
    if flat != probe.weight.shape[0]:
        raise ValidationError(
            f"probe expects flatten_dim {probe.weight.shape[0]}, embedding provides {flat}"
        )
    return probe_graph(
        Tensor(to_channels_last(embedding, probe.weight.dtype)),
        Tensor(probe.weight),
        Tensor(probe.bias),
        pool,
    ).data


def l1_loss(recon, target, weight=None) -> float:
    return float(engine.l1_loss(engine.as_tensor(np.asarray(recon)), np.asarray(target), weight).data)


def l2_loss(recon, target, weight=None) -> float:
    return float(engine.l2_loss(engine.as_tensor(np.asarray(recon)), np.asarray(target), weight).data)


def cross_entropy(logits, labels) -> float:
    return float(engine.cross_entropy(engine.as_tensor(np.asarray(logits)), np.asarray(labels)).data)
