"""Masking strategies for the reconstruction proxy task.

Four strategies: A = random zero-masking, B = block zero-masking, C = random
noise-masking, D = block noise-masking. Random strategies mask each position
independently with probability equal to the ratio; block strategies mask one
contiguous run of round(ratio * L) positions (round = half away from zero).
Mask positions are shared between I and Q; noise-masking adds independent
per-channel Gaussian draws to the masked positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .iqcore import IQFrame

STRATEGIES = ("A", "B", "C", "D")
ZERO_STRATEGIES = ("A", "B")
NOISE_STRATEGIES = ("C", "D")
BLOCK_STRATEGIES = ("B", "D")


@dataclass(frozen=True)
class MaskSpec:
    strategy: str
    ratio: float
    seed: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown masking strategy {self.strategy!r}, expected one of {STRATEGIES}"
            )
        if not 0.0 <= self.ratio <= 1.0:
            raise ValidationError(f"masking ratio {self.ratio} outside [0, 1]")


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian mask-fill distribution, from training-set statistics."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValidationError("noise variance must be >= 0")


@dataclass(frozen=True)
class MaskedFrame:
    signal: IQFrame
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (len(self.signal),):
            raise ValidationError("mask length must equal frame length")
        object.__setattr__(self, "mask", mask)


def _block_length(ratio: float, length: int) -> int:
    # round half away from zero; np.round would round half to even
    return int(np.floor(ratio * length + 0.5))


def draw_mask(rng: np.random.Generator, strategy: str, ratio: float, length: int) -> np.ndarray:
    """Draw one boolean mask of the given length."""
    if strategy in BLOCK_STRATEGIES:
        n = _block_length(ratio, length)
        mask = np.zeros(length, dtype=bool)
        if n > 0:
            start = int(rng.integers(0, length - n + 1))
            mask[start : start + n] = True
        return mask
    return rng.random(length) < ratio


def apply_mask(frame: IQFrame, spec: MaskSpec, noise: NoiseModel | None = None) -> MaskedFrame:
    """Corrupt one frame according to the mask spec.

    Unmasked positions are bit-identical to the input. The generator first
    draws the mask, then (for noise strategies) the per-channel fill values.
    """
    rng = np.random.default_rng(spec.seed)
    mask = draw_mask(rng, spec.strategy, spec.ratio, len(frame))
    if spec.strategy in NOISE_STRATEGIES:
        if noise is None or noise.variance <= 0:
            raise ValidationError("degenerate noise model: noise-masking needs variance > 0")
        sigma = float(np.sqrt(noise.variance))
        count = int(mask.sum())
        fill = rng.normal(noise.mean, sigma, size=(2, count))
        i = frame.i.copy()
        q = frame.q.copy()
        i[mask] = i[mask] + fill[0].astype(i.dtype, copy=False)
        q[mask] = q[mask] + fill[1].astype(q.dtype, copy=False)
    else:
        i = np.where(mask, frame.i.dtype.type(0), frame.i)
        q = np.where(mask, frame.q.dtype.type(0), frame.q)
    return MaskedFrame(IQFrame(i, q), mask)


def masked_fraction(masked: MaskedFrame) -> float:
    return float(masked.mask.sum()) / masked.mask.shape[0]


def corrupt_batch(
    x: np.ndarray,
    strategy: str,
    ratio: float,
    noise: NoiseModel | None,
    rng: np.random.Generator,
):
    """Vectorized corruption of a [B, 2, L] batch; returns (corrupted, masks).

    Used by the training loop; one generator drives the whole batch (masks
    first, then noise fills). Semantics per frame match :func:`apply_mask`.
    """
    b, _, length = x.shape
    if strategy in BLOCK_STRATEGIES:
        n = _block_length(ratio, length)
        masks = np.zeros((b, length), dtype=bool)
        if n > 0:
            starts = rng.integers(0, length - n + 1, size=b)
            for k in range(b):
                masks[k, starts[k] : starts[k] + n] = True
    else:
        masks = rng.random((b, length)) < ratio
    if strategy in NOISE_STRATEGIES:
        if noise is None or noise.variance <= 0:
            raise ValidationError("degenerate noise model: noise-masking needs variance > 0")
        sigma = float(np.sqrt(noise.variance))
        fill = rng.normal(noise.mean, sigma, size=x.shape).astype(x.dtype, copy=False)
        out = np.where(masks[:, None, :], x + fill, x)
    else:
        out = np.where(masks[:, None, :], x.dtype.type(0), x)
    return out, masks
