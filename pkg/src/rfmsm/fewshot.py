"""Exact n-shot sampling, canonical ingestion, and cross-domain handoff."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import iqcore, models
from .errors import ValidationError
from .iqcore import SignalDataset


@dataclass(frozen=True)
class ShotSpec:
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("shot count n must be >= 1")


@dataclass(frozen=True)
class DomainDescriptor:
    name: str
    frame_len: int
    t_res_us: float
    n_cls: int

    @classmethod
    def from_meta(cls, meta) -> "DomainDescriptor":
        return cls(meta.name, meta.frame_len, meta.t_res_us, meta.n_cls)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "frame_len": self.frame_len,
            "t_res_us": self.t_res_us,
            "n_cls": self.n_cls,
        }


@dataclass(frozen=True)
class DomainPair:
    source: DomainDescriptor
    target: DomainDescriptor


def sample_nshot(dataset: SignalDataset, spec: ShotSpec) -> SignalDataset:
    """Draw exactly n frames per (class, snr) cell, without replacement.

    Cells are keyed by the dataset's declared class/snr grids; members are
    ordered by stable id, so the draw is invariant to frame reordering.
    """
    if not dataset.has_labels:
        raise ValidationError("n-shot sampling requires a labeled dataset")
    meta = dataset.meta
    class_ids = dataset.class_ids()
    snr_dbs = dataset.snr_dbs()
    order_by_sid = np.argsort(dataset.stable_ids, kind="stable")
    chosen: list[np.ndarray] = []
    for class_id in range(meta.n_cls):
        for snr_index, snr in enumerate(meta.snr_grid):
            members = order_by_sid[
                (class_ids[order_by_sid] == class_id) & (snr_dbs[order_by_sid] == snr)
            ]
            if members.shape[0] < spec.n:
                raise ValidationError(
                    f"cell (class={class_id}, snr={snr}): {members.shape[0]} frames < n={spec.n}"
                )
            rng = np.random.default_rng((spec.seed, class_id, snr_index))
            pick = rng.choice(members.shape[0], size=spec.n, replace=False)
            chosen.append(members[np.sort(pick)])
    return dataset.subset(np.concatenate(chosen))


def load_canonical(path) -> SignalDataset:
    """Read and fully validate a canonical dataset file."""
    return iqcore.read_canonical(path)


@dataclass
class FinetuneBundle:
    """Everything finetuning needs after source-to-target validation."""

    descriptor: object
    encoder_params: dict[str, np.ndarray]
    flatten_dim: int
    n_cls: int
    provenance: dict


def prepare_domain_pair(pair: DomainPair, checkpoint) -> FinetuneBundle:
    """Validate a source-domain checkpoint against a target domain.

    Frame lengths may differ (the encoder is fully convolutional); the target
    length must divide cleanly through downsampling and probe pooling. A
    class-count change is fine: the probe is built fresh for the target.
    """
    desc = checkpoint.descriptor
    flat = models.flatten_dim(desc, pair.target.frame_len)
    return FinetuneBundle(
        descriptor=desc,
        encoder_params={k: v.copy() for k, v in checkpoint.encoder_params().items()},
        flatten_dim=flat,
        n_cls=pair.target.n_cls,
        provenance={
            "source_domain": pair.source.to_dict(),
            "target_domain": pair.target.to_dict(),
        },
    )
