"""Two-step training pipeline: masked-reconstruction pre-training, then
n-shot fine-tuning of a linear probe with temporary encoder freezing.

All randomness flows through named substreams of the config seed, so a full
run is reproducible byte-for-byte. Training logs are line-delimited JSON on
the ``rfmsm.train`` logger.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import masking, models
from .checkpoint import Checkpoint
from .errors import TrainingDivergedError, ValidationError
from .fewshot import DomainDescriptor, DomainPair, prepare_domain_pair
from .iqcore import SignalDataset, compute_stats, split_70_20_10, standardize_array
from .masking import MaskSpec, NoiseModel
from .models import Tensor

logger = logging.getLogger("rfmsm.train")

# substream tags for deriving independent generators from one seed
_SHUFFLE, _MASK, _VALMASK, _PROBE, _ENCODER = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class PretrainConfig:
    arch: object
    mask_strategy: str = "A"
    mask_ratio: float = 0.7
    loss: str = "l1"
    lr: float = 0.001
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 3
    seed: int = 0
    masked_only_loss: bool = False

    def __post_init__(self):
        MaskSpec(self.mask_strategy, self.mask_ratio, 0)  # validates strategy/ratio
        if self.loss not in ("l1", "l2"):
            raise ValidationError("loss must be 'l1' or 'l2'")
        if self.lr <= 0:
            raise ValidationError("lr must be > 0")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValidationError("batch_size and max_epochs must be >= 1")


@dataclass(frozen=True)
class FinetuneConfig:
    lr: float = 0.0001
    batch_size: int = 8
    epochs: int = 100
    freeze_encoder_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("lr, batch_size, epochs must be positive")
        if not 0 <= self.freeze_encoder_epochs <= self.epochs:
            raise ValidationError("freeze_encoder_epochs must lie in [0, epochs]")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )

    def flat_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k, a in self.m.items():
            out[k + ".m"] = a
        for k, a in self.v.items():
            out[k + ".v"] = a
        return out


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """Bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        if params[name].shape != g.shape:
            raise ValidationError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class EarlyStopper:
    """Strictly-lower-is-better early stopping with integer patience."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record an epoch's validation loss; True means stop now."""
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.bad = 0
        else:
            self.bad += 1
        return self.bad >= self.patience


def _log(record: dict) -> None:
    record = dict(record)
    record["timestamp"] = time.time()
    logger.info(json.dumps(record, sort_keys=True))


def _check_finite(loss: float, context: str) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss ({loss}) at {context}")


def _collect_grads(tensors: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients for every parameter; frozen parameters get exact zeros."""
    out = {}
    for name, t in tensors.items():
        if t.requires_grad and t.grad is not None:
            out[name] = t.grad
        else:
            out[name] = np.zeros_like(t.data)
    return out


def _recon_loss_terms(recon, clean, masks, cfg) -> tuple:
    """(loss tensor, numerator weight) for one channels-last batch."""
    from .engine import l1_loss, l2_loss

    loss_fn = l1_loss if cfg.loss == "l1" else l2_loss
    if cfg.masked_only_loss:
        weight = np.repeat(masks[:, :, None], 2, axis=2).astype(recon.data.dtype)
        return loss_fn(recon, clean, weight), float(weight.sum())
    return loss_fn(recon, clean), float(clean.size)


def make_pretrain_batch(
    clean: np.ndarray,
    strategy: str,
    ratio: float,
    noise: NoiseModel | None,
    rng: np.random.Generator,
):
    """Corrupt a standardized batch; the reconstruction target is always the
    clean (unmasked) input."""
    corrupted, masks = masking.corrupt_batch(clean, strategy, ratio, noise, rng)
    return models.Batch(inputs=corrupted, targets=clean), masks


def noise_model_from(x: np.ndarray) -> NoiseModel:
    """Pooled mean/variance over a standardized training array."""
    x64 = x.astype(np.float64, copy=False)
    return NoiseModel(float(x64.mean()), float(x64.var()))


def pretrain(
    corpus: SignalDataset, cfg: PretrainConfig, extra_provenance: dict | None = None
) -> Checkpoint:
    """Self-supervised masked-reconstruction pre-training.

    Splits the corpus 70-20-10, standardizes with the training split's
    statistics, draws a fresh mask per frame per epoch, and keeps the
    checkpoint from the best-validation-loss epoch. Validation masks are
    fixed across epochs so successive losses are comparable.
    """
    if len(corpus) < cfg.batch_size:
        raise ValidationError(
            f"corpus smaller than one batch: {len(corpus)} < {cfg.batch_size}"
        )
    with threadpool_limits(limits=1):
        return _pretrain_inner(corpus, cfg, extra_provenance)


def _pretrain_inner(corpus, cfg, extra_provenance):
    # single-threaded BLAS: the conv gemms are small enough that thread
    # barriers cost more than they save, and it keeps runs bit-reproducible
    train, val, _ = split_70_20_10(corpus, cfg.seed)
    stats = compute_stats(train)
    xtr = standardize_array(train.x.astype(np.float32, copy=False), stats)
    xval = standardize_array(val.x.astype(np.float32, copy=False), stats)
    noise = noise_model_from(xtr)

    params = models.init_params(cfg.arch, cfg.seed)
    opt = AdamState.for_params(params.tensors)
    tensors = models.params_as_tensors(params.tensors, trainable=True)

    val_rng = np.random.default_rng((cfg.seed, _VALMASK))
    xval_masked, val_masks = masking.corrupt_batch(
        xval, cfg.mask_strategy, cfg.mask_ratio, noise, val_rng
    )
    xval_cl = models.to_channels_last(xval)
    xval_masked_cl = models.to_channels_last(xval_masked)

    def val_loss() -> float:
        num = 0.0
        den = 0.0
        for lo in range(0, xval_cl.shape[0], cfg.batch_size):
            hi = lo + cfg.batch_size
            recon = models.autoencoder_graph(
                Tensor(xval_masked_cl[lo:hi]),
                models.params_as_tensors(params.tensors, trainable=False),
                cfg.arch,
            )
            loss, weight = _recon_loss_terms(
                recon, xval_cl[lo:hi], val_masks[lo:hi], cfg
            )
            num += float(loss.data) * weight
            den += weight
        return num / den if den else 0.0

    stopper = EarlyStopper(cfg.patience)
    best: tuple[dict, dict, int] | None = None
    n = xtr.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        perm = np.random.default_rng((cfg.seed, _SHUFFLE, epoch)).permutation(n)
        epoch_loss = 0.0
        for step, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[lo : lo + cfg.batch_size]
            clean = xtr[idx]
            rng = np.random.default_rng((cfg.seed, _MASK, epoch, step))
            batch, masks = make_pretrain_batch(
                clean, cfg.mask_strategy, cfg.mask_ratio, noise, rng
            )
            for t in tensors.values():
                t.zero_grad()
            recon = models.autoencoder_graph(
                Tensor(models.to_channels_last(batch.inputs)), tensors, cfg.arch
            )
            loss, _ = _recon_loss_terms(
                recon, models.to_channels_last(batch.targets), masks, cfg
            )
            value = float(loss.data)
            _check_finite(value, f"pretrain epoch {epoch} step {step}")
            loss.backward()
            adam_step(params.tensors, _collect_grads(tensors), opt, cfg.lr)
            epoch_loss += value * clean.shape[0]
        vloss = val_loss()
        _check_finite(vloss, f"pretrain validation epoch {epoch}")
        _log(
            {
                "epoch": epoch,
                "split": "train",
                "loss": epoch_loss / n,
                "lr": cfg.lr,
            }
        )
        _log({"epoch": epoch, "split": "val", "loss": vloss, "lr": cfg.lr})
        if vloss < stopper.best:
            best = (
                {k: a.copy() for k, a in params.tensors.items()},
                {k: a.copy() for k, a in opt.flat_arrays().items()},
                opt.step,
            )
        if stopper.update(epoch, vloss):
            break

    assert best is not None
    best_params, best_opt, best_step = best
    provenance = {
        "kind": "pretrain",
        "seed": cfg.seed,
        "epoch": stopper.best_epoch,
        "val_loss": stopper.best,
        "loss": cfg.loss,
        "mask": {"strategy": cfg.mask_strategy, "ratio": cfg.mask_ratio},
        "masked_only_loss": cfg.masked_only_loss,
        "stats": stats.to_dict(),
        "noise_model": {"mean": noise.mean, "variance": noise.variance},
        "domain": DomainDescriptor.from_meta(corpus.meta).to_dict(),
        "shuffle_streams": {"shuffle": _SHUFFLE, "mask": _MASK, "val_mask": _VALMASK},
    }
    provenance.update(extra_provenance or {})
    return Checkpoint(
        descriptor=cfg.arch,
        params=best_params,
        opt_state=best_opt,
        opt_step=best_step,
        provenance=provenance,
    )


def _train_classifier(
    descriptor,
    encoder_params: dict[str, np.ndarray],
    shots: SignalDataset,
    cfg: FinetuneConfig,
    freeze_epochs: int,
    provenance: dict,
) -> Checkpoint:
    if not shots.has_labels:
        raise ValidationError("fine-tuning requires a labeled dataset")
    with threadpool_limits(limits=1):
        return _train_classifier_inner(
            descriptor, encoder_params, shots, cfg, freeze_epochs, provenance
        )


def _train_classifier_inner(descriptor, encoder_params, shots, cfg, freeze_epochs, provenance):
    n_cls = shots.meta.n_cls
    flat = models.flatten_dim(descriptor, shots.meta.frame_len)
    stats = compute_stats(shots)
    x = standardize_array(shots.x.astype(np.float32, copy=False), stats)
    y = shots.class_ids().astype(np.int64)

    probe = models.init_probe(flat, n_cls, (cfg.seed, _PROBE))
    params: dict[str, np.ndarray] = dict(encoder_params)
    params["probe.w"] = probe.weight
    params["probe.b"] = probe.bias
    opt = AdamState.for_params(params)
    pool = descriptor.probe_pool

    from .engine import cross_entropy as ce_op

    n = x.shape[0]
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    for epoch in range(1, cfg.epochs + 1):
        frozen = ("enc.",) if epoch <= freeze_epochs else ()
        tensors = models.params_as_tensors(params, trainable=True, frozen_prefixes=frozen)
        perm = np.random.default_rng((cfg.seed, _SHUFFLE, epoch)).permutation(n)
        epoch_loss = 0.0
        correct = 0
        for step, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[lo : lo + cfg.batch_size]
            for t in tensors.values():
                t.zero_grad()
            emb = models.encoder_graph(
                Tensor(models.to_channels_last(x[idx])), tensors, descriptor
            )
            logits = models.probe_graph(emb, tensors["probe.w"], tensors["probe.b"], pool)
            loss = ce_op(logits, y[idx])
            value = float(loss.data)
            _check_finite(value, f"finetune epoch {epoch} step {step}")
            loss.backward()
            adam_step(params, _collect_grads(tensors), opt, cfg.lr)
            epoch_loss += value * idx.shape[0]
            correct += int((logits.data.argmax(axis=1) == y[idx]).sum())
        _log(
            {
                "epoch": epoch,
                "split": "train",
                "loss": epoch_loss / n,
                "accuracy": correct / n,
                "lr": cfg.lr,
            }
        )

    provenance = dict(provenance)
    provenance.update(
        {
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "freeze_encoder_epochs": freeze_epochs,
            "steps_per_epoch": steps_per_epoch,
            "n_cls": n_cls,
            "probe_pool": pool,
            "flatten_dim": flat,
            "stats": stats.to_dict(),
            "target_domain": DomainDescriptor.from_meta(shots.meta).to_dict(),
        }
    )
    return Checkpoint(
        descriptor=descriptor,
        params=params,
        opt_state=opt.flat_arrays(),
        opt_step=opt.step,
        provenance=provenance,
    )


def finetune(
    checkpoint: Checkpoint,
    shots: SignalDataset,
    cfg: FinetuneConfig,
    extra_provenance: dict | None = None,
) -> Checkpoint:
    """Attach a fresh probe to a pre-trained encoder and fine-tune.

    The encoder is frozen for the first ``freeze_encoder_epochs`` epochs, no
    masking is applied, and inputs are standardized with the n-shot set's own
    statistics.
    """
    source = checkpoint.provenance.get("domain") or {}
    pair = DomainPair(
        source=DomainDescriptor(
            name=source.get("name", "unknown"),
            frame_len=int(source.get("frame_len", shots.meta.frame_len)),
            t_res_us=float(source.get("t_res_us", shots.meta.t_res_us)),
            n_cls=int(source.get("n_cls", shots.meta.n_cls)),
        ),
        target=DomainDescriptor.from_meta(shots.meta),
    )
    bundle = prepare_domain_pair(pair, checkpoint)
    provenance = {"kind": "classifier", "pretrained": True}
    provenance.update(bundle.provenance)
    provenance.update(extra_provenance or {})
    return _train_classifier(
        bundle.descriptor,
        bundle.encoder_params,
        shots,
        cfg,
        cfg.freeze_encoder_epochs,
        provenance,
    )


def train_baseline(
    shots: SignalDataset,
    cfg: FinetuneConfig,
    descriptor,
    extra_provenance: dict | None = None,
) -> Checkpoint:
    """Same configuration as finetune but from random weights, never frozen."""
    init = models.init_params(descriptor, (cfg.seed, _ENCODER))
    encoder = {k: v for k, v in init.tensors.items() if k.startswith("enc.")}
    provenance = {"kind": "classifier", "pretrained": False}
    provenance.update(extra_provenance or {})
    return _train_classifier(descriptor, encoder, shots, cfg, 0, provenance)
