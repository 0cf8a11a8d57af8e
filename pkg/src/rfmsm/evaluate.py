"""Classification metrics, masking-strategy sweeps, and PCA embedding export."""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import models, train
from .checkpoint import Checkpoint
from .errors import ValidationError
from .fewshot import ShotSpec, sample_nshot
from .iqcore import SignalDataset, StandardizationStats, standardize_array
from .masking import STRATEGIES
from .models import Tensor

EVAL_BATCH_SIZE = 256

# Published full-scale benchmark for the in-domain 1-shot optimum. Desk-scale
# sweeps cannot reach these numbers (they need the 500k-frame corpus and
# full-size models); carried as context metadata in sweep outputs.
FULL_SCALE_REFERENCE = {
    "model": "resnet1d",
    "pretraining": "in-domain radar",
    "shots": 1,
    "strategy": "A",
    "ratio": 0.7,
    "accuracy_pct": 75.06,
    "macro_f1_pct": 72.32,
}


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    per_class_f1: list[float]
    per_snr_accuracy: dict[int, float]
    confusion: np.ndarray
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": self.per_class_f1,
            "per_snr_accuracy": {str(k): v for k, v in sorted(self.per_snr_accuracy.items())},
            "confusion": self.confusion.tolist(),
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            accuracy=float(d["accuracy"]),
            macro_f1=float(d["macro_f1"]),
            per_class_f1=[float(v) for v in d["per_class_f1"]],
            per_snr_accuracy={int(k): float(v) for k, v in d["per_snr_accuracy"].items()},
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            provenance=dict(d.get("provenance", {})),
        )


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1; a class with P + R == 0 scores 0."""
    return _f1_scores(confusion)[1]


def _f1_scores(confusion: np.ndarray):
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValidationError("confusion matrix must be square")
    diag = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    scores = []
    for c in range(confusion.shape[0]):
        precision = diag[c] / predicted[c] if predicted[c] > 0 else 0.0
        recall = diag[c] / support[c] if support[c] > 0 else 0.0
        if precision + recall == 0.0:
            scores.append(0.0)
        else:
            scores.append(2.0 * precision * recall / (precision + recall))
    return scores, float(np.mean(scores))


def metrics_from_predictions(
    preds: np.ndarray, labels: np.ndarray, snr_dbs: np.ndarray, n_cls: int
) -> MetricsReport:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    confusion = np.zeros((n_cls, n_cls), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    per_class, macro = _f1_scores(confusion)
    per_snr = {}
    for snr in np.unique(snr_dbs):
        sel = snr_dbs == snr
        per_snr[int(snr)] = float((preds[sel] == labels[sel]).mean())
    return MetricsReport(
        accuracy=accuracy,
        macro_f1=macro,
        per_class_f1=per_class,
        per_snr_accuracy=per_snr,
        confusion=confusion,
    )


def _classifier_parts(ckpt: Checkpoint):
    probe = ckpt.probe_arrays()
    if probe is None:
        raise ValidationError("checkpoint has no probe: not a classifier checkpoint")
    stats = StandardizationStats.from_dict(ckpt.provenance["stats"])
    pool = int(ckpt.provenance.get("probe_pool", ckpt.descriptor.probe_pool))
    n_cls = int(ckpt.provenance["n_cls"])
    return probe, stats, pool, n_cls


def predict(ckpt: Checkpoint, x_std: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Argmax class predictions for standardized frames."""
    (pw, pb), _, pool, _ = _classifier_parts(ckpt)
    tensors = models.params_as_tensors(ckpt.params, trainable=False)
    preds = np.empty(x_std.shape[0], dtype=np.int64)
    for lo in range(0, x_std.shape[0], batch_size):
        hi = lo + batch_size
        emb = models.encoder_graph(
            Tensor(models.to_channels_last(x_std[lo:hi])), tensors, ckpt.descriptor
        )
        logits = models.probe_graph(emb, Tensor(pw), Tensor(pb), pool)
        preds[lo:hi] = logits.data.argmax(axis=1)
    return preds


def evaluate(
    ckpt: Checkpoint,
    test: SignalDataset,
    batch_size: int = EVAL_BATCH_SIZE,
    provenance: dict | None = None,
) -> MetricsReport:
    """Standardize with the classifier's training stats, predict, aggregate."""
    if not test.has_labels:
        raise ValidationError("evaluation requires a labeled dataset")
    _, stats, _, n_cls = _classifier_parts(ckpt)
    if test.meta.n_cls != n_cls:
        raise ValidationError(
            f"class-count mismatch: classifier has {n_cls}, dataset declares {test.meta.n_cls}"
        )
    x = standardize_array(test.x.astype(np.float32, copy=False), stats)
    preds = predict(ckpt, x, batch_size)
    report = metrics_from_predictions(
        preds, test.class_ids().astype(np.int64), test.snr_dbs(), n_cls
    )
    report.provenance = {
        "config_hash": ckpt.provenance.get("config_hash"),
        "checkpoint_kind": ckpt.provenance.get("kind"),
        "pretrained": ckpt.provenance.get("pretrained"),
        "dataset": test.meta.name,
    }
    report.provenance.update(provenance or {})
    return report


# ---------------------------------------------------------------------------
# Masking-strategy sweep
# ---------------------------------------------------------------------------


@dataclass
class CellResult:
    strategy: str
    ratio: float
    accuracies: list[float] = field(default_factory=list)
    f1s: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else math.nan

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else math.nan

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1s)) if self.f1s else math.nan


@dataclass
class SweepResult:
    cells: list[CellResult]
    argmax: tuple[str, float] | None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["strategy", "ratio", "accuracy", "f1", "seed_mean", "seed_std"])
        for cell in self.cells:
            if cell.error is not None:
                writer.writerow([cell.strategy, cell.ratio, "error", "error", "error", cell.error])
            else:
                writer.writerow(
                    [
                        cell.strategy,
                        cell.ratio,
                        f"{cell.accuracy_mean:.6f}",
                        f"{cell.f1_mean:.6f}",
                        f"{cell.accuracy_mean:.6f}",
                        f"{cell.accuracy_std:.6f}",
                    ]
                )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "cells": [
                {
                    "strategy": c.strategy,
                    "ratio": c.ratio,
                    "accuracies": c.accuracies,
                    "f1s": c.f1s,
                    "error": c.error,
                }
                for c in self.cells
            ],
            "argmax": list(self.argmax) if self.argmax else None,
            "full_scale_reference": FULL_SCALE_REFERENCE,
        }


def select_argmax(cells: list[CellResult]) -> tuple[str, float] | None:
    """Highest mean accuracy; ties broken by lower ratio, then A < B < C < D."""
    valid = [c for c in cells if c.error is None and c.accuracies]
    if not valid:
        return None
    best = max(
        valid,
        key=lambda c: (c.accuracy_mean, -c.ratio, -STRATEGIES.index(c.strategy)),
    )
    return best.strategy, best.ratio


def run_sweep_cell(
    corpus: SignalDataset,
    shots: SignalDataset,
    test: SignalDataset,
    pre_cfg: train.PretrainConfig,
    ft_cfg: train.FinetuneConfig,
) -> tuple[float, float]:
    ckpt = train.pretrain(corpus, pre_cfg)
    clf = train.finetune(ckpt, shots, ft_cfg)
    report = evaluate(clf, test)
    return report.accuracy, report.macro_f1


_POOL_CTX: dict = {}


def _pool_worker(task):
    strategy, ratio, seed = task
    ctx = _POOL_CTX
    pre_cfg = ctx["pre_cfg"]
    ft_cfg = ctx["ft_cfg"]
    pre = train.PretrainConfig(
        arch=pre_cfg.arch,
        mask_strategy=strategy,
        mask_ratio=ratio,
        loss=pre_cfg.loss,
        lr=pre_cfg.lr,
        batch_size=pre_cfg.batch_size,
        max_epochs=pre_cfg.max_epochs,
        patience=pre_cfg.patience,
        seed=seed,
        masked_only_loss=pre_cfg.masked_only_loss,
    )
    ft = train.FinetuneConfig(
        lr=ft_cfg.lr,
        batch_size=ft_cfg.batch_size,
        epochs=ft_cfg.epochs,
        freeze_encoder_epochs=ft_cfg.freeze_encoder_epochs,
        seed=seed,
    )
    return run_sweep_cell(ctx["corpus"], ctx["shots"][seed], ctx["test"], pre, ft)


def sweep(
    corpus: SignalDataset,
    target: SignalDataset,
    test: SignalDataset,
    strategies,
    ratios,
    pre_cfg: train.PretrainConfig,
    ft_cfg: train.FinetuneConfig,
    shot_n: int,
    seeds,
    jobs: int = 1,
) -> SweepResult:
    """Pretrain/finetune/evaluate every (strategy, ratio) cell, mean over seeds.

    Shots are drawn once per seed and shared across cells for paired
    comparisons. A failing cell records its error and the sweep continues.
    """
    strategies = list(strategies)
    ratios = [float(r) for r in ratios]
    seeds = list(seeds)
    if not strategies or not ratios or not seeds:
        raise ValidationError("sweep grid and seed list must be nonempty")
    shots = {seed: sample_nshot(target, ShotSpec(shot_n, seed)) for seed in seeds}
    cells = [CellResult(s, r) for s in strategies for r in ratios]
    tasks = [(c.strategy, c.ratio, seed) for c in cells for seed in seeds]

    results: dict[tuple, object] = {}
    global _POOL_CTX
    _POOL_CTX = {
        "corpus": corpus,
        "shots": shots,
        "test": test,
        "pre_cfg": pre_cfg,
        "ft_cfg": ft_cfg,
    }
    try:
        if jobs <= 1:
            for task in tasks:
                try:
                    results[task] = _pool_worker(task)
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    results[task] = exc
        else:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {task: pool.submit(_pool_worker, task) for task in tasks}
                for task, fut in futures.items():
                    try:
                        results[task] = fut.result()
                    except Exception as exc:  # noqa: BLE001
                        results[task] = exc
    finally:
        _POOL_CTX = {}

    by_cell = {(c.strategy, c.ratio): c for c in cells}
    for (strategy, ratio, seed), outcome in results.items():
        cell = by_cell[(strategy, ratio)]
        if isinstance(outcome, Exception):
            cell.error = f"cell ({strategy}, {ratio}) seed {seed}: {outcome}"
        else:
            acc, f1 = outcome
            cell.accuracies.append(acc)
            cell.f1s.append(f1)
    return SweepResult(cells=cells, argmax=select_argmax(cells))


# ---------------------------------------------------------------------------
# Embedding export with PCA reduction
# ---------------------------------------------------------------------------


def embed_frames(ckpt: Checkpoint, x_std: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Flattened encoder embeddings, one row per frame."""
    tensors = models.params_as_tensors(
        {k: v for k, v in ckpt.params.items() if k.startswith("enc.")}, trainable=False
    )
    rows = []
    for lo in range(0, x_std.shape[0], batch_size):
        emb = models.encoder_graph(
            Tensor(models.to_channels_last(x_std[lo : lo + batch_size])),
            tensors,
            ckpt.descriptor,
        )
        rows.append(emb.data.reshape(emb.data.shape[0], -1))
    return np.concatenate(rows, axis=0)


def pca_reduce(rows: np.ndarray, dims: int):
    """Project centered rows onto the top principal components.

    Uses an eigendecomposition of the feature covariance (float64). Returns
    (projected, explained_variance_ratios, components).
    """
    rows = np.asarray(rows, dtype=np.float64)
    n, d = rows.shape
    if dims < 1 or dims > min(n, d):
        raise ValidationError(f"pca_dims {dims} must lie in [1, min(n={n}, d={d})]")
    centered = rows - rows.mean(axis=0, keepdims=True)
    cov = (centered.T @ centered) / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    total = evals.sum()
    if total <= 0:
        raise ValidationError("degenerate embeddings: zero total variance")
    components = evecs[:, order[:dims]]
    ratios = evals[:dims] / total
    return centered @ components, ratios, components


def export_embeddings(
    ckpt: Checkpoint,
    dataset: SignalDataset,
    pca_dims: int = 50,
    path=None,
    batch_size: int = EVAL_BATCH_SIZE,
):
    """Encode every frame, PCA-reduce, optionally write the embedding file.

    File layout: u32 row count, u32 dim, f32-LE rows (row-major), int16
    labels, int16 snr_db per row, f64-LE explained-variance ratios.
    """
    if not dataset.has_labels:
        raise ValidationError("embedding export requires a labeled dataset")
    if len(dataset) == 0:
        raise ValidationError("empty dataset")
    stats = StandardizationStats.from_dict(ckpt.provenance["stats"])
    x = standardize_array(dataset.x.astype(np.float32, copy=False), stats)
    rows = embed_frames(ckpt, x, batch_size)
    proj, ratios, _ = pca_reduce(rows, pca_dims)
    proj32 = proj.astype("<f4")
    labels = dataset.class_ids().astype("<i2")
    snrs = dataset.snr_dbs().astype("<i2")
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", proj32.shape[0], proj32.shape[1]))
            fh.write(np.ascontiguousarray(proj32).tobytes())
            fh.write(np.ascontiguousarray(labels).tobytes())
            fh.write(np.ascontiguousarray(snrs).tobytes())
            fh.write(ratios.astype("<f8").tobytes())
    return proj32, labels, snrs, ratios


def read_embeddings(path):
    """Inverse of the export layout; returns (rows, labels, snrs, ratios)."""
    with open(path, "rb") as fh:
        raw = fh.read(8)
        if len(raw) != 8:
            raise ValidationError(f"{path}: truncated embedding file")
        n, dim = struct.unpack("<II", raw)
        rows = np.frombuffer(fh.read(n * dim * 4), dtype="<f4").reshape(n, dim)
        labels = np.frombuffer(fh.read(n * 2), dtype="<i2")
        snrs = np.frombuffer(fh.read(n * 2), dtype="<i2")
        ratios = np.frombuffer(fh.read(dim * 8), dtype="<f8")
        if labels.shape[0] != n or snrs.shape[0] != n or ratios.shape[0] != dim:
            raise ValidationError(f"{path}: truncated embedding file")
    return rows.copy(), labels.copy(), snrs.copy(), ratios.copy()
