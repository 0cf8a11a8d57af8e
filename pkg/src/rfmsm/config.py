"""Experiment configuration: one JSON document, strictly validated and hashed.

The canonical serialization (sorted keys, no whitespace) of the fully
materialized config is hashed with SHA-256; the hash stamps every artifact a
run produces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .masking import STRATEGIES
from .models import ResNet1DDescriptor, descriptor_from_dict
from .siggen import ParamRanges
from .train import FinetuneConfig, PretrainConfig

_SECTIONS = ("generator", "pretrain", "finetune", "eval", "sweep", "paths", "seeds")


def _require_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _get(d: dict, key: str, default, caster, where: str):
    if key not in d:
        return default
    try:
        return caster(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key}: {exc}")


@dataclass(frozen=True)
class GeneratorSection:
    n_frames_per_cell: int = 10
    snr_grid: tuple[int, ...] = tuple(range(-20, 21))
    frame_len: int = 512
    t_res_us: float = 0.3
    ranges: ParamRanges = field(default_factory=ParamRanges)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSection":
        _require_keys(
            d,
            {"n_frames_per_cell", "snr_grid", "frame_len", "t_res_us", "ranges"},
            "generator",
        )
        grid = d.get("snr_grid", list(range(-20, 21)))
        if not isinstance(grid, list) or not all(isinstance(v, int) for v in grid):
            raise ConfigError("generator.snr_grid must be a list of integers")
        return cls(
            n_frames_per_cell=_get(d, "n_frames_per_cell", 10, int, "generator"),
            snr_grid=tuple(grid),
            frame_len=_get(d, "frame_len", 512, int, "generator"),
            t_res_us=_get(d, "t_res_us", 0.3, float, "generator"),
            ranges=ParamRanges.from_dict(d.get("ranges", {})),
        )

    def to_dict(self) -> dict:
        return {
            "n_frames_per_cell": self.n_frames_per_cell,
            "snr_grid": list(self.snr_grid),
            "frame_len": self.frame_len,
            "t_res_us": self.t_res_us,
            "ranges": self.ranges.to_dict(),
        }


@dataclass(frozen=True)
class EvalSection:
    batch_size: int = 256
    pca_dims: int = 50

    @classmethod
    def from_dict(cls, d: dict) -> "EvalSection":
        _require_keys(d, {"batch_size", "pca_dims"}, "eval")
        return cls(
            batch_size=_get(d, "batch_size", 256, int, "eval"),
            pca_dims=_get(d, "pca_dims", 50, int, "eval"),
        )

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "pca_dims": self.pca_dims}


@dataclass(frozen=True)
class SweepSection:
    strategies: tuple[str, ...] = STRATEGIES
    ratios: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))
    seeds: tuple[int, ...] = (1, 2, 3)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSection":
        _require_keys(d, {"strategies", "ratios", "seeds"}, "sweep")
        strategies = tuple(d.get("strategies", list(STRATEGIES)))
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"sweep.strategies: unknown strategy {s!r}")
        ratios = tuple(float(r) for r in d.get("ratios", [round(0.1 * k, 1) for k in range(1, 10)]))
        for r in ratios:
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"sweep.ratios: {r} outside [0, 1]")
        seeds = tuple(int(s) for s in d.get("seeds", [1, 2, 3]))
        return cls(strategies=strategies, ratios=ratios, seeds=seeds)

    def to_dict(self) -> dict:
        return {
            "strategies": list(self.strategies),
            "ratios": list(self.ratios),
            "seeds": list(self.seeds),
        }


@dataclass(frozen=True)
class PathsSection:
    workdir: str = "."

    @classmethod
    def from_dict(cls, d: dict) -> "PathsSection":
        _require_keys(d, {"workdir"}, "paths")
        return cls(workdir=str(d.get("workdir", ".")))

    def to_dict(self) -> dict:
        return {"workdir": self.workdir}


@dataclass(frozen=True)
class SeedsSection:
    generate: int = 1
    pretrain: int = 2
    finetune: int = 3
    shots: int = 4

    @classmethod
    def from_dict(cls, d: dict) -> "SeedsSection":
        _require_keys(d, {"generate", "pretrain", "finetune", "shots"}, "seeds")
        return cls(
            generate=_get(d, "generate", 1, int, "seeds"),
            pretrain=_get(d, "pretrain", 2, int, "seeds"),
            finetune=_get(d, "finetune", 3, int, "seeds"),
            shots=_get(d, "shots", 4, int, "seeds"),
        )

    def to_dict(self) -> dict:
        return {
            "generate": self.generate,
            "pretrain": self.pretrain,
            "finetune": self.finetune,
            "shots": self.shots,
        }

    def override_all(self, seed: int) -> "SeedsSection":
        return SeedsSection(generate=seed, pretrain=seed, finetune=seed, shots=seed)


_PRETRAIN_KEYS = {
    "arch",
    "mask",
    "loss",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "masked_only_loss",
}
_FINETUNE_KEYS = {"shots", "lr", "batch_size", "epochs", "freeze_encoder_epochs"}


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSection
    pretrain_raw: dict
    finetune_raw: dict
    eval: EvalSection
    sweep: SweepSection
    paths: PathsSection
    seeds: SeedsSection

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        _require_keys(doc, set(_SECTIONS), "config")
        pre = dict(doc.get("pretrain", {}))
        _require_keys(pre, _PRETRAIN_KEYS, "pretrain")
        if "mask" in pre:
            _require_keys(dict(pre["mask"]), {"strategy", "ratio"}, "pretrain.mask")
        ft = dict(doc.get("finetune", {}))
        _require_keys(ft, _FINETUNE_KEYS, "finetune")
        cfg = cls(
            generator=GeneratorSection.from_dict(dict(doc.get("generator", {}))),
            pretrain_raw=pre,
            finetune_raw=ft,
            eval=EvalSection.from_dict(dict(doc.get("eval", {}))),
            sweep=SweepSection.from_dict(dict(doc.get("sweep", {}))),
            paths=PathsSection.from_dict(dict(doc.get("paths", {}))),
            seeds=SeedsSection.from_dict(dict(doc.get("seeds", {}))),
        )
        # materialize typed configs now so validation happens before any work
        cfg.pretrain_config()
        cfg.finetune_config()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
        return cls.from_dict(doc)

    def architecture(self):
        arch = self.pretrain_raw.get("arch", ResNet1DDescriptor().to_dict())
        return descriptor_from_dict(dict(arch))

    def pretrain_config(self, seed: int | None = None) -> PretrainConfig:
        pre = self.pretrain_raw
        mask = dict(pre.get("mask", {}))
        try:
            return PretrainConfig(
                arch=self.architecture(),
                mask_strategy=str(mask.get("strategy", "A")),
                mask_ratio=float(mask.get("ratio", 0.7)),
                loss=str(pre.get("loss", "l1")),
                lr=float(pre.get("lr", 0.001)),
                batch_size=int(pre.get("batch_size", 128)),
                max_epochs=int(pre.get("max_epochs", 100)),
                patience=int(pre.get("patience", 3)),
                seed=self.seeds.pretrain if seed is None else seed,
                masked_only_loss=bool(pre.get("masked_only_loss", False)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"pretrain: {exc}")

    def finetune_config(self, seed: int | None = None) -> FinetuneConfig:
        ft = self.finetune_raw
        try:
            return FinetuneConfig(
                lr=float(ft.get("lr", 0.0001)),
                batch_size=int(ft.get("batch_size", 8)),
                epochs=int(ft.get("epochs", 100)),
                freeze_encoder_epochs=int(ft.get("freeze_encoder_epochs", 10)),
                seed=self.seeds.finetune if seed is None else seed,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"finetune: {exc}")

    @property
    def shot_n(self) -> int:
        return int(self.finetune_raw.get("shots", 1))

    def with_seed_override(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(
            generator=self.generator,
            pretrain_raw=self.pretrain_raw,
            finetune_raw=self.finetune_raw,
            eval=self.eval,
            sweep=self.sweep,
            paths=self.paths,
            seeds=self.seeds.override_all(seed),
        )

    def to_dict(self) -> dict:
        pre = self.pretrain_config()
        ft = self.finetune_config()
        return {
            "generator": self.generator.to_dict(),
            "pretrain": {
                "arch": pre.arch.to_dict(),
                "mask": {"strategy": pre.mask_strategy, "ratio": pre.mask_ratio},
                "loss": pre.loss,
                "lr": pre.lr,
                "batch_size": pre.batch_size,
                "max_epochs": pre.max_epochs,
                "patience": pre.patience,
                "masked_only_loss": pre.masked_only_loss,
            },
            "finetune": {
                "shots": self.shot_n,
                "lr": ft.lr,
                "batch_size": ft.batch_size,
                "epochs": ft.epochs,
                "freeze_encoder_epochs": ft.freeze_encoder_epochs,
            },
            "eval": self.eval.to_dict(),
            "sweep": self.sweep.to_dict(),
            "paths": self.paths.to_dict(),
            "seeds": self.seeds.to_dict(),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]
