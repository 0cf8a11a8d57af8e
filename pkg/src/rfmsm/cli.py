"""Command-line entry point: the full pipeline behind one executable.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
``--deterministic`` clamps numeric thread pools to one thread so repeated
runs of the same config produce byte-identical artifacts. RFMSM_LOG sets the
log level (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from contextlib import nullcontext

from . import evaluate as evalmod
from . import fewshot, iqcore, plotting, siggen, train
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .errors import RfmsmError, ValidationError
from .fewshot import ShotSpec


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so we control exit codes."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}error: {message}")


def _file_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "seed_override", None) is not None:
        cfg = cfg.with_seed_override(args.seed_override)
    return cfg


def _deterministic_guard(enabled: bool):
    if not enabled:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


def _cmd_generate(args) -> int:
    cfg = _load_config(args)
    gen = cfg.generator
    ds = siggen.generate_corpus(
        n_frames_per_cell=gen.n_frames_per_cell,
        snr_grid=gen.snr_grid,
        seed=cfg.seeds.generate,
        frame_len=gen.frame_len,
        t_res_us=gen.t_res_us,
        ranges=gen.ranges,
    )
    iqcore.write_canonical(ds, args.out)
    print(f"wrote {args.out}: {len(ds)} frames, config {cfg.config_hash()}")
    return 0


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args)
    corpus = fewshot.load_canonical(args.corpus)
    ckpt = train.pretrain(
        corpus,
        cfg.pretrain_config(),
        extra_provenance={
            "config_hash": cfg.config_hash(),
            "corpus_hash": _file_hash(args.corpus),
        },
    )
    save_checkpoint(ckpt, args.out)
    print(
        f"wrote {args.out}: epoch {ckpt.provenance['epoch']}, "
        f"val loss {ckpt.provenance['val_loss']:.6f}"
    )
    return 0


def _sample_shots(cfg: ExperimentConfig, data_path, out_path):
    data = fewshot.load_canonical(data_path)
    shots = fewshot.sample_nshot(data, ShotSpec(cfg.shot_n, cfg.seeds.shots))
    shots_path = str(out_path) + ".shots.rfm"
    iqcore.write_canonical(shots, shots_path)
    return shots, shots_path


def _cmd_finetune(args) -> int:
    cfg = _load_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    shots, shots_path = _sample_shots(cfg, args.data, args.out)
    clf = train.finetune(
        ckpt,
        shots,
        cfg.finetune_config(),
        extra_provenance={
            "config_hash": cfg.config_hash(),
            "source_checkpoint_hash": _file_hash(args.checkpoint),
            "shots_file": os.path.basename(shots_path),
        },
    )
    save_checkpoint(clf, args.out)
    print(f"wrote {args.out} (shots audit file: {shots_path})")
    return 0


def _cmd_baseline(args) -> int:
    cfg = _load_config(args)
    shots, shots_path = _sample_shots(cfg, args.data, args.out)
    clf = train.train_baseline(
        shots,
        cfg.finetune_config(),
        cfg.architecture(),
        extra_provenance={
            "config_hash": cfg.config_hash(),
            "shots_file": os.path.basename(shots_path),
        },
    )
    save_checkpoint(clf, args.out)
    print(f"wrote {args.out} (shots audit file: {shots_path})")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    test = fewshot.load_canonical(args.data)
    report = evalmod.evaluate(
        ckpt,
        test,
        batch_size=cfg.eval.batch_size,
        provenance={
            "config_hash": cfg.config_hash(),
            "checkpoint_id": _file_hash(args.checkpoint),
            "dataset_id": _file_hash(args.data),
        },
    )
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
    print(f"accuracy {report.accuracy:.4f} macro-F1 {report.macro_f1:.4f} -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    corpus = fewshot.load_canonical(args.corpus)
    target = fewshot.load_canonical(args.data)
    test = fewshot.load_canonical(args.test)
    result = evalmod.sweep(
        corpus,
        target,
        test,
        strategies=cfg.sweep.strategies,
        ratios=cfg.sweep.ratios,
        pre_cfg=cfg.pretrain_config(),
        ft_cfg=cfg.finetune_config(),
        shot_n=cfg.shot_n,
        seeds=cfg.sweep.seeds,
        jobs=args.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write(result.to_csv())
    with open(os.path.join(args.out, "sweep.json"), "w") as fh:
        json.dump(
            {"config_hash": cfg.config_hash(), **result.to_dict()},
            fh,
            sort_keys=True,
            indent=2,
        )
    print(f"wrote {csv_path}; argmax cell: {result.argmax}")
    return 0


def _cmd_embed(args) -> int:
    cfg = _load_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    data = fewshot.load_canonical(args.data)
    rows, _, _, ratios = evalmod.export_embeddings(
        ckpt, data, pca_dims=cfg.eval.pca_dims, path=args.out, batch_size=cfg.eval.batch_size
    )
    print(f"wrote {args.out}: {rows.shape[0]} rows x {rows.shape[1]} dims, "
          f"top-1 EVR {ratios[0]:.4f}")
    return 0


def _cmd_plot(args) -> int:
    if (args.heatmap is None) == (args.snr_curve is None):
        raise UsageError("plot: provide exactly one of --heatmap or --snr-curve")
    if args.heatmap:
        svg = plotting.heatmap_from_csv(args.heatmap)
    else:
        svg = plotting.snr_curve_from_metrics(args.snr_curve)
    with open(args.out, "w") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    with open(args.path, "rb") as fh:
        magic = fh.read(8)
    if magic[:7] == iqcore.CANONICAL_MAGIC:
        ds = fewshot.load_canonical(args.path)
        meta = ds.meta
        print(f"canonical dataset: {len(ds)} frames x {meta.frame_len} samples")
        print(f"  classes: {meta.n_cls} {list(meta.class_names)}")
        print(f"  snr grid: {meta.snr_grid[0]}..{meta.snr_grid[-1]} dB ({len(meta.snr_grid)} levels)")
        print(f"  t_res: {meta.t_res_us} us, labeled: {ds.has_labels}")
        return 0
    from .checkpoint import CHECKPOINT_MAGIC

    if magic == CHECKPOINT_MAGIC:
        ckpt = load_checkpoint(args.path)
        prov = ckpt.provenance
        n_params = sum(int(a.size) for a in ckpt.params.values())
        print(f"checkpoint kind: {prov.get('kind', 'unknown')}")
        print(f"  architecture: {json.dumps(ckpt.descriptor.to_dict(), sort_keys=True)}")
        print(f"  parameters: {n_params}")
        print(f"  epoch: {prov.get('epoch', prov.get('epochs'))}")
        if "val_loss" in prov:
            print(f"  val loss: {prov['val_loss']:.6f}")
        for key in ("config_hash", "seed", "pretrained"):
            if key in prov:
                print(f"  {key}: {prov[key]}")
        return 0
    raise ValidationError(f"{args.path}: unrecognized file magic")


def build_parser() -> _Parser:
    parser = _Parser(prog="rfmsm", description=__doc__)
    parser.add_argument("--deterministic", action="store_true",
                        help="force single-threaded numeric paths")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True)
            p.add_argument("--seed-override", type=int, default=None)

    p = sub.add_parser("generate", help="synthesize a canonical corpus")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("pretrain", help="self-supervised pre-training")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("finetune", help="n-shot fine-tuning of a pre-trained encoder")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="labeled canonical dataset to sample shots from")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("baseline", help="n-shot training from random initialization")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("evaluate", help="metrics report for a classifier checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="masking strategy x ratio grid")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("embed", help="export PCA-reduced encoder embeddings")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("plot", help="SVG figures from metrics/sweep files")
    p.add_argument("--heatmap", default=None, help="sweep CSV file")
    p.add_argument("--snr-curve", default=None, help="metrics JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("inspect", help="summarize a dataset or checkpoint file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("RFMSM_LOG", "WARNING").upper(),
        stream=sys.stderr,
        format="%(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with _deterministic_guard(args.deterministic):
            return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RfmsmError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level CLI guard
        logging.getLogger("rfmsm").debug("unhandled error", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
