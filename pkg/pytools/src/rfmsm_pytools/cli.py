"""Command-line entry points: rfconvert and rftsne."""

from __future__ import annotations

import argparse
import logging
import sys

from .convert import FORMATS, ConverterManifest, convert
from .tsne import render_tsne


def rfconvert_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rfconvert",
        description="Convert a public RF dataset release into the canonical format.",
    )
    parser.add_argument("--format", required=True, choices=FORMATS, dest="source_format")
    parser.add_argument("--in", required=True, dest="input_path")
    parser.add_argument("--out", required=True, dest="output_path")
    parser.add_argument("--subsample", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    args = parser.parse_args(argv)
    try:
        manifest = ConverterManifest(
            source_format=args.source_format,
            input_path=args.input_path,
            output_path=args.output_path,
            subsample=args.subsample,
            seed=args.seed,
        )
        summary = convert(manifest)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {summary['output']}: {summary['frames']} frames x "
        f"{summary['frame_len']} samples, {summary['n_cls']} classes"
    )
    return 0


def rftsne_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rftsne",
        description="Render a t-SNE scatter from an exported embedding file.",
    )
    parser.add_argument("--in", required=True, dest="input_path")
    parser.add_argument("--out", required=True, dest="output_path")
    parser.add_argument("--perplexity", type=float, default=30.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--snr-floor", type=int, default=None)
    parser.add_argument("--dump-xy", default=None, help="also save coordinates as NPZ")
    args = parser.parse_args(argv)
    try:
        xy, _ = render_tsne(
            args.input_path,
            args.output_path,
            perplexity=args.perplexity,
            seed=args.seed,
            snr_floor=args.snr_floor,
            dump_xy=args.dump_xy,
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output_path}: {xy.shape[0]} points")
    return 0


if __name__ == "__main__":
    sys.exit(rfconvert_main())
