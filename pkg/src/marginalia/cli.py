"""Command-line entry point: ``marginalia {clean,evaluate,batch,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline, synthgen
from .errors import MarginaliaError
from .pipeline import PipelineConfig


def _add_pipeline_flags(p):
    p.add_argument("--config", type=Path, help="key=value file with pipeline settings")
    p.add_argument("--out-dir", type=Path, help="directory for images and reports")
    p.add_argument("--no-deskew", action="store_true", help="skip skew estimation/correction")
    p.add_argument("--no-denoise", action="store_true", help="skip border-noise removal")
    p.add_argument("--band-fraction", type=float, help="border band thickness for noise removal (default 0.08)")
    p.add_argument("--threshold", type=int, help="fixed binarization threshold (default: Otsu)")
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--mask-mean", choices=("all", "nonzero"), help="profile mean used for the smoothing width")
    p.add_argument("--min-line-run", type=int, metavar="N", help="components needed to restore a missed line")
    p.add_argument("--jobs", type=int, metavar="N", help="documents processed in parallel")


def _config(args) -> PipelineConfig:
    overrides = {
        "band_fraction": args.band_fraction,
        "connectivity": args.connectivity,
        "mask_mean": args.mask_mean,
        "min_line_run": args.min_line_run,
        "jobs": args.jobs,
    }
    if args.threshold is not None:
        overrides.update(binarize="fixed", threshold=args.threshold)
    if args.no_deskew:
        overrides["deskew"] = False
    if args.no_denoise:
        overrides["denoise"] = False
    if args.config is not None:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig().replace(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marginalia", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="clean one page image")
    p.add_argument("input", type=Path)
    _add_pipeline_flags(p)
    p.add_argument("--emit-profiles", type=Path, metavar="DIR", help="write row/column profile CSVs")
    p.add_argument("--emit-components", type=Path, metavar="PATH", help="write body components CSV")

    p = sub.add_parser("evaluate", help="clean and score a synthgen-style directory")
    p.add_argument("input_dir", type=Path)
    _add_pipeline_flags(p)

    p = sub.add_parser("batch", help="clean every file matching a glob")
    p.add_argument("inputs", help="glob pattern, quoted")
    _add_pipeline_flags(p)

    p = sub.add_parser("synth", help="write a synthetic ground-truth corpus")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=42, help="base seed")
    p.add_argument("--profiles", default="light,heavy", help="comma-separated annotation profiles to cycle")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            args.out_dir.mkdir(parents=True, exist_ok=True)
            profiles = tuple(p.strip() for p in args.profiles.split(",") if p.strip())
            for i in range(args.count):
                truth = synthgen.generate(synthgen.corpus_spec(i, args.seed, profiles))
                synthgen.write_ground_truth(truth, args.out_dir, f"doc{i:03d}")
            print(f"wrote {args.count} documents to {args.out_dir}")
            return 0

        config = _config(args)
        if args.out_dir is not None:
            args.out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "clean":
            if args.emit_profiles is not None:
                args.emit_profiles.mkdir(parents=True, exist_ok=True)
            report = pipeline.clean(args.input, config, args.out_dir, args.emit_profiles, args.emit_components)
            for w in report["warnings"]:
                print(f"warning: {w}", file=sys.stderr)
            if args.out_dir is None:
                sys.stdout.write(pipeline.dump_report(report))
            return 0
        if args.command == "evaluate":
            out = pipeline.evaluate(args.input_dir, config, args.out_dir)
        else:
            out = pipeline.batch(args.inputs, config, args.out_dir)
        agg = out["aggregate"]
        sys.stdout.write(json.dumps(agg, indent=2, sort_keys=True) + "\n")
        return 2 if agg["failures"] else 0
    except (MarginaliaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
