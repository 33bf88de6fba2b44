#!/usr/bin/env python3
"""
Main script for the polyp self-prompting segmentation toolkit
"""

import argparse
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent / "src"))

from core.exceptions import ConfigError, ContractError, DatasetError, PolypSegError, ReportError
from utils.config import Config

logger = logging.getLogger("run")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def cmd_ingest(args) -> int:
    """Scan a dataset root into a manifest and report validation issues"""
    from data.scanner import scan_dataset

    print(f"📂 Scanning {args.root} with layout '{args.layout}'...")
    manifest = scan_dataset(args.root, args.layout, args.name)
    out = Path(args.out) if args.out else Path(Config.OUTPUT_DIR) / f"{manifest.name}_manifest.json"
    manifest.save(out)

    print(f"✅ {len(manifest)} samples ({manifest.kind.value}) written to {out}")
    if manifest.subsets():
        print(f"   Subsets: {', '.join(manifest.subsets())}")
    if manifest.validation:
        print(f"⚠️ {len(manifest.validation)} validation issues:")
        for record in manifest.validation[:20]:
            print(f"   - {record.issue}: {record.path} {record.detail}")
    return EXIT_OK


def cmd_split(args) -> int:
    """Tag manifest samples as train or eval"""
    from data.manifest import DatasetManifest, SplitTag
    from data.splitter import SplitSpec, SplitUnit, split

    manifest = DatasetManifest.load(args.manifest)
    spec = SplitSpec(train_fraction=args.fraction, seed=args.seed, unit=SplitUnit(args.unit))
    tagged = split(manifest, spec)
    out = Path(args.out) if args.out else Path(args.manifest)
    tagged.save(out)

    n_train = len(tagged.select(SplitTag.TRAIN))
    n_eval = len(tagged.select(SplitTag.EVAL))
    print(f"✅ Split {manifest.name}: {n_train} train, {n_eval} eval -> {out}")
    return EXIT_OK


def cmd_export_annotations(args) -> int:
    """Write detector training labels from segmentation masks"""
    from data.annotations import masks_to_detection_annotations
    from data.manifest import DatasetManifest

    manifest = DatasetManifest.load(args.manifest)
    export = masks_to_detection_annotations(manifest, args.out, args.min_area, Config.WORKERS)
    print(f"✅ {export.boxes_written} boxes in {export.files_written} label files under {export.out_dir}")
    if not export.ok:
        print(f"❌ {len(export.errors)} samples failed")
        return EXIT_PARTIAL
    return EXIT_OK


def _load_run_config(args):
    from harness.run_config import load_run_config

    overrides = {"seed": args.seed, "out": args.out, "layout": args.layout, "backend": args.backend}
    config = load_run_config(args.config, overrides)
    print(f"⚙️ Run '{config.name}': {config.detector.kind.value} detector, "
          f"{config.segmenter.kind.value} segmenter, output {config.output_dir}")
    return config


def _print_summary(summary) -> int:
    for outcome in summary.outcomes:
        if outcome.report is None:
            print(f"❌ {outcome.dataset}: no sample could be evaluated")
            continue
        agg = outcome.report.aggregates
        print(f"📊 {outcome.dataset}: {outcome.evaluated} frames, mDice {agg['mDice']:.4f}, mIoU {agg['mIoU']:.4f}")
        for tag, report in outcome.subsets.items():
            print(f"   {tag}: mDice {report.aggregates['mDice']:.4f} over {report.n_sequences or report.n_samples} units")
    if summary.failures:
        print(f"⚠️ {summary.failures} failures; see records.jsonl")
    print(f"🔑 Config digest {summary.config_digest[:12]}")
    return summary.exit_code


def cmd_eval_images(args) -> int:
    from harness.runner import cmd_eval_images as run_images

    return _print_summary(run_images(_load_run_config(args)))


def cmd_eval_video(args) -> int:
    from harness.runner import cmd_eval_video as run_video

    return _print_summary(run_video(_load_run_config(args)))


def cmd_report(args) -> int:
    from harness.report import cmd_report as build_report, parse_result_arg, render_markdown

    results = [parse_result_arg(value) for value in args.results or []]
    tables = args.tables if args.tables else None
    if args.no_fixtures:
        tables = []
    out = args.out or str(Path(Config.OUTPUT_DIR) / "report")
    frames = build_report(tables, results, out)
    for dataset, df in frames.items():
        print(render_markdown(dataset, df))
    print(f"✅ {len(frames)} tables written to {out}")
    return EXIT_OK


def cmd_overlay(args) -> int:
    from data.manifest import DatasetManifest
    from harness.overlay import cmd_overlay as render

    summary = render(DatasetManifest.load(args.manifest), args.predictions, args.out)
    print(f"🖼️ {summary.written} overlays written, {summary.skipped} skipped")
    if summary.written == 0:
        print("❌ No overlay could be rendered; check the predictions directory")
        return EXIT_PARTIAL
    return EXIT_PARTIAL if summary.skipped else EXIT_OK


def cmd_synth(args) -> int:
    """Generate a synthetic image or video dataset"""
    from data.synth import synth_generate, synth_generate_sequences

    seed = args.seed if args.seed is not None else 0
    out = args.out or str(Path(Config.DATA_ROOT) / ("synthetic_video" if args.video else "synthetic"))
    if args.video:
        manifest = synth_generate_sequences(out, args.sequences, args.frames, args.image_size or 112, seed,
                                            n_negative=args.negative)
    else:
        manifest = synth_generate(out, args.scenes, args.image_size or 128,
                                  (args.min_blobs, args.max_blobs), seed)
    print(f"✅ Generated {len(manifest)} samples ({manifest.kind.value}) under {out}")
    return EXIT_OK


def _add_run_flags(parser):
    parser.add_argument("--config", required=True, help="YAML run config")
    parser.add_argument("--seed", type=int, help="Override the run seed")
    parser.add_argument("--out", help="Override the output directory")
    parser.add_argument("--layout", help="Override the layout of every dataset")
    parser.add_argument(
        "--backend",
        help="oracle | box_fill | gt_intersect | ellipse | external:ADDR",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Polyp self-prompting segmentation toolkit")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL, help="Logging level (default from env)")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="Scan a dataset into a manifest")
    ingest.add_argument("--root", required=True, help="Dataset root directory")
    ingest.add_argument("--layout", required=True, help="Dataset layout name")
    ingest.add_argument("--name", help="Dataset name (defaults to the layout)")
    ingest.add_argument("--out", help="Manifest JSON path")
    ingest.set_defaults(handler=cmd_ingest)

    split = commands.add_parser("split", help="Seeded train/eval split of a manifest")
    split.add_argument("--manifest", required=True)
    split.add_argument("--fraction", type=float, default=0.8, help="Train fraction")
    split.add_argument("--seed", type=int, default=0)
    split.add_argument("--unit", choices=["sample", "sequence"], default="sample")
    split.add_argument("--out", help="Output manifest (defaults to overwriting the input)")
    split.set_defaults(handler=cmd_split)

    export = commands.add_parser("export-annotations", help="Box annotations from masks")
    export.add_argument("--manifest", required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--min-area", type=int, default=16, help="Minimum component area in pixels")
    export.set_defaults(handler=cmd_export_annotations)

    eval_images = commands.add_parser("eval-images", help="Evaluate image benchmarks")
    _add_run_flags(eval_images)
    eval_images.set_defaults(handler=cmd_eval_images)

    eval_video = commands.add_parser("eval-video", help="Evaluate video benchmarks")
    _add_run_flags(eval_video)
    eval_video.set_defaults(handler=cmd_eval_video)

    report = commands.add_parser("report", help="Comparison tables with best values in bold")
    report.add_argument("--tables", nargs="*", help="Fixture table YAML files (default: bundled tables)")
    report.add_argument("--no-fixtures", action="store_true", help="Only report own results")
    report.add_argument("--results", nargs="*", help="METHOD=PATH to an aggregate.json")
    report.add_argument("--out", help="Output directory")
    report.set_defaults(handler=cmd_report)

    overlay = commands.add_parser("overlay", help="Render prediction overlays")
    overlay.add_argument("--manifest", required=True)
    overlay.add_argument("--predictions", required=True, help="Directory of predicted mask PNGs")
    overlay.add_argument("--out", required=True)
    overlay.set_defaults(handler=cmd_overlay)

    synth = commands.add_parser("synth", help="Generate synthetic data")
    synth.add_argument("--out", help="Output directory (default: <data root>/synthetic or synthetic_video)")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--image-size", type=int)
    synth.add_argument("--scenes", type=int, default=20)
    synth.add_argument("--min-blobs", type=int, default=1)
    synth.add_argument("--max-blobs", type=int, default=3)
    synth.add_argument("--video", action="store_true", help="Generate sequences instead of scenes")
    synth.add_argument("--sequences", type=int, default=3)
    synth.add_argument("--frames", type=int, default=12)
    synth.add_argument("--negative", type=int, default=0, help="Number of all-negative sequences")
    synth.set_defaults(handler=cmd_synth)

    return parser


def main(argv=None) -> int:
    """Main function"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    print("🔬 Polyp Self-Prompting Segmentation")
    print("=" * 40)

    try:
        return args.handler(args)
    except (ConfigError, DatasetError, ReportError, ContractError) as e:
        print(f"❌ {e}")
        return EXIT_INVALID
    except PolypSegError as e:
        print(f"❌ {e}")
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
