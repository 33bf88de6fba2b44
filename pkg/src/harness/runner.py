"""
Evaluation runner: image and video benchmark runs with persisted records, aggregates and timings
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from tqdm import tqdm

from backends.adapter import close_shared_clients
from backends.segmenter import build_segmenter
from backends.types import SegmenterKind
from core.exceptions import DatasetError, DimensionMismatchError
from core.geometry import Frame
from core.masks import BinaryMask, check_same_shape
from core.raster_io import load_frame, load_mask, save_mask
from data.manifest import DatasetKind, DatasetManifest, Sample, SplitTag, natural_key
from data.scanner import scan_dataset
from data.splitter import split
from metrics.aggregate import DatasetReport, Grouping, evaluate_frame
from video.sequence_runner import SequenceRunner

from .pipeline import SelfPromptingPipeline
from .records import RECORDS_FILE, RecordSink, ResultRecord, aggregate_records
from .run_config import DatasetRef, EvalSplit, RunConfig, write_snapshot

logger = logging.getLogger(__name__)

AGGREGATE_FILE = "aggregate.json"
TIMING_FILE = "timing.json"
PREDICTIONS_DIR = "predictions"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


@dataclass
class DatasetOutcome:
    dataset: str
    report: Optional[DatasetReport]
    subsets: Dict[str, DatasetReport] = field(default_factory=dict)
    evaluated: int = 0
    failures: int = 0
    out_dir: Optional[Path] = None


@dataclass
class RunSummary:
    config_digest: str
    outcomes: List[DatasetOutcome] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(o.failures for o in self.outcomes)

    @property
    def exit_code(self) -> int:
        return EXIT_PARTIAL if self.failures else EXIT_OK

    def outcome(self, dataset: str) -> DatasetOutcome:
        return next(o for o in self.outcomes if o.dataset == dataset)


def load_manifest(ref: DatasetRef) -> DatasetManifest:
    if ref.manifest is not None:
        return DatasetManifest.load(ref.manifest)
    return scan_dataset(ref.root, ref.layout, ref.name)


def select_eval_samples(manifest: DatasetManifest, ref: DatasetRef, config: RunConfig) -> Tuple[DatasetManifest, List[Sample]]:
    if ref.eval_split == EvalSplit.EVAL:
        if any(s.split is not None for s in manifest.samples):
            logger.info(f"{ref.name}: using the split tags already in the manifest")
        else:
            manifest = split(manifest, config.split)
        samples = manifest.select(SplitTag.EVAL, ref.subset)
    else:
        samples = manifest.select(None, ref.subset)
    if not samples:
        raise DatasetError(f"Dataset '{ref.name}' has no evaluation samples")
    return manifest, samples


def _load_gt(manifest: DatasetManifest, sample: Sample, frame: Frame) -> BinaryMask:
    """Ground truth of a sample; negative samples score against an all-zero mask"""
    mask_path = manifest.mask_path(sample)
    if mask_path is None:
        return BinaryMask.zeros(frame.height, frame.width)
    gt = load_mask(mask_path)
    if gt.shape != frame.shape:
        raise DimensionMismatchError(f"Mask {gt.shape} does not match image {frame.shape} for {sample.id}")
    return gt


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class EvaluationRunner:
    def __init__(self, config: RunConfig):
        """Initialize the runner; writes the config snapshot into the output directory"""
        self.config = config
        self.out_dir = Path(config.output_dir)
        self.digest = write_snapshot(config, self.out_dir)

    def _dataset_dir(self, ref: DatasetRef) -> Path:
        path = self.out_dir / ref.name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _save_prediction(self, out: Path, sample: Sample, mask: BinaryMask) -> None:
        if self.config.save_predictions:
            save_mask(mask, out / PREDICTIONS_DIR / f"{sample.safe_id}.png")

    def _finish(self, ref: DatasetRef, out: Path, records: List[ResultRecord], grouping: Grouping,
                kind: DatasetKind, wall_s: float, frames: int) -> DatasetOutcome:
        ok = [r for r in records if r.ok]
        failures = len({r.sequence_id or r.sample_id for r in records if not r.ok})
        outcome = DatasetOutcome(dataset=ref.name, report=None, evaluated=len(ok), failures=failures, out_dir=out)
        if not ok:
            logger.error(f"{ref.name}: every sample failed; no aggregate written")
            return outcome

        outcome.report = aggregate_records(ok, grouping, ref.name, self.config.metrics)
        for subset in sorted({r.subset for r in ok if r.subset}):
            outcome.subsets[subset] = aggregate_records(
                [r for r in ok if r.subset == subset], grouping, f"{ref.name}/{subset}", self.config.metrics
            )

        _write_json(out / AGGREGATE_FILE, {
            "config_digest": self.digest,
            "dataset": ref.name,
            "kind": kind.value,
            "failures": failures,
            "overall": outcome.report.to_dict(),
            "subsets": {tag: report.to_dict() for tag, report in outcome.subsets.items()},
        })

        stage_totals: Dict[str, float] = {}
        for record in ok:
            for stage, ms in record.timing_ms.items():
                stage_totals[stage] = stage_totals.get(stage, 0.0) + ms
        _write_json(out / TIMING_FILE, {
            "frames": frames,
            "wall_s": wall_s,
            "fps": frames / wall_s if wall_s > 0 else None,
            "stage_ms_mean": {stage: total / len(ok) for stage, total in stage_totals.items()},
        })
        logger.info(
            f"{ref.name}: {len(ok)} frames evaluated, {failures} failures, "
            f"mDice {outcome.report.aggregates['mDice']:.4f}, mIoU {outcome.report.aggregates['mIoU']:.4f}"
        )
        return outcome

    # Image benchmarks

    def _image_sample(self, pipeline: SelfPromptingPipeline, manifest: DatasetManifest, ref: DatasetRef,
                      out: Path, index: int, sample: Sample) -> ResultRecord:
        base = {"sample_id": sample.id, "dataset": ref.name, "subset": sample.subset, "config_digest": self.digest}
        try:
            frame = load_frame(manifest.image_path(sample), index=index, key=sample.id)
            gt = _load_gt(manifest, sample, frame)
            result = pipeline.segment_frame(frame, gt)

            start = time.perf_counter()
            metrics = evaluate_frame(result.mask, gt, self.config.metrics)
            result.timing_ms["metrics"] = (time.perf_counter() - start) * 1000

            self._save_prediction(out, sample, result.mask)
            return ResultRecord(**base, metrics=metrics.as_dict(), provenance=result.provenance,
                                prompts=len(result.prompts), timing_ms=result.timing_ms)
        except DimensionMismatchError as e:
            logger.warning(f"Skipping {sample.id}: {e}")
            return ResultRecord(**base, error=str(e))
        except Exception as e:
            logger.error(f"Error evaluating {sample.id}: {e}")
            return ResultRecord(**base, error=str(e))

    def eval_images_dataset(self, ref: DatasetRef) -> DatasetOutcome:
        manifest, samples = select_eval_samples(load_manifest(ref), ref, self.config)
        if manifest.kind != DatasetKind.IMAGE:
            logger.warning(f"{ref.name} is a video dataset; scoring its frames independently")
        pipeline = SelfPromptingPipeline(self.config.detector, self.config.segmenter, self.config.bridge,
                                         self.config.prompt_scale)
        out = self._dataset_dir(ref)
        sink = RecordSink(out / RECORDS_FILE)

        start = time.perf_counter()
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            futures = [pool.submit(self._image_sample, pipeline, manifest, ref, out, i, s) for i, s in enumerate(samples)]
            records = []
            for future in tqdm(futures, desc=f"Evaluating {ref.name}", disable=len(futures) < 50):
                record = future.result()
                sink.write(record)
                records.append(record)
        wall_s = time.perf_counter() - start

        records.sort(key=lambda r: natural_key(r.sample_id))
        return self._finish(ref, out, records, Grouping.FLAT, DatasetKind.IMAGE, wall_s, len(samples))

    def eval_images(self) -> RunSummary:
        summary = RunSummary(self.digest)
        try:
            for ref in self.config.datasets:
                summary.outcomes.append(self.eval_images_dataset(ref))
        finally:
            close_shared_clients()
        return summary

    # Video benchmarks

    def _sequence(self, manifest: DatasetManifest, ref: DatasetRef, out: Path, sequence_id: str,
                  samples: List[Sample]) -> List[ResultRecord]:
        subset = samples[0].subset
        base = {"dataset": ref.name, "sequence_id": sequence_id, "subset": subset, "config_digest": self.digest}
        try:
            start = time.perf_counter()
            frames = [load_frame(manifest.image_path(s), index=t, key=s.id) for t, s in enumerate(samples)]
            gts = [_load_gt(manifest, s, f) for s, f in zip(samples, frames)]
            for gt in gts[1:]:
                check_same_shape(gts[0], gt)
            load_ms = (time.perf_counter() - start) * 1000

            start = time.perf_counter()
            backend = build_segmenter(self.config.segmenter)
            run = SequenceRunner(frames, gts, self.config.detector, self.config.bridge, self.config.video,
                                 backend, sequence_id).run()
            run_ms = (time.perf_counter() - start) * 1000
        except Exception as e:
            logger.error(f"Error running sequence {sequence_id}: {e}")
            return [ResultRecord(sample_id=s.id, error=str(e), **base) for s in samples]

        records = []
        per_frame_ms = {"load": load_ms / len(samples), "sequence": run_ms / len(samples)}
        for sample, mask, gt, provenance in zip(samples, run.masks, gts, run.provenance):
            try:
                metrics = evaluate_frame(mask, gt, self.config.metrics)
                self._save_prediction(out, sample, mask)
                records.append(ResultRecord(
                    sample_id=sample.id, metrics=metrics.as_dict(), provenance=provenance.value,
                    prompts=len(run.prompts), detection_mode=run.detection_mode, timing_ms=per_frame_ms, **base,
                ))
            except Exception as e:
                logger.error(f"Error scoring {sample.id}: {e}")
                records.append(ResultRecord(sample_id=sample.id, error=str(e), **base))
        return records

    def eval_video_dataset(self, ref: DatasetRef) -> DatasetOutcome:
        manifest, samples = select_eval_samples(load_manifest(ref), ref, self.config)
        if manifest.kind != DatasetKind.VIDEO:
            raise DatasetError(f"Dataset '{ref.name}' is not a video dataset (layout {ref.layout})")
        sequences = manifest.sequences(samples)
        out = self._dataset_dir(ref)
        sink = RecordSink(out / RECORDS_FILE)

        # one adapter connection holds one video session at a time
        workers = 1 if self.config.segmenter.kind == SegmenterKind.EXTERNAL else self.config.workers

        start = time.perf_counter()
        records: List[ResultRecord] = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self._sequence, manifest, ref, out, seq_id, seq_samples)
                       for seq_id, seq_samples in sequences.items()]
            for future in tqdm(futures, desc=f"Evaluating {ref.name}", disable=len(futures) < 10):
                for record in future.result():
                    sink.write(record)
                    records.append(record)
        wall_s = time.perf_counter() - start

        records.sort(key=lambda r: natural_key(r.sample_id))
        logger.info(f"{ref.name}: {len(sequences)} sequences, detection mode {self.config.video.detection_mode}")
        return self._finish(ref, out, records, Grouping.BY_SEQUENCE, DatasetKind.VIDEO, wall_s, len(samples))

    def eval_video(self) -> RunSummary:
        summary = RunSummary(self.digest)
        try:
            for ref in self.config.datasets:
                summary.outcomes.append(self.eval_video_dataset(ref))
        finally:
            close_shared_clients()
        return summary


def cmd_eval_images(config: RunConfig) -> RunSummary:
    return EvaluationRunner(config).eval_images()


def cmd_eval_video(config: RunConfig) -> RunSummary:
    return EvaluationRunner(config).eval_video()
