"""
Mask to box annotation export for detector training ("0 cx cy w h" lines, normalised centre format)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import yaml
from tqdm import tqdm

from backends.types import POLYP_CLASS_ID
from core.components import connected_components
from core.exceptions import ContractError
from core.geometry import BBox
from core.masks import BinaryMask
from core.raster_io import load_mask

from .manifest import DatasetManifest, Sample

logger = logging.getLogger(__name__)

DEFAULT_MIN_AREA_PX = 16
CLASS_NAMES = {POLYP_CLASS_ID: "polyp"}


@dataclass(frozen=True)
class BoxAnnotation:
    cx: float
    cy: float
    w: float
    h: float
    class_id: int = POLYP_CLASS_ID

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ContractError(f"Normalised {name} must lie in (0, 1], got {value}")

    @classmethod
    def from_box(cls, box: BBox, height: int, width: int) -> "BoxAnnotation":
        cx, cy = box.center
        return cls(cx / width, cy / height, box.width / width, box.height / height)

    def to_line(self) -> str:
        return f"{self.class_id} {self.cx:.6f} {self.cy:.6f} {self.w:.6f} {self.h:.6f}"

    @classmethod
    def parse_line(cls, line: str) -> "BoxAnnotation":
        parts = line.split()
        if len(parts) != 5:
            raise ContractError(f"Annotation line needs 5 fields, got '{line}'")
        return cls(float(parts[1]), float(parts[2]), float(parts[3]), float(parts[4]), int(parts[0]))

    def to_box(self, height: int, width: int) -> BBox:
        """Denormalise to the nearest integer pixel box"""
        return BBox(
            round((self.cx - self.w / 2) * width),
            round((self.cy - self.h / 2) * height),
            round((self.cx + self.w / 2) * width),
            round((self.cy + self.h / 2) * height),
        )


def mask_annotations(mask: BinaryMask, min_area_px: int = DEFAULT_MIN_AREA_PX) -> List[BoxAnnotation]:
    """One annotation per 4-connected component, ordered by (y_min, x_min)"""
    return [
        BoxAnnotation.from_box(component.box, mask.height, mask.width)
        for component in connected_components(mask, min_area=min_area_px)
    ]


def write_annotation_file(annotations: List[BoxAnnotation], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(a.to_line() + "\n" for a in annotations), encoding="utf-8")


def read_annotation_file(path: Union[str, Path]) -> List[BoxAnnotation]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [BoxAnnotation.parse_line(line) for line in lines if line.strip()]


@dataclass
class AnnotationExport:
    out_dir: Path
    files_written: int = 0
    boxes_written: int = 0
    errors: List[Dict[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _split_name(sample: Sample) -> str:
    return sample.split.value if sample.split is not None else "all"


def masks_to_detection_annotations(manifest: DatasetManifest, out_dir: Union[str, Path],
                                   min_area_px: int = DEFAULT_MIN_AREA_PX, workers: int = 4) -> AnnotationExport:
    """Write labels/<split>/<sample>.txt per sample plus image lists and dataset.yaml"""
    out_dir = Path(out_dir)
    export = AnnotationExport(out_dir=out_dir)
    samples = manifest.sorted_samples()

    def export_sample(sample: Sample) -> int:
        mask_path = manifest.mask_path(sample)
        annotations = [] if mask_path is None else mask_annotations(load_mask(mask_path), min_area_px)
        write_annotation_file(annotations, out_dir / "labels" / _split_name(sample) / f"{sample.safe_id}.txt")
        return len(annotations)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {sample.id: pool.submit(export_sample, sample) for sample in samples}
        for sample_id, future in tqdm(futures.items(), desc="Exporting annotations", disable=len(samples) < 50):
            try:
                export.boxes_written += future.result()
                export.files_written += 1
            except Exception as e:
                logger.error(f"Error exporting annotations for {sample_id}: {e}")
                export.errors.append({"sample": sample_id, "error": str(e)})

    failed = {error["sample"] for error in export.errors}
    lists: Dict[str, List[str]] = {}
    for sample in samples:
        if sample.id not in failed:
            lists.setdefault(_split_name(sample), []).append(str(manifest.image_path(sample)))
    for split_name, paths in lists.items():
        (out_dir / f"{split_name}.txt").write_text("".join(p + "\n" for p in paths), encoding="utf-8")

    dataset_yaml = {
        "path": str(out_dir.resolve()),
        "train": "train.txt" if "train" in lists else "all.txt",
        "val": "eval.txt" if "eval" in lists else "all.txt",
        "names": CLASS_NAMES,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "dataset.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(dataset_yaml, f, sort_keys=False)

    logger.info(
        f"Exported {export.boxes_written} boxes in {export.files_written} files to {out_dir} "
        f"({len(export.errors)} errors)"
    )
    return export
