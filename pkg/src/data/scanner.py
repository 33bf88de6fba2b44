"""
Dataset scanner: builds manifests from the on-disk layouts of the polyp benchmarks
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from core.exceptions import DatasetError

from .manifest import DatasetKind, DatasetManifest, Sample, SplitTag, ValidationRecord, natural_key, validate_manifest

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"}

SUN_SEG_SUBSETS = {
    ("TestEasyDataset", "Seen"): "Seen-Easy",
    ("TestHardDataset", "Seen"): "Seen-Hard",
    ("TestEasyDataset", "Unseen"): "Unseen-Easy",
    ("TestHardDataset", "Unseen"): "Unseen-Hard",
}


def strip_mask_suffix(stem: str) -> str:
    return stem[:-len("_mask")] if stem.endswith("_mask") else stem


def strip_etis_prefix(stem: str) -> str:
    """ETIS ground truth is named p<N> for image <N>"""
    return stem[1:] if stem.startswith("p") and stem[1:].isdigit() else stem


@dataclass(frozen=True)
class ImageLayout:
    name: str
    image_dirs: Tuple[str, ...]
    mask_dirs: Tuple[str, ...]
    mask_stem: Callable[[str], str] = strip_mask_suffix


IMAGE_LAYOUTS: Dict[str, ImageLayout] = {
    "kvasir": ImageLayout("kvasir", ("images",), ("masks",)),
    "cvc_clinic": ImageLayout("cvc_clinic", ("images", "Original", "PNG/Original"),
                              ("masks", "Ground Truth", "GroundTruth", "PNG/Ground Truth")),
    "cvc_colon": ImageLayout("cvc_colon", ("images",), ("masks",)),
    "etis": ImageLayout("etis", ("images", "ETIS-LaribPolypDB"), ("masks", "GroundTruth", "Ground Truth"),
                        lambda stem: strip_etis_prefix(strip_mask_suffix(stem))),
    "cvc300": ImageLayout("cvc300", ("images",), ("masks",)),
    "synthetic": ImageLayout("synthetic", ("images",), ("masks",)),
}

VIDEO_LAYOUTS = ("polypgen", "sun_seg", "synthetic_video")
LAYOUTS = tuple(IMAGE_LAYOUTS) + VIDEO_LAYOUTS


def list_images(directory: Path) -> List[Path]:
    if not directory.is_dir():
        return []
    files = [p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS]
    return sorted(files, key=lambda p: natural_key(p.name))


def read_case_lists(root: Path) -> Dict[str, str]:
    """case name -> subset tag from case_lists/<subset>.txt"""
    tags: Dict[str, str] = {}
    for list_file in sorted((root / "case_lists").glob("*.txt")):
        for line in list_file.read_text(encoding="utf-8").splitlines():
            case = line.strip()
            if case and not case.startswith("#"):
                tags[case] = list_file.stem
    return tags


class DatasetScanner:
    def __init__(self, root: str, layout_name: str, name: Optional[str] = None):
        """Initialize the scanner for one dataset root"""
        if layout_name not in LAYOUTS:
            raise DatasetError(f"Unknown layout '{layout_name}'; choose one of {', '.join(LAYOUTS)}")
        self.root = Path(root)
        self.layout_name = layout_name
        self.name = name or layout_name
        self.samples: List[Sample] = []
        self.validation: List[ValidationRecord] = []

    def _relative(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()

    def _skip(self, path: Path, issue: str, detail: str = "") -> None:
        logger.warning(f"{self.name}: {issue} for {path}" + (f" ({detail})" if detail else ""))
        self.validation.append(ValidationRecord(path=self._relative(path), issue=issue, detail=detail))

    def _pair_directory(self, image_dir: Path, mask_dir: Optional[Path], id_prefix: str = "",
                        mask_stem: Callable[[str], str] = strip_mask_suffix, sequence: Optional[str] = None,
                        subset: Optional[str] = None, split: Optional[SplitTag] = None) -> None:
        """Pair images with masks by filename stem, extension-insensitive"""
        masks: Dict[str, Path] = {}
        if mask_dir is not None:
            for mask_path in list_images(mask_dir):
                masks.setdefault(mask_stem(mask_path.stem), mask_path)

        for image_path in list_images(image_dir):
            try:
                mask_path = masks.pop(image_path.stem, None)
                if mask_dir is not None and mask_path is None:
                    self._skip(image_path, "missing_mask")
                    continue
                self.samples.append(Sample(
                    id=f"{id_prefix}{image_path.stem}",
                    image=self._relative(image_path),
                    mask=self._relative(mask_path) if mask_path is not None else None,
                    sequence=sequence,
                    subset=subset,
                    split=split,
                ))
            except Exception as e:
                logger.error(f"Error scanning {image_path}: {e}")
                self.validation.append(ValidationRecord(path=str(image_path), issue="error", detail=str(e)))

        for orphan in masks.values():
            self._skip(orphan, "missing_image")

    def scan_image_layout(self) -> None:
        layout = IMAGE_LAYOUTS[self.layout_name]
        image_dir = next((self.root / d for d in layout.image_dirs if (self.root / d).is_dir()), None)
        mask_dir = next((self.root / d for d in layout.mask_dirs if (self.root / d).is_dir()), None)
        if image_dir is None or mask_dir is None:
            raise DatasetError(
                f"{self.root} does not look like a {layout.name} dataset: expected one of "
                f"{layout.image_dirs} and one of {layout.mask_dirs}"
            )
        self._pair_directory(image_dir, mask_dir, mask_stem=layout.mask_stem)

    def scan_polypgen(self) -> None:
        positive = self.root / "sequenceData" / "positive"
        for seq_dir in sorted(positive.glob("seq*"), key=lambda p: natural_key(p.name)):
            image_dir = next(iter(sorted(seq_dir.glob("images_seq*"))), None)
            mask_dir = next(iter(sorted(seq_dir.glob("masks_seq*"))), None)
            if image_dir is None or mask_dir is None:
                self._skip(seq_dir, "incomplete_sequence", "expected images_seq* and masks_seq*")
                continue
            self._pair_directory(image_dir, mask_dir, f"{seq_dir.name}/", sequence=seq_dir.name)

        negative = self.root / "sequenceData" / "negativeOnly"
        for seq_dir in sorted(negative.glob("seq*"), key=lambda p: natural_key(p.name)):
            image_dir = next(iter(sorted(seq_dir.glob("images_seq*"))), seq_dir)
            sequence = f"neg_{seq_dir.name}"
            self._pair_directory(image_dir, None, f"{sequence}/", sequence=sequence, subset="negative")

    def scan_sun_seg(self) -> None:
        overrides = read_case_lists(self.root)
        roots = [(self.root / split_dir / group, tag, SplitTag.EVAL) for (split_dir, group), tag in SUN_SEG_SUBSETS.items()]
        roots.append((self.root / "TrainDataset", "Train", SplitTag.TRAIN))
        for base, tag, split in roots:
            for case_dir in sorted((base / "Frame").glob("*"), key=lambda p: natural_key(p.name)):
                if not case_dir.is_dir():
                    continue
                case = case_dir.name
                self._pair_directory(case_dir, base / "GT" / case, f"{case}/",
                                     sequence=case, subset=overrides.get(case, tag), split=split)

    def scan_synthetic_video(self) -> None:
        tags = read_case_lists(self.root)
        for seq_dir in sorted((self.root / "sequences").glob("*"), key=lambda p: natural_key(p.name)):
            if seq_dir.is_dir():
                self._pair_directory(seq_dir / "images", seq_dir / "masks", f"{seq_dir.name}/",
                                     sequence=seq_dir.name, subset=tags.get(seq_dir.name))

    def scan(self) -> DatasetManifest:
        if not self.root.is_dir():
            raise DatasetError(f"Dataset root {self.root} does not exist")
        self.samples, self.validation = [], []

        if self.layout_name in IMAGE_LAYOUTS:
            self.scan_image_layout()
            kind = DatasetKind.IMAGE
        else:
            getattr(self, f"scan_{self.layout_name}")()
            kind = DatasetKind.VIDEO

        if not self.samples:
            raise DatasetError(f"No samples found under {self.root} for layout '{self.layout_name}'")

        seen = set()
        unique = []
        for sample in sorted(self.samples, key=lambda s: natural_key(s.id)):
            if sample.id in seen:
                self._skip(self.root / sample.image, "duplicate_id", sample.id)
                continue
            seen.add(sample.id)
            unique.append(sample)

        manifest = DatasetManifest(
            name=self.name, kind=kind, root=str(self.root.resolve()),
            samples=unique, validation=self.validation,
        )
        manifest.validation.extend(validate_manifest(manifest))
        logger.info(f"Scanned {self.name}: {len(unique)} samples, {len(manifest.validation)} validation records")
        return manifest


def scan_dataset(root: str, layout_name: str, name: Optional[str] = None) -> DatasetManifest:
    return DatasetScanner(root, layout_name, name).scan()
