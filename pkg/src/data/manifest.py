"""
Dataset manifests: samples of one benchmark with their split, sequence and subset tags
"""

import json
import logging
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.exceptions import DatasetError
from core.raster_io import read_image_size

logger = logging.getLogger(__name__)

_DIGITS = re.compile(r"(\d+)")


def natural_key(text: str) -> List[Union[int, str]]:
    """Sort key treating digit runs as numbers, so frame_10 follows frame_9"""
    return [int(part) if part.isdigit() else part.lower() for part in _DIGITS.split(text)]


class DatasetKind(str, Enum):
    IMAGE = "image"
    VIDEO = "video"


class SplitTag(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Sample(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    image: str
    mask: Optional[str] = None
    split: Optional[SplitTag] = None
    sequence: Optional[str] = None
    subset: Optional[str] = None

    @property
    def safe_id(self) -> str:
        """Sample id usable as a flat file name"""
        return self.id.replace("/", "__")

    @property
    def is_negative(self) -> bool:
        return self.mask is None


class ValidationRecord(BaseModel):
    path: str
    issue: str
    detail: str = ""


class DatasetManifest(BaseModel):
    name: str
    kind: DatasetKind
    root: str
    samples: List[Sample] = Field(default_factory=list)
    validation: List[ValidationRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_samples(self):
        ids = [s.id for s in self.samples]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Manifest '{self.name}' has duplicate sample ids")
        if self.kind == DatasetKind.VIDEO and any(s.sequence is None for s in self.samples):
            raise ValueError(f"Video manifest '{self.name}' has samples without a sequence")
        return self

    def __len__(self) -> int:
        return len(self.samples)

    def image_path(self, sample: Sample) -> Path:
        return Path(self.root) / sample.image

    def mask_path(self, sample: Sample) -> Optional[Path]:
        return Path(self.root) / sample.mask if sample.mask is not None else None

    def sorted_samples(self) -> List[Sample]:
        return sorted(self.samples, key=lambda s: natural_key(s.id))

    def with_samples(self, samples: List[Sample]) -> "DatasetManifest":
        return self.model_copy(update={"samples": samples})

    def select(self, split: Optional[SplitTag] = None, subset: Optional[str] = None) -> List[Sample]:
        chosen = self.sorted_samples()
        if split is not None:
            chosen = [s for s in chosen if s.split == split]
        if subset is not None:
            chosen = [s for s in chosen if s.subset == subset]
        return chosen

    def sequences(self, samples: Optional[List[Sample]] = None) -> Dict[str, List[Sample]]:
        """Frames grouped by sequence in natural order"""
        grouped: Dict[str, List[Sample]] = {}
        for sample in sorted(samples if samples is not None else self.samples, key=lambda s: natural_key(s.id)):
            grouped.setdefault(sample.sequence or sample.id, []).append(sample)
        return dict(sorted(grouped.items(), key=lambda item: natural_key(item[0])))

    def subsets(self) -> List[str]:
        return sorted({s.subset for s in self.samples if s.subset})

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2), encoding="utf-8")
        logger.info(f"Wrote manifest '{self.name}' ({len(self.samples)} samples) to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise DatasetError(f"Manifest {path} does not exist")
        try:
            return cls.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except ValueError as e:
            raise DatasetError(f"Manifest {path} is invalid: {e}") from e


def validate_manifest(manifest: DatasetManifest) -> List[ValidationRecord]:
    """Missing files and image/mask dimension mismatches, one record per problem"""
    records = []
    for sample in manifest.sorted_samples():
        image_path = manifest.image_path(sample)
        mask_path = manifest.mask_path(sample)
        if not image_path.exists():
            records.append(ValidationRecord(path=sample.image, issue="missing_image", detail=sample.id))
            continue
        if mask_path is None:
            continue
        if not mask_path.exists():
            records.append(ValidationRecord(path=sample.mask, issue="missing_mask", detail=sample.id))
            continue
        try:
            image_size = read_image_size(image_path)
            mask_size = read_image_size(mask_path)
        except OSError as e:
            records.append(ValidationRecord(path=sample.image, issue="unreadable", detail=str(e)))
            continue
        if image_size != mask_size:
            records.append(ValidationRecord(
                path=sample.mask, issue="dimension_mismatch",
                detail=f"{sample.id}: image {image_size} vs mask {mask_size}",
            ))
    for record in records:
        logger.warning(f"{manifest.name}: {record.issue} {record.path} {record.detail}")
    return records
