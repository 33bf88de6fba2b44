"""
Seeded train/eval split over samples or whole sequences
"""

import logging
import math
from enum import Enum
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .manifest import DatasetKind, DatasetManifest, SplitTag, natural_key

logger = logging.getLogger(__name__)


class SplitUnit(str, Enum):
    SAMPLE = "sample"
    SEQUENCE = "sequence"


class SplitSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    train_fraction: float = Field(0.8, gt=0.0, le=1.0)
    seed: int = 0
    unit: SplitUnit = SplitUnit.SAMPLE


def split(manifest: DatasetManifest, spec: SplitSpec) -> DatasetManifest:
    """Shuffle units with the seed; the first ceil(fraction * n) go to train, the rest to eval"""
    unit = spec.unit
    if manifest.kind == DatasetKind.VIDEO and unit != SplitUnit.SEQUENCE:
        logger.warning(f"{manifest.name}: video datasets split by sequence; ignoring unit '{unit.value}'")
        unit = SplitUnit.SEQUENCE

    samples = manifest.sorted_samples()
    if unit == SplitUnit.SEQUENCE:
        units: List[str] = sorted({s.sequence or s.id for s in samples}, key=natural_key)
    else:
        units = [s.id for s in samples]

    order = np.random.default_rng(spec.seed).permutation(len(units))
    n_train = min(len(units), math.ceil(spec.train_fraction * len(units) - 1e-9))
    assignment: Dict[str, SplitTag] = {}
    for rank, position in enumerate(order):
        assignment[units[position]] = SplitTag.TRAIN if rank < n_train else SplitTag.EVAL

    key = (lambda s: s.sequence or s.id) if unit == SplitUnit.SEQUENCE else (lambda s: s.id)
    tagged = [s.model_copy(update={"split": assignment[key(s)]}) for s in samples]

    n_eval = len(units) - n_train
    logger.info(f"Split {manifest.name}: {n_train} train / {n_eval} eval {unit.value}s (seed {spec.seed})")
    if n_eval == 0:
        logger.warning(f"{manifest.name}: train_fraction {spec.train_fraction} leaves the eval split empty")
    return manifest.with_samples(tagged)
