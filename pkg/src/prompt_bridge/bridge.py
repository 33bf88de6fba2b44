"""
Prompt bridge: turns raw detections of one frame into the segmenter's box prompts
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from backends.types import Detection, detection_sort_key
from core.exceptions import ContractError
from core.geometry import BBox, box_iou
from core.masks import BinaryMask

logger = logging.getLogger(__name__)


class EmptyPolicy(str, Enum):
    EMPTY_MASK = "empty_mask"


class BridgePolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    conf_threshold: float = Field(0.25, ge=0.0, le=1.0)
    nms_iou: float = Field(0.5, ge=0.0, le=1.0)
    max_prompts: int = Field(5, ge=1)
    empty_policy: EmptyPolicy = EmptyPolicy.EMPTY_MASK


@dataclass(frozen=True)
class PromptEntry:
    object_id: int
    box: BBox
    confidence: float = 1.0


@dataclass(frozen=True)
class PromptSet:
    frame_index: int
    entries: Tuple[PromptEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [entry.object_id for entry in self.entries]
        if ids != list(range(1, len(ids) + 1)):
            raise ContractError(f"Prompt object ids must be 1..n in order, got {ids}")

    @property
    def empty_flag(self) -> bool:
        return not self.entries

    @property
    def boxes(self) -> List[BBox]:
        return [entry.box for entry in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[Detection]:
    """Greedy non-maximum suppression; a threshold of 1 keeps every detection"""
    ordered = sorted(dets, key=detection_sort_key)
    if iou_threshold >= 1.0:
        return ordered
    kept: List[Detection] = []
    for det in ordered:
        if all(box_iou(det.box, k.box) < iou_threshold for k in kept):
            kept.append(det)
    return kept


def detections_to_prompts(dets: Sequence[Detection], policy: BridgePolicy,
                          frame_index: int = 0) -> PromptSet:
    confident = [det for det in dets if det.confidence >= policy.conf_threshold]
    survivors = nms(confident, policy.nms_iou)[:policy.max_prompts]
    if len(dets) != len(survivors):
        logger.debug(
            f"Frame {frame_index}: {len(dets)} detections, {len(confident)} above "
            f"{policy.conf_threshold}, {len(survivors)} prompts"
        )
    entries = tuple(PromptEntry(i, det.box, det.confidence) for i, det in enumerate(survivors, start=1))
    return PromptSet(frame_index=frame_index, entries=entries)


def resolve_empty(prompt_set: PromptSet, height: int, width: int) -> BinaryMask:
    """Prediction for a frame without prompts under the empty_mask policy"""
    if not prompt_set.empty_flag:
        raise ContractError(f"resolve_empty called on frame {prompt_set.frame_index} with {len(prompt_set)} prompts")
    return BinaryMask.zeros(height, width)
