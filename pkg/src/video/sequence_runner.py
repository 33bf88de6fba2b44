"""
Sequence runner: picks the prompt frame from detector output, drives a segmenter session,
merges per-object masks and fills frames outside propagation coverage
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from backends.detector import Detector, build_detector
from backends.segmenter import ImageSegmenter
from backends.types import DetectorSpec, Direction, SegmenterSpec
from backends.video import PromptRecord, SegmenterSession, open_session
from core.exceptions import BackendError, ContractError
from core.geometry import BBox, Frame, box_iou
from core.masks import BinaryMask, bbox_from_mask, check_same_shape
from prompt_bridge.bridge import BridgePolicy, PromptSet, detections_to_prompts

logger = logging.getLogger(__name__)

# a corrective prompt reuses an existing object when their boxes overlap at least this much
OBJECT_REUSE_IOU = 0.25


class PromptSelection(str, Enum):
    FIRST_DETECTION = "first_detection"
    FIXED_INDEX = "fixed_index"


class Provenance(str, Enum):
    PROPAGATED = "propagated"
    EMPTY_NO_PROMPT = "empty_no_prompt"
    EMPTY_NO_DETECTION = "empty_no_detection"


class VideoPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    prompt_selection: PromptSelection = PromptSelection.FIRST_DETECTION
    fixed_index: Optional[int] = Field(None, ge=0)
    direction: Direction = Direction.FORWARD
    re_detect_interval: int = Field(0, ge=0)
    re_prompt_iou: float = Field(0.5, ge=0.0, le=1.0)
    detect_all_frames: bool = False

    @model_validator(mode="after")
    def _fixed_index_given(self):
        if self.prompt_selection == PromptSelection.FIXED_INDEX and self.fixed_index is None:
            raise ValueError("prompt_selection fixed_index needs a fixed_index value")
        return self

    @property
    def detection_mode(self) -> str:
        return "all_frames" if self.detect_all_frames else "until_first_hit"


@dataclass
class SequenceRun:
    sequence_id: str
    prompt_frame: Optional[int]
    masks: List[BinaryMask]
    provenance: List[Provenance]
    prompts: List[PromptRecord] = field(default_factory=list)
    detection_mode: str = "until_first_hit"
    detector_calls: int = 0

    def __len__(self) -> int:
        return len(self.masks)

    def provenance_counts(self) -> Dict[str, int]:
        counts = {p.value: 0 for p in Provenance}
        for tag in self.provenance:
            counts[tag.value] += 1
        return counts


def merge_object_masks(masks: Sequence[BinaryMask], height: Optional[int] = None,
                       width: Optional[int] = None) -> BinaryMask:
    """Pixelwise union; an empty list needs the declared dimensions"""
    if not masks:
        if height is None or width is None:
            raise ContractError("Merging no masks requires the frame dimensions")
        return BinaryMask.zeros(height, width)
    merged = masks[0]
    for mask in masks[1:]:
        check_same_shape(merged, mask)
        merged = merged.union(mask)
    if height is not None and merged.shape != (height, width):
        raise ContractError(f"Merged mask {merged.shape} does not match declared {(height, width)}")
    return merged


def select_prompt_frame(per_frame_prompts: Sequence[Optional[PromptSet]], policy: VideoPolicy,
                        n_frames: Optional[int] = None) -> Optional[int]:
    """Index of the frame to prompt, None when first_detection finds nothing"""
    n_frames = len(per_frame_prompts) if n_frames is None else n_frames
    if policy.prompt_selection == PromptSelection.FIXED_INDEX:
        if not 0 <= policy.fixed_index < n_frames:
            raise ContractError(f"fixed_index {policy.fixed_index} is outside a sequence of {n_frames} frames")
        return policy.fixed_index
    for index, prompts in enumerate(per_frame_prompts):
        if prompts is not None and not prompts.empty_flag:
            return index
    return None


class SequenceRunner:
    """Runs one sequence end to end; instances are single-use and not shared between threads"""

    def __init__(self, frames: Sequence[Frame], gt_masks: Optional[Sequence[Optional[BinaryMask]]],
                 detector_spec: DetectorSpec, bridge_policy: BridgePolicy, video_policy: VideoPolicy,
                 backend: Union[SegmenterSpec, ImageSegmenter], sequence_id: str = "",
                 detector: Optional[Detector] = None):
        if not frames:
            raise ContractError(f"Sequence '{sequence_id}' has no frames")
        if gt_masks is not None and len(gt_masks) != len(frames):
            raise ContractError(f"Sequence '{sequence_id}' has {len(frames)} frames but {len(gt_masks)} masks")
        self.frames = list(frames)
        self.height, self.width = self.frames[0].shape
        self.gt_masks = self._fill_negatives(gt_masks)
        self.detector = detector or build_detector(detector_spec)
        self.bridge_policy = bridge_policy
        self.policy = video_policy
        self.backend = backend
        self.sequence_id = sequence_id
        self.detector_calls = 0
        self._prompt_cache: Dict[int, PromptSet] = {}

    def _fill_negatives(self, gt_masks) -> Optional[List[BinaryMask]]:
        if gt_masks is None:
            return None
        return [gt if gt is not None else BinaryMask.zeros(self.height, self.width) for gt in gt_masks]

    def _with_context(self, index: int, action: Callable):
        try:
            return action()
        except BackendError as e:
            raise BackendError(f"Sequence '{self.sequence_id}' frame {index}: {e}") from e

    def prompts_at(self, index: int) -> PromptSet:
        if index not in self._prompt_cache:
            gt = self.gt_masks[index] if self.gt_masks is not None else None
            if self.detector.needs_gt and gt is None:
                raise ContractError(f"Sequence '{self.sequence_id}' needs ground truth for the oracle detector")
            detections = self._with_context(index, lambda: self.detector.detect(self.frames[index], gt))
            self.detector_calls += 1
            self._prompt_cache[index] = detections_to_prompts(detections, self.bridge_policy, index)
        return self._prompt_cache[index]

    def _search_prompt_frame(self) -> Optional[int]:
        if self.policy.prompt_selection == PromptSelection.FIXED_INDEX:
            prompt_frame = select_prompt_frame([], self.policy, len(self.frames))
            if self.policy.detect_all_frames:
                for index in range(len(self.frames)):
                    self.prompts_at(index)
            return prompt_frame

        per_frame: List[Optional[PromptSet]] = []
        for index in range(len(self.frames)):
            per_frame.append(self.prompts_at(index))
            if not per_frame[-1].empty_flag and not self.policy.detect_all_frames:
                break
        return select_prompt_frame(per_frame, self.policy, len(self.frames))

    def _empty_run(self, prompt_frame: Optional[int], provenance: Provenance) -> SequenceRun:
        zeros = BinaryMask.zeros(self.height, self.width)
        return SequenceRun(
            sequence_id=self.sequence_id,
            prompt_frame=prompt_frame,
            masks=[zeros] * len(self.frames),
            provenance=[provenance] * len(self.frames),
            detection_mode=self.policy.detection_mode,
            detector_calls=self.detector_calls,
        )

    def _collect(self, session: SegmenterSession) -> Dict[int, Dict[int, BinaryMask]]:
        per_frame: Dict[int, Dict[int, BinaryMask]] = {}
        for index, object_id, mask in session.propagate(self.gt_masks):
            per_frame.setdefault(index, {})[object_id] = mask
        return per_frame

    def _match_object(self, box: BBox, objects: Dict[int, BinaryMask], next_id: int) -> int:
        best_id, best_iou = None, OBJECT_REUSE_IOU
        for object_id in sorted(objects):
            object_box = bbox_from_mask(objects[object_id])
            if object_box is None:
                continue
            iou = box_iou(box, object_box)
            if iou >= best_iou and (best_id is None or iou > best_iou):
                best_id, best_iou = object_id, iou
        return best_id if best_id is not None else next_id

    def _re_prompt(self, session: SegmenterSession, prompt_frame: int,
                   per_frame: Dict[int, Dict[int, BinaryMask]]) -> Dict[int, Dict[int, BinaryMask]]:
        interval = self.policy.re_detect_interval
        checkpoints = [t for t in session.covered_frames() if t != prompt_frame and (t - prompt_frame) % interval == 0]
        for t in checkpoints:
            objects = per_frame.get(t, {})
            merged = merge_object_masks(list(objects.values()), self.height, self.width)
            current = bbox_from_mask(merged)
            added = False
            for entry in self.prompts_at(t).entries:
                if current is not None and box_iou(entry.box, current) >= self.policy.re_prompt_iou:
                    continue
                next_id = max(session.object_ids()) + 1
                object_id = self._match_object(entry.box, objects, next_id)
                if any(p.frame_index == t and p.object_id == object_id for p in session.prompts):
                    continue
                self._with_context(t, lambda: session.add_box_prompt(t, object_id, entry.box))
                logger.debug(f"Sequence '{self.sequence_id}': corrective prompt at frame {t} for object {object_id}")
                added = True
            if added:
                per_frame = self._with_context(t, lambda: self._collect(session))
        return per_frame

    def run(self) -> SequenceRun:
        prompt_frame = self._search_prompt_frame()
        if prompt_frame is None:
            logger.info(f"Sequence '{self.sequence_id}': no detection in {len(self.frames)} frames")
            return self._empty_run(None, Provenance.EMPTY_NO_DETECTION)

        prompts = self.prompts_at(prompt_frame)
        if prompts.empty_flag:
            logger.info(f"Sequence '{self.sequence_id}': fixed prompt frame {prompt_frame} has no detections")
            return self._empty_run(prompt_frame, Provenance.EMPTY_NO_PROMPT)

        session = self._with_context(prompt_frame, lambda: open_session(
            self.frames, self.backend, self.policy.direction, self.sequence_id, self.gt_masks
        ))
        for entry in prompts.entries:
            self._with_context(prompt_frame, lambda: session.add_box_prompt(prompt_frame, entry.object_id, entry.box))
        per_frame = self._with_context(prompt_frame, lambda: self._collect(session))

        if self.policy.re_detect_interval > 0:
            per_frame = self._re_prompt(session, prompt_frame, per_frame)

        covered = set(session.covered_frames())
        masks, provenance = [], []
        for index in range(len(self.frames)):
            if index in covered:
                objects = per_frame.get(index, {})
                masks.append(merge_object_masks([objects[k] for k in sorted(objects)], self.height, self.width))
                provenance.append(Provenance.PROPAGATED)
            else:
                masks.append(BinaryMask.zeros(self.height, self.width))
                provenance.append(Provenance.EMPTY_NO_PROMPT)

        logger.debug(
            f"Sequence '{self.sequence_id}': prompt frame {prompt_frame}, {len(session.prompts)} prompts, "
            f"{len(covered)}/{len(self.frames)} frames covered"
        )
        return SequenceRun(
            sequence_id=self.sequence_id,
            prompt_frame=prompt_frame,
            masks=masks,
            provenance=provenance,
            prompts=list(session.prompts),
            detection_mode=self.policy.detection_mode,
            detector_calls=self.detector_calls,
        )


def run_sequence(frames: Sequence[Frame], gt_masks: Optional[Sequence[Optional[BinaryMask]]],
                 detector_spec: DetectorSpec, bridge_policy: BridgePolicy, video_policy: VideoPolicy,
                 backend: Union[SegmenterSpec, ImageSegmenter], sequence_id: str = "") -> SequenceRun:
    return SequenceRunner(frames, gt_masks, detector_spec, bridge_policy, video_policy,
                          backend, sequence_id).run()
