"""
Self-prompting image pipeline: detect, bridge, segment and merge one frame
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from backends.adapter import AdapterClient
from backends.detector import build_detector
from backends.segmenter import build_segmenter
from backends.types import DetectorSpec, SegmenterSpec
from core.geometry import BBox, Frame, expand_and_clip
from core.masks import BinaryMask
from prompt_bridge.bridge import BridgePolicy, PromptSet, detections_to_prompts, resolve_empty
from video.sequence_runner import merge_object_masks

logger = logging.getLogger(__name__)

SEGMENTED = "segmented"
EMPTY_NO_DETECTION = "empty_no_detection"


@dataclass
class FrameResult:
    mask: BinaryMask
    prompts: PromptSet
    provenance: str
    timing_ms: Dict[str, float] = field(default_factory=dict)


class SelfPromptingPipeline:
    def __init__(self, detector_spec: DetectorSpec, segmenter_spec: SegmenterSpec,
                 bridge_policy: Optional[BridgePolicy] = None, prompt_scale: float = 1.0,
                 client: Optional[AdapterClient] = None):
        """Initialize the detector and segmenter once for a whole run"""
        self.detector = build_detector(detector_spec, client)
        self.segmenter = build_segmenter(segmenter_spec, client)
        self.bridge_policy = bridge_policy or BridgePolicy()
        self.prompt_scale = prompt_scale
        logger.info(
            f"Pipeline ready: {detector_spec.kind.value} detector, {segmenter_spec.kind.value} segmenter, "
            f"prompt scale {prompt_scale}"
        )

    @property
    def needs_gt(self) -> bool:
        return self.detector.needs_gt or self.segmenter.needs_gt

    def _scaled(self, boxes: List[BBox], frame: Frame) -> List[BBox]:
        if self.prompt_scale == 1.0:
            return boxes
        return [expand_and_clip(box, self.prompt_scale, frame.height, frame.width) for box in boxes]

    def segment_frame(self, frame: Frame, gt: Optional[BinaryMask] = None) -> FrameResult:
        timing: Dict[str, float] = {}

        start = time.perf_counter()
        detections = self.detector.detect(frame, gt)
        timing["detect"] = (time.perf_counter() - start) * 1000

        start = time.perf_counter()
        prompts = detections_to_prompts(detections, self.bridge_policy, frame.index)
        timing["bridge"] = (time.perf_counter() - start) * 1000

        if prompts.empty_flag:
            return FrameResult(resolve_empty(prompts, frame.height, frame.width), prompts, EMPTY_NO_DETECTION, timing)

        start = time.perf_counter()
        masks = self.segmenter.segment(frame, self._scaled(prompts.boxes, frame), gt)
        timing["segment"] = (time.perf_counter() - start) * 1000

        start = time.perf_counter()
        merged = merge_object_masks(masks, frame.height, frame.width)
        timing["merge"] = (time.perf_counter() - start) * 1000
        return FrameResult(merged, prompts, SEGMENTED, timing)
