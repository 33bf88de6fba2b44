"""
Stateful video segmentation sessions: prompt-then-propagate over one sequence
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from core.exceptions import BackendError, ContractError
from core.geometry import BBox, Frame, expand_and_clip
from core.masks import BinaryMask
from core.raster_io import decode_mask, encode_frame

from .adapter import AdapterClient, VideoRecord, parse_reply, shared_client
from .segmenter import ImageSegmenter, build_segmenter
from .types import Direction, SegmenterKind, SegmenterSpec

logger = logging.getLogger(__name__)

# mock tracking region: prompt box grown by this factor per elapsed frame, up to the cap
TRACKING_GROWTH_PER_FRAME = 1.1
TRACKING_GROWTH_CAP = 2.0

PropagatedMask = Tuple[int, int, BinaryMask]


@dataclass(frozen=True)
class PromptRecord:
    frame_index: int
    object_id: int
    box: BBox


class SegmenterSession(ABC):
    """Single-owner handle on one sequence; calls must be sequential"""

    def __init__(self, frames: Sequence[Frame], direction: Direction = Direction.FORWARD,
                 sequence_id: str = ""):
        if not frames:
            raise ContractError(f"Cannot open a session on an empty sequence '{sequence_id}'")
        self.frames = list(frames)
        self.direction = Direction(direction)
        self.sequence_id = sequence_id
        self.prompts: List[PromptRecord] = []
        self.height, self.width = self.frames[0].shape

    def __len__(self) -> int:
        return len(self.frames)

    def add_box_prompt(self, frame_index: int, object_id: int, box: BBox) -> "SegmenterSession":
        if not 0 <= frame_index < len(self.frames):
            raise ContractError(
                f"Prompt frame {frame_index} is outside sequence '{self.sequence_id}' of {len(self.frames)} frames"
            )
        if any(p.frame_index == frame_index and p.object_id == object_id for p in self.prompts):
            raise ContractError(f"Object {object_id} is already prompted at frame {frame_index}")
        if not box.fits_within(self.height, self.width):
            raise ContractError(f"Prompt box {box.as_list()} lies outside the {self.height}x{self.width} frames")
        record = PromptRecord(frame_index, object_id, box)
        self._on_prompt(record)
        self.prompts.append(record)
        return self

    def object_ids(self) -> List[int]:
        return sorted({p.object_id for p in self.prompts})

    def covered_frames(self) -> range:
        """Frames that propagation yields masks for"""
        if not self.prompts:
            return range(0)
        if self.direction == Direction.BIDIRECTIONAL:
            return range(len(self.frames))
        return range(min(p.frame_index for p in self.prompts), len(self.frames))

    def propagate(self, gt_per_frame: Optional[Sequence[Optional[BinaryMask]]] = None) -> Iterator[PropagatedMask]:
        """(frame_index, object_id, mask) for every covered frame and prompted object, in frame order"""
        if not self.prompts:
            raise ContractError(f"Session '{self.sequence_id}' has no prompts to propagate")
        if gt_per_frame is not None and len(gt_per_frame) != len(self.frames):
            raise ContractError(f"Got {len(gt_per_frame)} ground-truth masks for {len(self.frames)} frames")
        return self._propagate(gt_per_frame)

    def _on_prompt(self, record: PromptRecord) -> None:
        pass

    @abstractmethod
    def _propagate(self, gt_per_frame) -> Iterator[PropagatedMask]:
        ...


class MockVideoSession(SegmenterSession):
    """Propagates each prompt box as a growing tracking region segmented by a mock image segmenter"""

    def __init__(self, frames: Sequence[Frame], segmenter: ImageSegmenter,
                 direction: Direction = Direction.FORWARD, sequence_id: str = "",
                 gt_per_frame: Optional[Sequence[Optional[BinaryMask]]] = None):
        super().__init__(frames, direction, sequence_id)
        self.segmenter = segmenter
        self.gt_per_frame = list(gt_per_frame) if gt_per_frame is not None else None
        self._references: Dict[Tuple[int, int], BinaryMask] = {}

    def _gt_at(self, gts, index: int) -> Optional[BinaryMask]:
        if gts is None:
            if self.segmenter.needs_gt:
                raise ContractError(f"The {self.segmenter.kind.value} session needs ground truth per frame")
            return None
        gt = gts[index]
        if gt is None and self.segmenter.needs_gt:
            return BinaryMask.zeros(self.height, self.width)
        return gt

    def _on_prompt(self, record: PromptRecord) -> None:
        # bind the reference mask only when ground truth is already known
        if self.segmenter.needs_gt and self.gt_per_frame is None:
            return
        gt = self._gt_at(self.gt_per_frame, record.frame_index)
        self._references[(record.frame_index, record.object_id)] = self.segmenter.segment_box(
            record.box, self.height, self.width, gt
        )

    def reference_prompt(self, object_id: int, frame_index: int) -> Optional[PromptRecord]:
        """Nearest prompt of the object driving the given frame, None if the frame is not covered"""
        candidates = [p for p in self.prompts if p.object_id == object_id]
        if self.direction == Direction.FORWARD:
            candidates = [p for p in candidates if p.frame_index <= frame_index]
        if not candidates:
            return None
        return min(candidates, key=lambda p: (abs(frame_index - p.frame_index), -p.frame_index))

    def tracking_region(self, prompt: PromptRecord, frame_index: int) -> BBox:
        elapsed = abs(frame_index - prompt.frame_index)
        factor = min(TRACKING_GROWTH_PER_FRAME ** elapsed, TRACKING_GROWTH_CAP)
        return expand_and_clip(prompt.box, factor, self.height, self.width)

    def _propagate(self, gt_per_frame) -> Iterator[PropagatedMask]:
        gts = gt_per_frame if gt_per_frame is not None else self.gt_per_frame
        objects = self.object_ids()
        for index in self.covered_frames():
            gt = None
            for object_id in objects:
                prompt = self.reference_prompt(object_id, index)
                if prompt is None:
                    continue
                if gt is None:
                    gt = self._gt_at(gts, index)
                if prompt.frame_index == index and gt_per_frame is None and (index, object_id) in self._references:
                    mask = self._references[(index, object_id)]
                else:
                    region = self.tracking_region(prompt, index)
                    mask = self.segmenter.segment_box(region, self.height, self.width, gt)
                yield index, object_id, mask


class ExternalVideoSession(SegmenterSession):
    """Session whose memory lives in an adapter process (e.g. a SAM 2 video predictor)"""

    def __init__(self, frames: Sequence[Frame], client: AdapterClient,
                 direction: Direction = Direction.FORWARD, sequence_id: str = "", batch_size: int = 64):
        super().__init__(frames, direction, sequence_id)
        self.client = client
        self.client.request({
            "op": "video_init",
            "frames": [encode_frame(frame) for frame in self.frames],
            "direction": self.direction.value,
            "batch_size": batch_size,
        })

    def _on_prompt(self, record: PromptRecord) -> None:
        self.client.request({
            "op": "video_prompt",
            "frame": record.frame_index,
            "obj": record.object_id,
            "box": record.box.as_list(),
        })

    def _propagate(self, gt_per_frame) -> Iterator[PropagatedMask]:
        covered = set(self.covered_frames())
        seen = set()
        records = [parse_reply(VideoRecord, raw, "video_propagate")
                   for raw in self.client.stream({"op": "video_propagate"})]
        for record in sorted(records, key=lambda r: (r.frame, r.obj)):
            if record.frame not in covered:
                raise BackendError(f"Adapter propagated to uncovered frame {record.frame}")
            if (record.frame, record.obj) in seen:
                raise BackendError(f"Adapter sent frame {record.frame} object {record.obj} twice")
            seen.add((record.frame, record.obj))
            mask = decode_mask(record.mask)
            if mask.shape != (self.height, self.width):
                raise BackendError(f"Adapter mask {mask.shape} does not match frames {(self.height, self.width)}")
            yield record.frame, record.obj, mask


def open_session(sequence: Sequence[Frame], backend: Union[SegmenterSpec, ImageSegmenter],
                 direction: Direction = Direction.FORWARD, sequence_id: str = "",
                 gt_per_frame: Optional[Sequence[Optional[BinaryMask]]] = None,
                 client: Optional[AdapterClient] = None) -> SegmenterSession:
    """Open a prompt-free session over an ordered, nonempty sequence"""
    if isinstance(backend, SegmenterSpec) and backend.kind == SegmenterKind.EXTERNAL:
        return ExternalVideoSession(sequence, client or shared_client(backend.address),
                                    direction, sequence_id, backend.batch_size)
    segmenter = backend if isinstance(backend, ImageSegmenter) else build_segmenter(backend)
    if segmenter.kind == SegmenterKind.EXTERNAL:
        return ExternalVideoSession(sequence, segmenter.client, direction, sequence_id, segmenter.spec.batch_size)
    return MockVideoSession(sequence, segmenter, direction, sequence_id, gt_per_frame)


def add_box_prompt(session: SegmenterSession, frame_index: int, object_id: int, box: BBox) -> SegmenterSession:
    return session.add_box_prompt(frame_index, object_id, box)


def propagate(session: SegmenterSession,
              gt_per_frame: Optional[Sequence[Optional[BinaryMask]]] = None) -> Iterator[PropagatedMask]:
    return session.propagate(gt_per_frame)
