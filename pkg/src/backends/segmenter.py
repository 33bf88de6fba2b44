"""
Box-prompted image segmenters: deterministic mocks and the external adapter segmenter
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Union

import numpy as np

from core.exceptions import BackendError, ContractError, DimensionMismatchError
from core.geometry import BBox, Frame
from core.masks import BinaryMask
from core.raster_io import decode_mask, encode_frame

from .adapter import AdapterClient, SegmentReply, parse_reply, shared_client
from .types import SegmenterKind, SegmenterSpec

logger = logging.getLogger(__name__)


def check_boxes_in_frame(boxes: Sequence[BBox], height: int, width: int) -> None:
    for box in boxes:
        if not box.fits_within(height, width):
            raise ContractError(f"Box {box.as_list()} lies outside a {height}x{width} frame")


class ImageSegmenter(ABC):
    kind: SegmenterKind
    needs_gt = False

    def segment(self, frame: Frame, boxes: Sequence[BBox],
                gt: Optional[BinaryMask] = None) -> List[BinaryMask]:
        """One mask per box, in input order"""
        if not boxes:
            return []
        check_boxes_in_frame(boxes, frame.height, frame.width)
        if self.needs_gt:
            if gt is None:
                raise ContractError(f"The {self.kind.value} segmenter requires a ground-truth mask")
            if gt.shape != frame.shape:
                raise DimensionMismatchError(f"Ground truth {gt.shape} does not match frame {frame.shape}")
        return [self.segment_box(box, frame.height, frame.width, gt) for box in boxes]

    @abstractmethod
    def segment_box(self, box: BBox, height: int, width: int,
                    gt: Optional[BinaryMask] = None) -> BinaryMask:
        """Mask for a single box region, used by image and mock video sessions alike"""


class BoxFillSegmenter(ImageSegmenter):
    kind = SegmenterKind.BOX_FILL

    def segment_box(self, box, height, width, gt=None):
        return BinaryMask.from_box(box, height, width)


class GtIntersectSegmenter(ImageSegmenter):
    """Oracle segmenter: ground truth restricted to the box interior"""
    kind = SegmenterKind.GT_INTERSECT
    needs_gt = True

    def segment_box(self, box, height, width, gt=None):
        if gt is None:
            raise ContractError("The gt_intersect segmenter requires a ground-truth mask")
        arr = np.zeros((height, width), dtype=bool)
        rows, cols = box.slices()
        arr[rows, cols] = gt.data[rows, cols]
        return BinaryMask(arr)


class InscribedEllipseSegmenter(ImageSegmenter):
    kind = SegmenterKind.INSCRIBED_ELLIPSE

    def segment_box(self, box, height, width, gt=None):
        return BinaryMask(inscribed_ellipse(box, height, width))


def inscribed_ellipse(box: BBox, height: int, width: int) -> np.ndarray:
    """Filled axis-aligned ellipse inscribed in the box, sampled at pixel centres"""
    arr = np.zeros((height, width), dtype=bool)
    cx, cy = box.center
    a, b = box.width / 2, box.height / 2
    ys = np.arange(box.y_min, box.y_max)[:, None] + 0.5
    xs = np.arange(box.x_min, box.x_max)[None, :] + 0.5
    arr[box.slices()] = ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1.0
    return arr


class ExternalSegmenter(ImageSegmenter):
    """Segmenter served by an adapter process (e.g. a frozen SAM 2 model)"""
    kind = SegmenterKind.EXTERNAL

    def __init__(self, spec: SegmenterSpec, client: Optional[AdapterClient] = None):
        self.spec = spec
        self.client = client or shared_client(spec.address)

    def segment(self, frame, boxes, gt=None):
        if not boxes:
            return []
        check_boxes_in_frame(boxes, frame.height, frame.width)
        reply = self.client.request({
            "op": "segment",
            "image": encode_frame(frame),
            "boxes": [box.as_list() for box in boxes],
            "batch_size": self.spec.batch_size,
        })
        parsed = parse_reply(SegmentReply, reply, "segment")
        if len(parsed.masks) != len(boxes):
            raise BackendError(f"Adapter returned {len(parsed.masks)} masks for {len(boxes)} boxes")
        masks = [decode_mask(payload) for payload in parsed.masks]
        for mask in masks:
            if mask.shape != frame.shape:
                raise BackendError(f"Adapter mask {mask.shape} does not match frame {frame.shape}")
        return masks

    def segment_box(self, box, height, width, gt=None):
        raise BackendError("External segmenters only accept whole-frame requests")


_MOCKS = {
    SegmenterKind.BOX_FILL: BoxFillSegmenter,
    SegmenterKind.GT_INTERSECT: GtIntersectSegmenter,
    SegmenterKind.INSCRIBED_ELLIPSE: InscribedEllipseSegmenter,
}


def build_segmenter(spec: SegmenterSpec, client: Optional[AdapterClient] = None) -> ImageSegmenter:
    if spec.kind == SegmenterKind.EXTERNAL:
        return ExternalSegmenter(spec, client)
    return _MOCKS[spec.kind]()


def segment_image(frame: Frame, boxes: Sequence[BBox],
                  backend: Union[SegmenterSpec, ImageSegmenter, str],
                  gt: Optional[BinaryMask] = None) -> List[BinaryMask]:
    """Segment every box prompt of one frame with the chosen backend"""
    if isinstance(backend, str):
        backend = SegmenterSpec.from_choice(backend)
    segmenter = backend if isinstance(backend, ImageSegmenter) else build_segmenter(backend)
    return segmenter.segment(frame, boxes, gt)
