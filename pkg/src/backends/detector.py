"""
Detectors: the ground-truth oracle (optionally jittered) and the external adapter detector
"""

import logging
import zlib
from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from core.components import connected_components
from core.exceptions import BackendError, ContractError, DegenerateBoxError, DimensionMismatchError
from core.geometry import BBox, Frame, box_from_center
from core.masks import BinaryMask
from core.raster_io import encode_frame

from .adapter import AdapterClient, DetectReply, parse_reply, shared_client
from .types import Detection, DetectorKind, DetectorSpec, POLYP_CLASS_ID, detection_sort_key

logger = logging.getLogger(__name__)

SPURIOUS_SIDE_RANGE = (0.1, 0.3)
SPURIOUS_CONFIDENCE_RANGE = (0.3, 0.7)


class Detector(ABC):
    needs_gt = False

    def __init__(self, spec: DetectorSpec):
        self.spec = spec

    @abstractmethod
    def detect(self, frame: Frame, gt: Optional[BinaryMask] = None) -> List[Detection]:
        ...


class OracleDetector(Detector):
    """One detection per ground-truth component, perturbed by the jitter model"""
    needs_gt = True

    def detect(self, frame: Frame, gt: Optional[BinaryMask] = None) -> List[Detection]:
        if gt is None:
            raise ContractError("The oracle detector requires a ground-truth mask")
        if gt.shape != frame.shape:
            raise DimensionMismatchError(f"Ground truth {gt.shape} does not match frame {frame.shape}")

        components = connected_components(gt, min_area=self.spec.min_component_px)
        detections = [Detection(c.box, 1.0, POLYP_CLASS_ID) for c in components]
        if not self.spec.jitter.is_zero:
            detections = self._perturb(detections, frame)
        return sorted(detections, key=detection_sort_key)

    def _rng(self, frame: Frame) -> np.random.Generator:
        seed = self.spec.seed if self.spec.seed is not None else 0
        return np.random.default_rng([seed, frame.index, zlib.crc32(frame.key.encode("utf-8"))])

    def _perturb(self, detections: List[Detection], frame: Frame) -> List[Detection]:
        jitter = self.spec.jitter
        rng = self._rng(frame)
        height, width = frame.shape
        perturbed = []

        for det in detections:
            # draw every number even for dropped boxes so streams stay aligned
            shift_x, shift_y, scale_w, scale_h = rng.uniform(-1.0, 1.0, size=4)
            dropped = rng.random() < jitter.drop_prob
            if dropped:
                continue
            cx, cy = det.box.center
            cx += shift_x * jitter.shift_frac * det.box.width
            cy += shift_y * jitter.shift_frac * det.box.height
            w = det.box.width * (1.0 + scale_w * jitter.scale_frac)
            h = det.box.height * (1.0 + scale_h * jitter.scale_frac)
            try:
                box = box_from_center(cx, cy, w, h, height, width)
            except DegenerateBoxError:
                logger.debug(f"Jittered box left frame {frame.key or frame.index}; dropped")
                continue
            perturbed.append(Detection(box, det.confidence, det.class_id))

        if rng.random() < jitter.spurious_prob:
            perturbed.append(self._spurious(rng, height, width))
        return perturbed

    @staticmethod
    def _spurious(rng: np.random.Generator, height: int, width: int) -> Detection:
        frac = rng.uniform(*SPURIOUS_SIDE_RANGE)
        w = max(1, int(round(frac * width)))
        h = max(1, int(round(frac * height)))
        x0 = int(rng.integers(0, width - w + 1))
        y0 = int(rng.integers(0, height - h + 1))
        confidence = float(rng.uniform(*SPURIOUS_CONFIDENCE_RANGE))
        return Detection(BBox(x0, y0, x0 + w, y0 + h), confidence, POLYP_CLASS_ID)


class ExternalDetector(Detector):
    """Detector served by an adapter process (e.g. a fine-tuned YOLO model)"""

    def __init__(self, spec: DetectorSpec, client: Optional[AdapterClient] = None):
        super().__init__(spec)
        self.client = client or shared_client(spec.address)

    def detect(self, frame: Frame, gt: Optional[BinaryMask] = None) -> List[Detection]:
        reply = self.client.request({
            "op": "detect",
            "image": encode_frame(frame),
            "input_size": self.spec.input_size,
        })
        parsed = parse_reply(DetectReply, reply, "detect")
        detections = []
        for item in parsed.detections:
            try:
                box = BBox.from_list(item.box)
            except ContractError as e:
                raise BackendError(f"Adapter returned an invalid box {item.box}: {e}") from e
            if not box.fits_within(frame.height, frame.width):
                raise BackendError(f"Adapter box {item.box} exceeds frame {frame.shape}")
            detections.append(Detection(box, item.conf, item.cls))
        return sorted(detections, key=detection_sort_key)


def build_detector(spec: DetectorSpec, client: Optional[AdapterClient] = None) -> Detector:
    if spec.kind == DetectorKind.ORACLE:
        return OracleDetector(spec)
    return ExternalDetector(spec, client)


def detect(frame: Frame, spec: DetectorSpec, gt: Optional[BinaryMask] = None,
           client: Optional[AdapterClient] = None) -> List[Detection]:
    """Detections for one frame, sorted by descending confidence"""
    return build_detector(spec, client).detect(frame, gt)
