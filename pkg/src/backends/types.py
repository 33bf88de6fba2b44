"""
Detector and segmenter contracts: detections plus detector and segmenter settings
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from core.exceptions import ConfigError, ContractError
from core.geometry import BBox

POLYP_CLASS_ID = 0


@dataclass(frozen=True)
class Detection:
    box: BBox
    confidence: float
    class_id: int = POLYP_CLASS_ID

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractError(f"Detection confidence must lie in [0, 1], got {self.confidence}")


def detection_sort_key(det: Detection) -> Tuple[float, int, int, int]:
    """Descending confidence, then smaller area, smaller x_min, smaller y_min"""
    return (-det.confidence, det.box.area, det.box.x_min, det.box.y_min)


class DetectorKind(str, Enum):
    ORACLE = "oracle"
    EXTERNAL = "external"


class SegmenterKind(str, Enum):
    BOX_FILL = "box_fill"
    GT_INTERSECT = "gt_intersect"
    INSCRIBED_ELLIPSE = "inscribed_ellipse"
    EXTERNAL = "external"


class Direction(str, Enum):
    FORWARD = "forward"
    BIDIRECTIONAL = "bidirectional"


class JitterSpec(BaseModel):
    """Perturbation of oracle detections: centre shift, side scaling, drops and spurious boxes"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    shift_frac: float = Field(0.0, ge=0.0, le=1.0)
    scale_frac: float = Field(0.0, ge=0.0, lt=1.0)
    drop_prob: float = Field(0.0, ge=0.0, le=1.0)
    spurious_prob: float = Field(0.0, ge=0.0, le=1.0)

    @property
    def is_zero(self) -> bool:
        return not (self.shift_frac or self.scale_frac or self.drop_prob or self.spurious_prob)


class DetectorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: DetectorKind = DetectorKind.ORACLE
    jitter: JitterSpec = Field(default_factory=JitterSpec)
    seed: Optional[int] = None
    input_size: int = Field(680, gt=0)
    min_component_px: int = Field(16, ge=0)
    address: Optional[str] = None


class SegmenterSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: SegmenterKind = SegmenterKind.GT_INTERSECT
    address: Optional[str] = None
    batch_size: int = Field(64, ge=1)

    @classmethod
    def from_choice(cls, choice: str, batch_size: int = 64) -> "SegmenterSpec":
        """Parse a --backend value (oracle | box_fill | gt_intersect | ellipse | external:ADDR)"""
        if choice.startswith("external:"):
            address = choice[len("external:"):]
            if not address:
                raise ConfigError("external backend needs an address, e.g. external:tcp://localhost:5555")
            return cls(kind=SegmenterKind.EXTERNAL, address=address, batch_size=batch_size)
        aliases = {
            "oracle": SegmenterKind.GT_INTERSECT,
            "gt_intersect": SegmenterKind.GT_INTERSECT,
            "box_fill": SegmenterKind.BOX_FILL,
            "ellipse": SegmenterKind.INSCRIBED_ELLIPSE,
            "inscribed_ellipse": SegmenterKind.INSCRIBED_ELLIPSE,
        }
        if choice not in aliases:
            raise ConfigError(f"Unknown backend '{choice}'")
        return cls(kind=aliases[choice], batch_size=batch_size)
