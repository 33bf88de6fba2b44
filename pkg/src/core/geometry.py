"""
Pixel-space geometry for the polyp segmentation toolkit
Boxes are half-open integer rectangles [x_min, x_max) x [y_min, y_max), origin top-left
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import ContractError, DegenerateBoxError

# floating noise below this is ignored before rounding outward
_ROUNDING_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if not (0 <= self.x_min < self.x_max and 0 <= self.y_min < self.y_max):
            raise DegenerateBoxError(f"Invalid box {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    def as_list(self) -> List[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "BBox":
        if len(values) != 4:
            raise ContractError(f"A box needs 4 coordinates, got {list(values)}")
        return cls(*values)

    def fits_within(self, height: int, width: int) -> bool:
        return self.x_max <= width and self.y_max <= height

    def slices(self) -> Tuple[slice, slice]:
        """Row and column slices selecting the box interior of an H x W array"""
        return slice(self.y_min, self.y_max), slice(self.x_min, self.x_max)


@dataclass(frozen=True, eq=False)
class Frame:
    """One RGB image of a sample or video sequence"""
    pixels: np.ndarray
    index: int = 0
    key: str = ""

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
            raise ContractError(f"Frame pixels must be H x W x 3, got shape {pixels.shape}")
        if self.index < 0:
            raise ContractError(f"Frame index must be nonnegative, got {self.index}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes by pixel area"""
    inter_w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    inter_h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    return inter / (a.area + b.area - inter)


def box_from_center(cx: float, cy: float, w: float, h: float,
                    height: int, width: int) -> BBox:
    """Box of size w x h centred on (cx, cy), rounded outward and clipped to the image"""
    x_min = max(0, math.floor(cx - w / 2 + _ROUNDING_TOLERANCE))
    y_min = max(0, math.floor(cy - h / 2 + _ROUNDING_TOLERANCE))
    x_max = min(width, math.ceil(cx + w / 2 - _ROUNDING_TOLERANCE))
    y_max = min(height, math.ceil(cy + h / 2 - _ROUNDING_TOLERANCE))
    if x_min >= x_max or y_min >= y_max:
        raise DegenerateBoxError(
            f"Box centred at ({cx:.2f}, {cy:.2f}) with size {w:.2f}x{h:.2f} "
            f"is empty inside a {height}x{width} image"
        )
    return BBox(x_min, y_min, x_max, y_max)


def expand_and_clip(box: BBox, factor: float, height: int, width: int) -> BBox:
    """Scale a box about its centre, round outward and intersect with the image bounds"""
    if not factor > 0:
        raise ContractError(f"Expansion factor must be positive, got {factor}")
    cx, cy = box.center
    return box_from_center(cx, cy, box.width * factor, box.height * factor, height, width)
