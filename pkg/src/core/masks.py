"""
Binary masks and the mask arithmetic used by metrics, backends and data export
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import ContractError, DimensionMismatchError
from .geometry import BBox


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """H x W grid over {0, 1}, 1 marking polyp foreground. The array is read-only."""
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ContractError(f"A mask must be a nonempty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ContractError("Mask values must be binary; threshold soft maps before wrapping")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.data))

    @property
    def is_empty(self) -> bool:
        return not self.data.any()

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_box(cls, box: BBox, height: int, width: int) -> "BinaryMask":
        arr = np.zeros((height, width), dtype=bool)
        arr[box.slices()] = True
        return cls(arr)

    def to_uint8(self) -> np.ndarray:
        """8-bit raster with foreground 255"""
        return self.data.astype(np.uint8) * 255

    def union(self, other: "BinaryMask") -> "BinaryMask":
        check_same_shape(self, other)
        return BinaryMask(self.data | other.data)

    def intersect(self, other: "BinaryMask") -> "BinaryMask":
        check_same_shape(self, other)
        return BinaryMask(self.data & other.data)

    def equals(self, other: "BinaryMask") -> bool:
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionCounts":
        """Counts with prediction and ground truth exchanged"""
        return ConfusionCounts(tp=self.tp, fp=self.fn, fn=self.fp, tn=self.tn)


def check_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Incompatible sample: mask shapes {a.shape} and {b.shape} differ")


def bbox_from_mask(mask: BinaryMask) -> Optional[BBox]:
    """Tightest half-open box around the foreground, None for an empty mask"""
    rows = np.flatnonzero(mask.data.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.data.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def mask_confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    """Exact per-pixel confusion counts of a prediction against ground truth"""
    check_same_shape(pred, gt)
    p, g = pred.data, gt.data
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=int(tn))
