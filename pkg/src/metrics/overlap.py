"""
Overlap measures: IoU, Dice, precision, recall, F-measures and the threshold sweep they share
"""

from typing import Optional, Tuple, Union

import numpy as np

from core.exceptions import ContractError, DimensionMismatchError
from core.masks import BinaryMask, check_same_shape, mask_confusion

from .config import F2_BETA_SQ, MetricConfig

PredictionLike = Union[BinaryMask, np.ndarray]


def prediction_map(pred: PredictionLike, gt: BinaryMask) -> np.ndarray:
    """Float map in [0, 1] with the ground-truth shape; soft maps only enter through sweeps"""
    if isinstance(pred, BinaryMask):
        check_same_shape(pred, gt)
        return pred.data.astype(np.float64)
    arr = np.asarray(pred, dtype=np.float64)
    if arr.shape != gt.shape:
        raise DimensionMismatchError(f"Incompatible sample: prediction {arr.shape} and ground truth {gt.shape}")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise ContractError("Soft predictions must lie in [0, 1]")
    return arr


def is_binary_map(arr: np.ndarray) -> bool:
    return bool(np.isin(arr, (0.0, 1.0)).all())


def threshold_confusion(pred_map: np.ndarray, gt: BinaryMask,
                        thresholds: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(tp, fp, fn, tn) per binarisation pred >= k/thresholds, k = 1..thresholds

    A binary map binarises to itself at every level, so it yields a single row.
    """
    fg_values = pred_map[gt.data]
    bg_values = pred_map[~gt.data]
    if is_binary_map(pred_map):
        tp = np.array([np.count_nonzero(fg_values)])
        fp = np.array([np.count_nonzero(bg_values)])
    else:
        levels = np.arange(1, thresholds + 1) / thresholds
        tp = fg_values.size - np.searchsorted(np.sort(fg_values), levels, side="left")
        fp = bg_values.size - np.searchsorted(np.sort(bg_values), levels, side="left")
    return tp, fp, fg_values.size - tp, bg_values.size - fp


def prf_from_counts(tp, fp, fn, beta_sq: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised precision, recall and F_beta; zero denominators give 0 except when both masks are empty"""
    tp, fp, fn = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        denom = beta_sq * precision + recall
        f = np.where(denom > 0, (1.0 + beta_sq) * precision * recall / denom, 0.0)
    both_empty = (tp + fp + fn) == 0
    precision[both_empty] = recall[both_empty] = f[both_empty] = 1.0
    return precision, recall, f


def iou_dice(pred: BinaryMask, gt: BinaryMask) -> Tuple[float, float]:
    counts = mask_confusion(pred, gt)
    union = counts.tp + counts.fp + counts.fn
    if union == 0:
        return 1.0, 1.0
    return counts.tp / union, 2 * counts.tp / (2 * counts.tp + counts.fp + counts.fn)


def precision_recall_f(pred: BinaryMask, gt: BinaryMask,
                       beta_sq: float = F2_BETA_SQ) -> Tuple[float, float, float]:
    counts = mask_confusion(pred, gt)
    precision, recall, f = prf_from_counts(counts.tp, counts.fp, counts.fn, beta_sq)
    return float(precision[0]), float(recall[0]), float(f[0])


def f_measure_mean(pred: PredictionLike, gt: BinaryMask, config: Optional[MetricConfig] = None) -> float:
    """Mean F_beta over the threshold sweep"""
    config = config or MetricConfig()
    tp, fp, fn, _ = threshold_confusion(prediction_map(pred, gt), gt, config.thresholds)
    _, _, f = prf_from_counts(tp, fp, fn, config.beta_sq)
    return float(f.mean())
