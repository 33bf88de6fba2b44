"""
Structure measure: object-aware and region-aware similarity between a prediction and ground truth
"""

import math
from typing import Optional, Tuple

import numpy as np

from core.masks import BinaryMask

from .config import MetricConfig
from .overlap import PredictionLike, prediction_map


def _clamp(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


def _object_score(values: np.ndarray) -> float:
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * mean / (mean * mean + 1.0 + std)


def object_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    fg_ratio = float(gt.mean())
    fg = _object_score(pred[gt])
    bg = _object_score(1.0 - pred[~gt])
    return fg_ratio * fg + (1.0 - fg_ratio) * bg


def split_point(gt: np.ndarray) -> Tuple[int, int]:
    """(column, row) split of the four blocks: rounded foreground centroid, one-based"""
    rows, cols = np.nonzero(gt)
    x = math.floor(cols.sum() / cols.size + 0.5) + 1
    y = math.floor(rows.sum() / rows.size + 0.5) + 1
    return x, y


def block_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    gt = gt.astype(np.float64)
    x, y = pred.mean(), gt.mean()
    denom = max(n - 1, 1)
    var_x = ((pred - x) ** 2).sum() / denom
    var_y = ((gt - y) ** 2).sum() / denom
    cov = ((pred - x) * (gt - y)).sum() / denom

    alpha = 4.0 * x * y * cov
    beta = (x * x + y * y) * (var_x + var_y)
    if alpha != 0:
        return float(alpha / beta)
    if beta == 0:
        return 1.0
    return 0.0


def region_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    height, width = gt.shape
    x, y = split_point(gt)
    area = height * width
    blocks = [
        ((slice(0, y), slice(0, x)), x * y),
        ((slice(0, y), slice(x, width)), (width - x) * y),
        ((slice(y, height), slice(0, x)), x * (height - y)),
        ((slice(y, height), slice(x, width)), (width - x) * (height - y)),
    ]
    score = 0.0
    for window, size in blocks:
        if size == 0:
            continue
        score += size / area * block_similarity(pred[window], gt[window])
    return score


def s_measure(pred: PredictionLike, gt: BinaryMask, config: Optional[MetricConfig] = None) -> float:
    config = config or MetricConfig()
    x = prediction_map(pred, gt)
    g = gt.data
    fg_ratio = g.mean()
    if fg_ratio == 0:
        return _clamp(1.0 - x.mean())
    if fg_ratio == 1:
        return _clamp(x.mean())
    score = config.alpha * object_similarity(x, g) + (1.0 - config.alpha) * region_similarity(x, g)
    return _clamp(score)
