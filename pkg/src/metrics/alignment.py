"""
Enhanced-alignment measure, averaged over the threshold sweep
"""

from typing import Optional

import numpy as np

from core.masks import BinaryMask

from .config import MetricConfig
from .overlap import PredictionLike, prediction_map, threshold_confusion


def alignment_from_counts(tp, fp, fn, tn, epsilon: float) -> np.ndarray:
    """Enhanced alignment per binarisation, evaluated once per (pred, gt) pixel combination"""
    tp, fp, fn, tn = (np.asarray(v, dtype=np.float64) for v in (tp, fp, fn, tn))
    n = tp + fp + fn + tn
    pred_mean = (tp + fp) / n
    gt_mean = (tp + fn) / n
    total = np.zeros_like(n)
    for count, p, g in ((tp, 1.0, 1.0), (fp, 1.0, 0.0), (fn, 0.0, 1.0), (tn, 0.0, 0.0)):
        phi_p = p - pred_mean
        phi_g = g - gt_mean
        xi = 2.0 * phi_p * phi_g / np.maximum(phi_p ** 2 + phi_g ** 2, epsilon)
        total += count * (1.0 + xi) ** 2 / 4.0
    return total / n


def e_measure_mean(pred: PredictionLike, gt: BinaryMask, config: Optional[MetricConfig] = None) -> float:
    config = config or MetricConfig()
    tp, fp, fn, tn = threshold_confusion(prediction_map(pred, gt), gt, config.thresholds)
    n = gt.data.size
    fg_ratio = gt.data.mean()
    if fg_ratio == 0:
        scores = 1.0 - (tp + fp) / n
    elif fg_ratio == 1:
        scores = (tp + fp) / n
    else:
        scores = alignment_from_counts(tp, fp, fn, tn, config.epsilon)
    return float(np.clip(scores, 0.0, 1.0).mean())
