"""
Metric configuration and the per-frame metric vector
"""

from dataclasses import asdict, dataclass
from typing import Dict

from pydantic import BaseModel, ConfigDict, Field

# recall-weighted F reported next to precision and recall
F2_BETA_SQ = 4.0

# per-frame field -> aggregate column name used in reports
AGGREGATE_NAMES = {
    "iou": "mIoU",
    "dice": "mDice",
    "precision": "Precision",
    "recall": "Recall",
    "f2": "F2",
    "sen": "Sen",
    "s_alpha": "S_alpha",
    "e_phi_mn": "E_phi_mn",
    "f_beta_mn": "F_beta_mn",
}


class MetricConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(0.5, ge=0.0, le=1.0)
    beta_sq: float = Field(0.3, gt=0.0)
    thresholds: int = Field(256, ge=1)
    epsilon: float = Field(1e-8, gt=0.0)


@dataclass(frozen=True)
class FrameMetrics:
    iou: float
    dice: float
    precision: float
    recall: float
    f2: float
    sen: float
    s_alpha: float
    e_phi_mn: float
    f_beta_mn: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def conventions(config: MetricConfig) -> Dict[str, object]:
    """Metric conventions recorded alongside every aggregate"""
    return {
        "both_empty": "iou, dice, precision, recall and F are 1.0 when prediction and ground truth are both empty",
        "beta_sq_f_beta_mn": config.beta_sq,
        "beta_sq_f2": F2_BETA_SQ,
        "alpha": config.alpha,
        "thresholds": config.thresholds,
        "epsilon": config.epsilon,
        "f_beta_mn_variant": "mean over threshold binarizations, not the weighted F-measure",
        "averaging": "per-image means; video datasets average sequence means",
    }
