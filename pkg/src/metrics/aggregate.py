"""
Per-frame metric vectors and dataset aggregation (flat or by sequence)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from core.exceptions import ContractError
from core.masks import BinaryMask

from .alignment import e_measure_mean
from .config import AGGREGATE_NAMES, F2_BETA_SQ, FrameMetrics, MetricConfig, conventions
from .overlap import PredictionLike, f_measure_mean, iou_dice, precision_recall_f
from .structure import s_measure

logger = logging.getLogger(__name__)

METRIC_FIELDS = list(AGGREGATE_NAMES)


class Grouping(str, Enum):
    FLAT = "flat"
    BY_SEQUENCE = "by_sequence"


@dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    metrics: FrameMetrics
    sequence_id: Optional[str] = None


@dataclass
class DatasetReport:
    dataset: str
    grouping: Grouping
    samples: List[ScoredSample]
    aggregates: Dict[str, float]
    per_sequence: Dict[str, Dict[str, float]] = field(default_factory=dict)
    conventions: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_sequences(self) -> int:
        return len(self.per_sequence)

    def frame_table(self) -> pd.DataFrame:
        return _frame_table(self.samples)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset": self.dataset,
            "grouping": self.grouping.value,
            "counts": {"samples": self.n_samples, "sequences": self.n_sequences},
            "aggregates": self.aggregates,
            "per_sequence": self.per_sequence,
            "conventions": self.conventions,
        }


def evaluate_frame(pred: BinaryMask, gt: BinaryMask, config: Optional[MetricConfig] = None) -> FrameMetrics:
    config = config or MetricConfig()
    iou, dice = iou_dice(pred, gt)
    precision, recall, f2 = precision_recall_f(pred, gt, F2_BETA_SQ)
    return FrameMetrics(
        iou=iou,
        dice=dice,
        precision=precision,
        recall=recall,
        f2=f2,
        sen=recall,
        s_alpha=s_measure(pred, gt, config),
        e_phi_mn=e_measure_mean(pred, gt, config),
        f_beta_mn=f_measure_mean(pred, gt, config),
    )


def _frame_table(samples: Sequence[ScoredSample]) -> pd.DataFrame:
    rows = [{"sample_id": s.sample_id, "sequence_id": s.sequence_id, **s.metrics.as_dict()} for s in samples]
    return pd.DataFrame(rows, columns=["sample_id", "sequence_id"] + METRIC_FIELDS)


def _named(means: pd.Series) -> Dict[str, float]:
    return {AGGREGATE_NAMES[name]: float(means[name]) for name in METRIC_FIELDS}


def aggregate(samples: Sequence[ScoredSample], grouping: Grouping = Grouping.FLAT, dataset: str = "",
              config: Optional[MetricConfig] = None) -> DatasetReport:
    """Arithmetic means per metric; by_sequence averages sequence means without weighting"""
    if not samples:
        raise ContractError(f"Cannot aggregate an empty result set for '{dataset}'")
    grouping = Grouping(grouping)
    df = _frame_table(samples)

    per_sequence: Dict[str, Dict[str, float]] = {}
    if df["sequence_id"].notna().all():
        seq_means = df.groupby("sequence_id", sort=True)[METRIC_FIELDS].mean()
        per_sequence = {str(seq): _named(row) for seq, row in seq_means.iterrows()}
    elif grouping == Grouping.BY_SEQUENCE:
        raise ContractError("by_sequence aggregation needs a sequence id on every sample")

    if grouping == Grouping.BY_SEQUENCE:
        means = seq_means.mean()
    else:
        means = df[METRIC_FIELDS].mean()

    logger.info(f"Aggregated {len(df)} samples of '{dataset}' ({grouping.value}): mDice {means['dice']:.4f}")
    return DatasetReport(
        dataset=dataset,
        grouping=grouping,
        samples=list(samples),
        aggregates=_named(means),
        per_sequence=per_sequence,
        conventions=conventions(config or MetricConfig()),
    )
