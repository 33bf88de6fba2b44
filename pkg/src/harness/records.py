"""
Per-sample result records and their append-only JSON-lines sink
"""

import json
import logging
import threading
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

from data.manifest import natural_key
from metrics.aggregate import DatasetReport, Grouping, ScoredSample, aggregate
from metrics.config import FrameMetrics, MetricConfig

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"


class ResultRecord(BaseModel):
    sample_id: str
    dataset: str
    sequence_id: Optional[str] = None
    subset: Optional[str] = None
    metrics: Optional[Dict[str, float]] = None
    provenance: Optional[str] = None
    prompts: int = 0
    detection_mode: Optional[str] = None
    timing_ms: Dict[str, float] = Field(default_factory=dict)
    config_digest: str = ""
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.metrics is not None

    def scored(self) -> ScoredSample:
        return ScoredSample(self.sample_id, FrameMetrics(**self.metrics), self.sequence_id)


class RecordSink:
    """Thread-safe JSON-lines writer; one line per record as results arrive"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self._lock = threading.Lock()
        self.count = 0

    def write(self, record: ResultRecord) -> None:
        line = record.model_dump_json()
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
            self.count += 1


def read_records(path: Union[str, Path]) -> List[ResultRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(ResultRecord.model_validate(json.loads(line)))
    return sorted(records, key=lambda r: natural_key(r.sample_id))


def aggregate_records(records: List[ResultRecord], grouping: Grouping, dataset: str = "",
                      config: Optional[MetricConfig] = None) -> DatasetReport:
    """Recompute a dataset report from persisted records"""
    scored = [r.scored() for r in sorted(records, key=lambda r: natural_key(r.sample_id)) if r.ok]
    return aggregate(scored, grouping, dataset, config)
