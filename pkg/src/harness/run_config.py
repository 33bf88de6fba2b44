"""
Run configuration: typed YAML run files, CLI overrides, resolved snapshots and digests
"""

import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from backends.types import DetectorKind, DetectorSpec, SegmenterKind, SegmenterSpec
from core.exceptions import ConfigError
from data.scanner import LAYOUTS
from data.splitter import SplitSpec
from metrics.config import MetricConfig
from prompt_bridge.bridge import BridgePolicy
from utils.config import Config
from video.sequence_runner import VideoPolicy

logger = logging.getLogger(__name__)

SNAPSHOT_FILE = "config_snapshot.yaml"
DIGEST_FILE = "config_digest.txt"

# settings that change where or how fast a run goes, never what it computes
DIGEST_EXCLUDED = {"output_dir", "workers"}


class EvalSplit(str, Enum):
    EVAL = "eval"
    ALL = "all"


class DatasetRef(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    root: str
    layout: str
    manifest: Optional[str] = None
    eval_split: EvalSplit = EvalSplit.ALL
    subset: Optional[str] = None

    @field_validator("layout")
    @classmethod
    def _known_layout(cls, value: str) -> str:
        if value not in LAYOUTS:
            raise ValueError(f"unknown layout '{value}', expected one of {', '.join(LAYOUTS)}")
        return value

    @model_validator(mode="after")
    def _paths_exist(self):
        if not Path(self.root).is_dir():
            raise ValueError(f"dataset root {self.root} does not exist")
        if self.manifest is not None and not Path(self.manifest).is_file():
            raise ValueError(f"manifest {self.manifest} does not exist")
        return self


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "run"
    datasets: List[DatasetRef] = Field(min_length=1)
    detector: DetectorSpec = Field(default_factory=DetectorSpec)
    segmenter: SegmenterSpec = Field(default_factory=SegmenterSpec)
    bridge: BridgePolicy = Field(default_factory=BridgePolicy)
    video: VideoPolicy = Field(default_factory=VideoPolicy)
    metrics: MetricConfig = Field(default_factory=MetricConfig)
    split: SplitSpec = Field(default_factory=SplitSpec)
    output_dir: str = Config.OUTPUT_DIR
    seed: int = 0
    input_size: int = Field(680, gt=0)
    batch_size: int = Field(64, ge=1)
    prompt_scale: float = Field(1.0, gt=0.0)
    workers: int = Field(Config.WORKERS, ge=1)
    save_predictions: bool = True

    @model_validator(mode="after")
    def _resolve(self):
        """Fill nested seeds and hints from the run-level values"""
        detector_update: Dict[str, Any] = {"input_size": self.input_size}
        if self.detector.seed is None:
            detector_update["seed"] = self.seed
        self.detector = self.detector.model_copy(update=detector_update)
        self.segmenter = self.segmenter.model_copy(update={"batch_size": self.batch_size})
        if "seed" not in self.split.model_fields_set:
            self.split = self.split.model_copy(update={"seed": self.seed})
        for spec in (self.detector, self.segmenter):
            if spec.kind.value == "external" and not spec.address:
                raise ValueError(f"external {type(spec).__name__} needs an adapter address")
        return self

    def digest(self) -> str:
        return config_digest(self)


def apply_backend(data: Dict[str, Any], choice: str) -> Dict[str, Any]:
    """Apply a --backend value to raw config data"""
    data = dict(data)
    if choice == "oracle":
        data["detector"] = {**data.get("detector", {}), "kind": DetectorKind.ORACLE.value, "address": None}
        data["segmenter"] = {**data.get("segmenter", {}), "kind": SegmenterKind.GT_INTERSECT.value, "address": None}
    elif choice.startswith("external:"):
        spec = SegmenterSpec.from_choice(choice)
        data["detector"] = {**data.get("detector", {}), "kind": DetectorKind.EXTERNAL.value, "address": spec.address}
        data["segmenter"] = {**data.get("segmenter", {}), "kind": spec.kind.value, "address": spec.address}
    else:
        spec = SegmenterSpec.from_choice(choice)
        data["segmenter"] = {**data.get("segmenter", {}), "kind": spec.kind.value, "address": None}
    return data


def build_run_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Validate raw config data after applying CLI overrides (seed, out, backend, layout)"""
    data = dict(data or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "seed" in overrides:
        data["seed"] = overrides["seed"]
    if "out" in overrides:
        data["output_dir"] = overrides["out"]
    if "backend" in overrides:
        data = apply_backend(data, overrides["backend"])
    if "layout" in overrides:
        data["datasets"] = [{**ref, "layout": overrides["layout"]} for ref in data.get("datasets", [])]
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid run config: {e}") from e


def load_run_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Run config {path} does not exist")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Run config {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Run config {path} must be a mapping at the top level")
    return build_run_config(data, overrides)


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json", exclude=DIGEST_EXCLUDED), sort_keys=True, separators=(",", ":"))


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def write_snapshot(config: RunConfig, out_dir: Union[str, Path]) -> str:
    """Write the resolved config and its digest into the output directory"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / SNAPSHOT_FILE, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=False)
    digest = config_digest(config)
    (out_dir / DIGEST_FILE).write_text(digest + "\n", encoding="utf-8")
    logger.info(f"Config digest {digest[:12]} written to {out_dir}")
    return digest
