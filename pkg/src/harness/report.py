"""
Comparison tables: published fixture tables and own aggregates rendered as markdown and CSV,
with the best value of every column in bold
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

from core.exceptions import ReportError

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).parent / "fixtures"
REPORT_FILE = "report.md"

# published column names that differ from our aggregate names
COLUMN_ALIASES = {"Dice": "mDice"}

CELL_FORMAT = "{:.4g}"

# method -> dataset -> metric -> value
MethodResults = Dict[str, Dict[str, Dict[str, float]]]


class ReportTable(BaseModel):
    """One fixture table: declared metric columns and per-dataset method rows"""
    name: str
    metrics: List[str]
    datasets: Dict[str, Dict[str, Dict[str, float]]]

    def check_columns(self) -> "ReportTable":
        expected = set(self.metrics)
        for dataset, methods in self.datasets.items():
            for method, values in methods.items():
                if set(values) != expected:
                    missing = sorted(expected - set(values))
                    extra = sorted(set(values) - expected)
                    raise ReportError(
                        f"Table '{self.name}', dataset '{dataset}', method '{method}': "
                        f"missing columns {missing}, unexpected columns {extra}"
                    )
        return self


def bundled_tables() -> List[Path]:
    return sorted(FIXTURES_DIR.glob("*.yaml"))


def load_table(path: Union[str, Path]) -> ReportTable:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        return ReportTable.model_validate(data).check_columns()
    except (OSError, yaml.YAMLError, ValidationError) as e:
        raise ReportError(f"Cannot load report table {path}: {e}") from e


def load_aggregate(path: Union[str, Path]) -> Dict[str, Dict[str, float]]:
    """Dataset-level and subset-level aggregates of one aggregate.json, keyed by dataset or subset tag"""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        results = {payload["dataset"]: dict(payload["overall"]["aggregates"])}
        for tag, block in payload.get("subsets", {}).items():
            results[tag] = dict(block["aggregates"])
    except (OSError, ValueError, KeyError) as e:
        raise ReportError(f"Cannot read aggregate file {path}: {e}") from e
    return results


def parse_result_arg(value: str) -> Tuple[str, Path]:
    """METHOD=PATH as given on the command line"""
    method, sep, path = value.partition("=")
    if not sep or not method or not path:
        raise ReportError(f"Expected METHOD=PATH for a result file, got '{value}'")
    return method, Path(path)


def project(values: Dict[str, float], columns: List[str], method: str, dataset: str) -> Dict[str, float]:
    """Pick a fixture's columns out of an own-result metric map"""
    missing = [c for c in columns if COLUMN_ALIASES.get(c, c) not in values]
    if missing:
        raise ReportError(f"Results of '{method}' on '{dataset}' lack columns {missing}")
    return {c: float(values[COLUMN_ALIASES.get(c, c)]) for c in columns}


def build_tables(tables: List[ReportTable], results: Optional[MethodResults] = None) -> Dict[str, pd.DataFrame]:
    """One frame per dataset, methods as rows and metrics as columns"""
    results = results or {}
    rows: Dict[str, Dict[str, Dict[str, float]]] = {}
    columns: Dict[str, List[str]] = {}

    for table in tables:
        for dataset, methods in table.datasets.items():
            if dataset in columns and columns[dataset] != table.metrics:
                raise ReportError(
                    f"Dataset '{dataset}' appears with columns {columns[dataset]} and {table.metrics} "
                    f"(table '{table.name}')"
                )
            columns[dataset] = list(table.metrics)
            rows.setdefault(dataset, {}).update(methods)

    for method, per_dataset in results.items():
        for dataset, values in per_dataset.items():
            if dataset not in columns:
                columns[dataset] = list(values)
            rows.setdefault(dataset, {})[method] = project(values, columns[dataset], method, dataset)

    frames = {}
    for dataset, methods in rows.items():
        df = pd.DataFrame.from_dict(methods, orient="index")[columns[dataset]]
        df.index.name = "Method"
        frames[dataset] = df
    return frames


def best_cells(df: pd.DataFrame) -> pd.DataFrame:
    """True where a cell holds its column maximum; ties all count"""
    return df.eq(df.max())


def render_markdown(dataset: str, df: pd.DataFrame) -> str:
    best = best_cells(df)
    lines = [
        f"### {dataset}",
        "",
        "| Method | " + " | ".join(df.columns) + " |",
        "|---|" + "---|" * len(df.columns),
    ]
    for method, row in df.iterrows():
        cells = []
        for column, value in row.items():
            text = "" if pd.isna(value) else CELL_FORMAT.format(value)
            cells.append(f"**{text}**" if best.at[method, column] else text)
        lines.append(f"| {method} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "table"


def write_report(frames: Dict[str, pd.DataFrame], out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sections = []
    for dataset, df in frames.items():
        sections.append(render_markdown(dataset, df))
        df.to_csv(out_dir / f"{_slug(dataset)}.csv")
    report_path = out_dir / REPORT_FILE
    report_path.write_text("# Results\n\n" + "\n".join(sections), encoding="utf-8")
    logger.info(f"Wrote {len(frames)} tables to {out_dir}")
    return report_path


def cmd_report(table_paths: Optional[List[Union[str, Path]]] = None,
               result_files: Optional[List[Tuple[str, Union[str, Path]]]] = None,
               out_dir: Optional[Union[str, Path]] = None) -> Dict[str, pd.DataFrame]:
    """Assemble fixture tables and own results; writes report.md and per-dataset CSVs when out_dir is set"""
    paths = bundled_tables() if table_paths is None else [Path(p) for p in table_paths]
    tables = [load_table(p) for p in paths]

    results: MethodResults = {}
    for method, path in result_files or []:
        results.setdefault(method, {}).update(load_aggregate(path))

    frames = build_tables(tables, results)
    if not frames:
        raise ReportError("Nothing to report: no fixture tables and no result files")
    if out_dir is not None:
        write_report(frames, out_dir)
    return frames
