# tracing_topk/core/reports.py
"""
Report emission: per-trial CSV (plus a sibling .summary.json), a single JSON
document, and an .xlsx workbook for the service surface.
"""
import dataclasses
import json
import logging
import math
from enum import Enum
from io import BytesIO
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from tracing_topk.core.errors import ReportError
from tracing_topk.core.models.experiment import ExperimentConfig, Summary, TrialResult

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "trial_index",
    "traced_count",
    "out_sample_decision",
    "q_k_num",
    "q_k_den",
    "count_above",
    "release_error",
    "inner_min",
    "inner_mean",
]

_INT_COLUMNS = ("trial_index", "traced_count", "q_k_num", "q_k_den", "count_above", "inner_min")


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def jsonable(value: Any) -> Any:
    """
    Plain JSON data for dataclasses, enums and tuples. Non-finite floats become the
    strings "Infinity", "-Infinity" and "NaN" since strict JSON has no spelling for them.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "NaN"
        return "Infinity" if value > 0 else "-Infinity"
    return value


def summary_path(path: Union[str, Path]) -> Path:
    """results.csv -> results.summary.json"""
    return Path(path).with_suffix(".summary.json")


def trials_frame(results: Sequence[TrialResult]) -> pd.DataFrame:
    """One row per trial in CSV column order; absent fields become empty cells."""
    ordered = sorted(results, key=lambda r: r.trial_index)
    rows = [r.model_dump(mode="json", include=set(CSV_COLUMNS)) for r in ordered]
    df = pd.DataFrame(rows, columns=CSV_COLUMNS)
    for col in _INT_COLUMNS:
        df[col] = df[col].astype("Int64")
    df["release_error"] = df["release_error"].astype("float64")
    df["inner_mean"] = df["inner_mean"].astype("float64")
    return df


def _summary_document(summary: Summary) -> Dict[str, Any]:
    return summary.model_dump(mode="json")


def report_document(
    summary: Summary,
    results: Sequence[TrialResult],
    config: Optional[ExperimentConfig] = None,
) -> Dict[str, Any]:
    doc: Dict[str, Any] = {}
    if config is not None:
        doc["config"] = config.model_dump(mode="json", by_alias=True)
    doc["summary"] = _summary_document(summary)
    doc["results"] = [r.model_dump(mode="json") for r in sorted(results, key=lambda r: r.trial_index)]
    return doc


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise ReportError(path, e.strerror or str(e)) from e


def write_report(
    summary: Summary,
    results: Sequence[TrialResult],
    path: Union[str, Path],
    fmt: Union[ReportFormat, str] = ReportFormat.CSV,
    config: Optional[ExperimentConfig] = None,
) -> List[Path]:
    """
    Write the report and return the paths written.

    csv:  the per-trial table at `path` and the summary at its .summary.json sibling.
    json: one document {"config", "summary", "results"} at `path`.
    """
    path = Path(path)
    if not results:
        raise ReportError(path, "refusing to write a report with no trial results")
    fmt = ReportFormat(fmt)

    if fmt is ReportFormat.CSV:
        csv_text = trials_frame(results).to_csv(index=False, lineterminator="\n")
        sibling = summary_path(path)
        _write_text(path, csv_text)
        _write_text(sibling, json.dumps(_summary_document(summary), indent=2) + "\n")
        written = [path, sibling]
    else:
        _write_text(path, json.dumps(report_document(summary, results, config), indent=2) + "\n")
        written = [path]

    logger.info("Wrote %s report for %d trials to %s", fmt.value, len(results), path)
    return written


def read_summary(path: Union[str, Path]) -> Summary:
    """Parse a .summary.json file, or the summary inside a JSON report."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ReportError(path, e.strerror or str(e)) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportError(path, f"not valid JSON ({e})") from e
    if isinstance(data, dict) and "summary" in data and "results" in data:
        data = data["summary"]
    return Summary.model_validate(data)


# ---------------------------
# Workbook export
# ---------------------------

def _summary_rows(summary: Summary) -> pd.DataFrame:
    flat = []
    for key, value in summary.model_dump(mode="json", exclude_none=True).items():
        if isinstance(value, dict):
            flat.extend((f"{key}.{sub}", v) for sub, v in value.items())
        else:
            flat.append((key, value))
    return pd.DataFrame(flat, columns=["Metric", "Value"]).astype({"Value": "object"})


def summary_workbook(summary: Summary, results: Sequence[TrialResult]) -> BytesIO:
    output = BytesIO()
    with pd.ExcelWriter(output, engine="xlsxwriter") as writer:
        _summary_rows(summary).to_excel(writer, index=False, sheet_name="Summary")
        trials_frame(results).to_excel(writer, index=False, sheet_name="Trials")

        workbook = writer.book
        rate_format = workbook.add_format({"num_format": "0.000000"})
        writer.sheets["Summary"].set_column("A:A", 32)
        writer.sheets["Summary"].set_column("B:B", 24, rate_format)
        writer.sheets["Trials"].set_column("A:I", 16)

    output.seek(0)
    return output
