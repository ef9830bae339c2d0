"""Trace CSV reading and writing, including the bundled published tables."""

import logging
import math
import re
from importlib import resources
from pathlib import Path

import pandas as pd

from energy_sched.errors import MissingArtifactError, TableParseError, TableValidationError
from energy_sched.errors import UnsupportedPolicyError
from energy_sched.physics.energy_model import average_power_w
from energy_sched.scheduler import POLICY_DICT
from energy_sched.scheduler.traces import ExecutionTrace
from energy_sched.scheduler.workflows import WORKFLOW_DICT
from energy_sched.utils import BASE_CLOCK_HZ, SchedulerKind

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["scheduler", "workflow", "tasks", "tat_ms", "power_w", "energy_kwh"]
TABLE4_COLUMNS = [
    "scheduler", "workflow", "tat_ms", "tat_ms_15", "tat_ms_10", "energy_kwh_15", "energy_kwh_10",
]
OPTIONAL_COLUMNS = ["reduction_pct"]

_LINE_RE = re.compile(r"line (\d+)")


def bundled_table(name):
    return Path(str(resources.files("energy_sched").joinpath("data", name)))


def _read_frame(path, expected):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        logger.warning("%s is empty, no rows loaded", path)
        return None
    except pd.errors.ParserError as e:
        match = _LINE_RE.search(str(e))
        raise TableParseError(path, int(match.group(1)) if match else 0, str(e)) from None

    header = list(frame.columns)
    allowed = [expected, expected + OPTIONAL_COLUMNS]
    if header not in allowed:
        raise TableParseError(path, 1, f"header {','.join(header)} != {','.join(expected)}")
    logger.info("%s: %d rows, header %s", path.name, len(frame), ",".join(header))
    return frame


def _number(path, line, column, raw, allow_missing):
    text = "" if pd.isna(raw) else str(raw).strip()
    if text == "" or text.lower() == "nan":
        if allow_missing:
            return math.nan
        raise TableParseError(path, line, f"missing value in column {column}")
    try:
        value = float(text)
    except ValueError:
        raise TableParseError(path, line, f"non-numeric {column}: {raw!r}") from None
    if math.isinf(value):
        raise TableValidationError(path, line, f"{column} must be finite")
    if value < 0:
        raise TableValidationError(path, line, f"{column} must be >= 0, got {value}")
    return value


def _labels(path, line, row):
    try:
        kind = SchedulerKind.parse("" if pd.isna(row["scheduler"]) else row["scheduler"])
    except UnsupportedPolicyError as e:
        raise TableValidationError(path, line, str(e)) from None
    workflow = ("" if pd.isna(row["workflow"]) else str(row["workflow"])).strip().upper()
    if workflow not in WORKFLOW_DICT:
        raise TableValidationError(path, line, f"unknown workflow {row['workflow']!r}")
    return kind, workflow


def _frequency_fields(kind, reduction):
    utilization = POLICY_DICT[kind].utilization
    return BASE_CLOCK_HZ * utilization * (1.0 - reduction) / 1e9, utilization


def load_table(csv_path):
    """Rows of a trace CSV as validated ExecutionTraces."""
    frame = _read_frame(csv_path, TRACE_COLUMNS)
    if frame is None:
        return []
    traces = []
    for idx, row in frame.iterrows():
        line = idx + 2
        kind, workflow = _labels(csv_path, line, row)
        tasks = _number(csv_path, line, "tasks", row["tasks"], allow_missing=False)
        if tasks != int(tasks):
            raise TableValidationError(csv_path, line, f"tasks must be an integer, got {tasks}")
        reduction = 0.0
        if "reduction_pct" in row:
            reduction = _number(csv_path, line, "reduction_pct", row["reduction_pct"], False) / 100.0
        freq_ghz, utilization = _frequency_fields(kind, reduction)
        trace = ExecutionTrace(
            scheduler=kind,
            workflow=workflow,
            tasks=int(tasks),
            tat_ms=_number(csv_path, line, "tat_ms", row["tat_ms"], allow_missing=True),
            avg_power_w=_number(csv_path, line, "power_w", row["power_w"], allow_missing=True),
            energy_kwh=_number(csv_path, line, "energy_kwh", row["energy_kwh"], allow_missing=True),
            effective_freq_ghz=freq_ghz,
            utilization=utilization,
            reduction=reduction,
        )
        problems = trace.problems()
        if problems:
            raise TableValidationError(csv_path, line, "; ".join(problems))
        traces.append(trace)
    return traces


def load_table4(csv_path, energy_scale=1e5):
    """Reduced-frequency rows (10% and 15%) as ExecutionTraces."""
    frame = _read_frame(csv_path, TABLE4_COLUMNS)
    if frame is None:
        return []
    traces = []
    for idx, row in frame.iterrows():
        line = idx + 2
        kind, workflow = _labels(csv_path, line, row)
        tasks = WORKFLOW_DICT[workflow].task_count
        for suffix, reduction in (("10", 0.10), ("15", 0.15)):
            tat = _number(csv_path, line, f"tat_ms_{suffix}", row[f"tat_ms_{suffix}"], False)
            energy = _number(csv_path, line, f"energy_kwh_{suffix}", row[f"energy_kwh_{suffix}"], False)
            freq_ghz, utilization = _frequency_fields(kind, reduction)
            trace = ExecutionTrace(
                scheduler=kind,
                workflow=workflow,
                tasks=tasks,
                tat_ms=tat,
                avg_power_w=average_power_w(energy, tat, energy_scale),
                energy_kwh=energy,
                effective_freq_ghz=freq_ghz,
                utilization=utilization,
                reduction=reduction,
            )
            problems = trace.problems()
            if problems:
                raise TableValidationError(csv_path, line, "; ".join(problems))
            traces.append(trace)
    return traces


def traces_frame(traces, with_reduction=False):
    rows = []
    for t in traces:
        row = {
            "scheduler": t.scheduler.label,
            "workflow": t.workflow,
            "tasks": t.tasks,
            "tat_ms": t.tat_ms,
            "power_w": t.avg_power_w,
            "energy_kwh": t.energy_kwh,
        }
        if with_reduction:
            row["reduction_pct"] = t.reduction * 100.0
        rows.append(row)
    columns = TRACE_COLUMNS + (OPTIONAL_COLUMNS if with_reduction else [])
    return pd.DataFrame(rows, columns=columns)


def write_traces(path, traces, with_reduction=False):
    frame = traces_frame(traces, with_reduction=with_reduction)
    frame.to_csv(path, index=False, float_format="%.2f", lineterminator="\n")
    logger.info("wrote %d traces to %s", len(frame), path)
    return path
