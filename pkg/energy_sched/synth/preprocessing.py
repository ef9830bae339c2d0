"""Traces to the scaled training matrix, and decoded rows back to physical units."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from energy_sched.errors import (
    EmptyDatasetError,
    EncodingError,
    InvalidParameterError,
    MissingArtifactError,
    SchemaError,
)
from energy_sched.scheduler.workflows import WORKFLOW_IDS
from energy_sched.utils import SCHEDULERS, SchedulerKind

logger = logging.getLogger(__name__)

CATEGORICAL_FEATURES = {
    "scheduler": [kind.value for kind in SCHEDULERS],
    "workflow": list(WORKFLOW_IDS),
}
NUMERIC_FEATURES = [
    "tasks", "reduction", "effective_freq_ghz", "task_ms", "tat_ms", "power_w", "energy_kwh",
]

RECORD_COLUMNS = [
    "scheduler", "workflow", "reduction_pct", "tat_ms", "power_w", "energy_kwh", "tasks",
    "effective_freq_ghz", "decoded_reduction_pct", "accepted", "rejection_reason",
]


# ─── Data Classes ─────────────────────────────────────────────────────────────


@dataclass
class FeatureSchema:
    categorical_maps: dict
    numeric_ranges: dict
    feature_order: list

    def __post_init__(self):
        for name, (lo, hi) in self.numeric_ranges.items():
            if lo > hi:
                raise SchemaError(f"range for {name} has min {lo} > max {hi}")

    @property
    def k(self):
        return len(self.feature_order)

    def block(self, name):
        """Slice of the one-hot block for a categorical feature."""
        prefix = f"{name}="
        idx = [i for i, col in enumerate(self.feature_order) if col.startswith(prefix)]
        if not idx:
            raise SchemaError(f"no categorical block {name!r} in schema")
        return slice(idx[0], idx[-1] + 1)

    def column(self, name):
        try:
            return self.feature_order.index(name)
        except ValueError:
            raise SchemaError(f"no column {name!r} in schema") from None

    def span(self, name):
        lo, hi = self.numeric_ranges[name]
        return hi - lo

    def to_dict(self):
        return {
            "categorical_maps": {k: list(v) for k, v in self.categorical_maps.items()},
            "numeric_ranges": {k: [float(lo), float(hi)] for k, (lo, hi) in self.numeric_ranges.items()},
            "feature_order": list(self.feature_order),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                categorical_maps={k: list(v) for k, v in data["categorical_maps"].items()},
                numeric_ranges={k: (float(v[0]), float(v[1])) for k, v in data["numeric_ranges"].items()},
                feature_order=list(data["feature_order"]),
            )
        except (KeyError, TypeError, IndexError) as e:
            raise SchemaError(f"malformed feature schema: {e}") from None


@dataclass
class Dataset:
    matrix: np.ndarray
    schema: FeatureSchema
    train_idx: np.ndarray
    val_idx: np.ndarray
    frame: pd.DataFrame = field(repr=False, default=None)

    @property
    def train(self):
        return self.matrix[self.train_idx]

    @property
    def val(self):
        return self.matrix[self.val_idx]


@dataclass
class SyntheticRecord:
    scheduler: SchedulerKind
    workflow: str
    reduction: float
    tat_ms: float
    power_w: float
    energy_kwh: float
    tasks: float = math.nan
    effective_freq_ghz: float = math.nan
    task_ms: float = math.nan
    accepted: bool = False
    rejection_reason: str = None
    decoded_reduction: float = math.nan

    def __post_init__(self):
        if math.isnan(self.decoded_reduction):
            self.decoded_reduction = self.reduction


# ─── Encoding ─────────────────────────────────────────────────────────────────


def one_hot(value, categories):
    key = value.value if isinstance(value, SchedulerKind) else str(value)
    try:
        index = list(categories).index(key)
    except ValueError:
        raise EncodingError(f"unknown category {value!r}; expected one of {list(categories)}") from None
    vec = np.zeros(len(categories))
    vec[index] = 1.0
    return vec


def min_max_scale(v, value_range):
    """Scale into [0, 1]; a degenerate range maps to 0 and out-of-range values clip."""
    lo, hi = value_range
    if hi < lo:
        raise InvalidParameterError(f"range max {hi} < min {lo}")
    if hi == lo:
        return np.zeros_like(np.asarray(v, dtype=np.float64)) if np.ndim(v) else 0.0
    scaled = np.clip((np.asarray(v, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return scaled if np.ndim(v) else float(scaled)


def traces_to_frame(traces):
    rows = []
    for t in traces:
        rows.append({
            "scheduler": t.scheduler.value,
            "workflow": t.workflow,
            "tasks": float(t.tasks),
            "reduction": t.reduction,
            "effective_freq_ghz": t.effective_freq_ghz,
            "task_ms": t.tat_ms / t.tasks if t.tasks else math.nan,
            "tat_ms": t.tat_ms,
            "power_w": t.avg_power_w,
            "energy_kwh": t.energy_kwh,
        })
    return pd.DataFrame(rows, columns=["scheduler", "workflow"] + NUMERIC_FEATURES)


def build_schema(frame):
    order = [f"{name}={cat}" for name, cats in CATEGORICAL_FEATURES.items() for cat in cats]
    order += NUMERIC_FEATURES
    ranges = {col: (float(frame[col].min()), float(frame[col].max())) for col in NUMERIC_FEATURES}
    return FeatureSchema(
        categorical_maps={k: list(v) for k, v in CATEGORICAL_FEATURES.items()},
        numeric_ranges=ranges,
        feature_order=order,
    )


def encode_frame(frame, schema):
    blocks = []
    for name, categories in schema.categorical_maps.items():
        blocks.append(np.vstack([one_hot(v, categories) for v in frame[name]]))
    for col in NUMERIC_FEATURES:
        blocks.append(min_max_scale(frame[col].to_numpy(dtype=np.float64), schema.numeric_ranges[col])[:, None])
    return np.hstack(blocks)


def assemble(traces, seed=0, val_fraction=0.2):
    frame = traces_to_frame(traces)
    if len(frame) < 2:
        raise EmptyDatasetError(f"need at least 2 traces to build a dataset, got {len(frame)}")

    for col in NUMERIC_FEATURES:
        missing = int(frame[col].isna().sum())
        if missing == len(frame):
            raise EmptyDatasetError(f"column {col} has no observed values")
        if missing:
            logger.info("imputing %d missing %s values with the column mean", missing, col)
            frame[col] = frame[col].fillna(frame[col].mean())

    schema = build_schema(frame)
    matrix = encode_frame(frame, schema)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(frame))
    n_val = min(len(frame) - 1, max(1, int(round(val_fraction * len(frame)))))
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    logger.info("dataset: %d rows x %d features (%d train / %d val)",
                matrix.shape[0], schema.k, len(train_idx), len(val_idx))
    return Dataset(matrix=matrix, schema=schema, train_idx=train_idx, val_idx=val_idx, frame=frame)


def invert(decoded_row, schema):
    row = np.asarray(decoded_row, dtype=np.float64)
    if row.shape != (schema.k,):
        raise SchemaError(f"row has shape {row.shape}, schema expects ({schema.k},)")
    labels = {}
    for name, categories in schema.categorical_maps.items():
        block = row[schema.block(name)]
        labels[name] = categories[int(np.argmax(block))]
    values = {}
    for col in NUMERIC_FEATURES:
        lo, hi = schema.numeric_ranges[col]
        x = min(max(row[schema.column(col)], 0.0), 1.0)
        values[col] = lo + x * (hi - lo)
    return SyntheticRecord(
        scheduler=SchedulerKind.parse(labels["scheduler"]),
        workflow=labels["workflow"],
        reduction=values["reduction"],
        tat_ms=values["tat_ms"],
        power_w=values["power_w"],
        energy_kwh=values["energy_kwh"],
        tasks=values["tasks"],
        effective_freq_ghz=values["effective_freq_ghz"],
        task_ms=values["task_ms"],
    )


# ─── Synthetic Record Files ───────────────────────────────────────────────────


def records_frame(records):
    rows = [{
        "scheduler": r.scheduler.label,
        "workflow": r.workflow,
        "reduction_pct": r.reduction * 100.0,
        "tat_ms": r.tat_ms,
        "power_w": r.power_w,
        "energy_kwh": r.energy_kwh,
        "tasks": r.tasks,
        "effective_freq_ghz": r.effective_freq_ghz,
        "decoded_reduction_pct": r.decoded_reduction * 100.0,
        "accepted": bool(r.accepted),
        "rejection_reason": r.rejection_reason or "",
    } for r in records]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def write_records(path, records):
    records_frame(records).to_csv(path, index=False, float_format="%.4f", lineterminator="\n")


def read_records(path, accepted_only=False):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "run `generate` first")
    frame = pd.read_csv(path)
    missing = [c for c in RECORD_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
    records = []
    for row in frame.itertuples(index=False):
        accepted = str(row.accepted).strip().lower() in ("true", "1")
        if accepted_only and not accepted:
            continue
        reason = row.rejection_reason
        records.append(SyntheticRecord(
            scheduler=SchedulerKind.parse(row.scheduler),
            workflow=str(row.workflow),
            reduction=float(row.reduction_pct) / 100.0,
            tat_ms=float(row.tat_ms),
            power_w=float(row.power_w),
            energy_kwh=float(row.energy_kwh),
            tasks=float(row.tasks),
            effective_freq_ghz=float(row.effective_freq_ghz),
            accepted=accepted,
            rejection_reason=reason if isinstance(reason, str) and reason else None,
            decoded_reduction=float(row.decoded_reduction_pct) / 100.0,
        ))
    return records
