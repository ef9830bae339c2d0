"""Acceptance checks for generated records.

A record is acceptable when it passes the power/thermal thresholds, sits inside
the envelope its scheduler reaches in the reference runs, and is not flagged as
an outlier by the robust z-score rule that stands in for expert review.
"""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from energy_sched.errors import EmptyDatasetError
from energy_sched.physics.thermal import LumpedNode, ThermalLimits, check_thermal_feasibility

logger = logging.getLogger(__name__)

OUTLIER_FIELDS = ("tat_ms", "power_w", "energy_kwh")
OUTLIER_RULE = "ExpertReview"
MAD_TO_SIGMA = 1.4826


@dataclass
class RecordVerdict:
    index: int
    scheduler: str
    workflow: str
    thermal_ok: bool
    consistent: bool
    outlier: bool
    acceptable: bool


@dataclass
class ValidationReport:
    verdicts: list
    hull_tolerance: float
    z_threshold: float
    method: dict = field(default_factory=dict)

    @property
    def acceptable_count(self):
        return sum(v.acceptable for v in self.verdicts)

    def summary(self):
        n = len(self.verdicts)
        return {
            "records": n,
            "thermal_ok": sum(v.thermal_ok for v in self.verdicts),
            "consistent": sum(v.consistent for v in self.verdicts),
            "outliers": sum(v.outlier for v in self.verdicts),
            "acceptable": self.acceptable_count,
            "acceptable_rate": self.acceptable_count / n if n else 0.0,
        }

    def to_dict(self):
        return {
            "summary": self.summary(),
            "hull_tolerance": self.hull_tolerance,
            "z_threshold": self.z_threshold,
            "method": self.method,
            "records": [asdict(v) for v in self.verdicts],
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def is_acceptable(thermal_ok, consistent, outlier):
    return bool(thermal_ok and consistent and not outlier)


class SchedulerEnvelope:
    """(TAT, energy) region covered by one scheduler's reference runs, widened by a tolerance."""

    def __init__(self, points, tolerance=0.10):
        points = np.asarray(points, dtype=np.float64)
        self.lo = points.min(axis=0)
        span = points.max(axis=0) - self.lo
        self.span = np.where(span > 0, span, 1.0)
        unit = (points - self.lo) / self.span
        centroid = unit.mean(axis=0)
        self.grown = centroid + (unit - centroid) * (1.0 + tolerance)
        self.tolerance = tolerance
        try:
            self.hull = Delaunay(self.grown)
        except (QhullError, ValueError):
            logger.debug("degenerate envelope for %d points; using the bounding box", len(points))
            self.hull = None

    def contains(self, point):
        unit = (np.asarray(point, dtype=np.float64) - self.lo) / self.span
        if self.hull is not None:
            return bool(self.hull.find_simplex(unit[None, :])[0] >= 0)
        lo, hi = self.grown.min(axis=0), self.grown.max(axis=0)
        pad = self.tolerance * np.where(hi > lo, hi - lo, 1.0)
        return bool(np.all(unit >= lo - pad) and np.all(unit <= hi + pad))


def robust_z(values, reference):
    """|value - median| / (1.4826 * MAD); falls back to the standard deviation."""
    reference = np.asarray(reference, dtype=np.float64)
    center = np.median(reference)
    scale = MAD_TO_SIGMA * np.median(np.abs(reference - center))
    if scale == 0:
        scale = reference.std()
    values = np.asarray(values, dtype=np.float64)
    if scale == 0:
        return np.where(values == center, 0.0, np.inf)
    return np.abs(values - center) / scale


def validate_batch(records, reference, limits=None, node=None, hull_tolerance=0.10, z_threshold=4.0):
    """Judge each record against thresholds, its scheduler's envelope and the outlier rule.

    `reference` is a sequence of ExecutionTrace objects (the calibrated runs).
    """
    if not records:
        raise EmptyDatasetError("no records to validate")
    if not reference:
        raise EmptyDatasetError("no reference runs to validate against")
    limits = limits or ThermalLimits()
    node = node or LumpedNode()

    envelopes = {}
    for kind in {t.scheduler for t in reference}:
        points = [(t.tat_ms, t.energy_kwh) for t in reference if t.scheduler == kind]
        envelopes[kind] = SchedulerEnvelope(points, hull_tolerance)

    ref_columns = {
        "tat_ms": [t.tat_ms for t in reference],
        "power_w": [t.avg_power_w for t in reference],
        "energy_kwh": [t.energy_kwh for t in reference],
    }
    scores = {
        name: robust_z([getattr(r, name) for r in records], ref_columns[name]) for name in OUTLIER_FIELDS
    }

    verdicts = []
    for i, record in enumerate(records):
        thermal_ok = check_thermal_feasibility(max(record.power_w, 0.0), limits, node)
        envelope = envelopes.get(record.scheduler)
        consistent = envelope is not None and envelope.contains((record.tat_ms, record.energy_kwh))
        outlier = any(scores[name][i] > z_threshold for name in OUTLIER_FIELDS)
        verdicts.append(RecordVerdict(
            index=i,
            scheduler=record.scheduler.label,
            workflow=record.workflow,
            thermal_ok=bool(thermal_ok),
            consistent=bool(consistent),
            outlier=bool(outlier),
            acceptable=is_acceptable(thermal_ok, consistent, outlier),
        ))

    report = ValidationReport(
        verdicts=verdicts,
        hull_tolerance=hull_tolerance,
        z_threshold=z_threshold,
        method={
            "thresholds": "steady-state lumped temperature and peak power",
            "consistency": "convex hull of the scheduler's (tat_ms, energy_kwh) reference cells",
            "outliers": f"{OUTLIER_RULE}: robust z-score > {z_threshold:g} on {', '.join(OUTLIER_FIELDS)}",
        },
    )
    logger.info("validated %d records: %d acceptable", len(verdicts), report.acceptable_count)
    return report
