"""Bootstrap confidence interval and p-value for a difference in means.

Both samples are standardized with the real sample's mean and standard
deviation before resampling; intervals are reported in both the standardized
and the raw units.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from energy_sched.errors import (
    CoverageError,
    EmptyDatasetError,
    InvalidParameterError,
    NormalizationError,
    ShapeError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BootstrapConfig:
    b_samples: int = 10000
    confidence_level: float = 0.95
    seed: int = 0
    paired: bool = False
    workers: int = 1
    chunk_size: int = 1000

    def __post_init__(self):
        if self.b_samples < 100:
            raise InvalidParameterError(f"b_samples must be >= 100, got {self.b_samples}")
        if not 0.0 < self.confidence_level < 1.0:
            raise InvalidParameterError(f"confidence_level must lie in (0, 1), got {self.confidence_level}")
        if self.workers < 1 or self.chunk_size < 1:
            raise InvalidParameterError("workers and chunk_size must be >= 1")


@dataclass
class BootstrapResult:
    observed_diff: float
    observed_diff_normalized: float
    ci_low: float
    ci_high: float
    ci_low_normalized: float
    ci_high_normalized: float
    p_value: float
    n_real: int
    n_synth: int
    config: BootstrapConfig
    diffs: np.ndarray = field(repr=False, default=None)

    def to_report(self, metric, source=None):
        report = {
            "metric": metric,
            "n_real": self.n_real,
            "n_synth": self.n_synth,
            "observed_diff_raw": self.observed_diff,
            "observed_diff_normalized": self.observed_diff_normalized,
            "ci": [self.ci_low, self.ci_high],
            "ci_normalized": [self.ci_low_normalized, self.ci_high_normalized],
            "confidence_level": self.config.confidence_level,
            "p_value": self.p_value,
            "b_samples": self.config.b_samples,
            "seed": self.config.seed,
            "paired": self.config.paired,
        }
        if source is not None:
            report["source"] = source
        return report

    def save(self, path, metric, source=None):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_report(metric, source), f, indent=2, sort_keys=True)
            f.write("\n")


def quantile(sample, p):
    """Linear interpolation between order statistics (numpy's default method)."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size == 0:
        raise EmptyDatasetError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"quantile level must lie in [0, 1], got {p}")
    return float(np.quantile(sample, p, method="linear"))


def two_sided_p(diffs):
    below = np.mean(diffs <= 0.0)
    above = np.mean(diffs >= 0.0)
    return float(min(1.0, max(0.0, 2.0 * min(below, above))))


def _resample_chunk(real, synth, seed, chunk, size, paired):
    rng = np.random.default_rng([seed, chunk])
    idx_real = rng.integers(0, len(real), size=(size, len(real)))
    idx_synth = idx_real if paired else rng.integers(0, len(synth), size=(size, len(synth)))
    return real[idx_real].mean(axis=1) - synth[idx_synth].mean(axis=1)


def bootstrap_diff_means(real, synth, cfg=None, progress=False):
    """mean(real) - mean(synth) with a percentile interval over `cfg.b_samples` resamples."""
    cfg = cfg or BootstrapConfig()
    real = np.asarray(real, dtype=np.float64)
    synth = np.asarray(synth, dtype=np.float64)
    if real.size == 0 or synth.size == 0:
        raise EmptyDatasetError("both samples must be non-empty")
    if cfg.paired and real.shape != synth.shape:
        raise ShapeError(f"paired bootstrap needs equal lengths, got {real.size} and {synth.size}")

    mean = real.mean()
    std = real.std(ddof=1) if real.size > 1 else 0.0
    if not np.isfinite(std) or std == 0.0:
        raise NormalizationError("real sample has zero standard deviation; cannot normalize")
    real_n = (real - mean) / std
    synth_n = (synth - mean) / std

    sizes = [min(cfg.chunk_size, cfg.b_samples - start) for start in range(0, cfg.b_samples, cfg.chunk_size)]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        parts = pool.map(
            lambda c: _resample_chunk(real_n, synth_n, cfg.seed, c, sizes[c], cfg.paired),
            range(len(sizes)),
        )
        diffs = np.concatenate(list(tqdm(parts, total=len(sizes), desc="bootstrap", disable=not progress)))

    tail = (1.0 - cfg.confidence_level) / 2.0
    low_n = quantile(diffs, tail)
    high_n = quantile(diffs, 1.0 - tail)
    result = BootstrapResult(
        observed_diff=float(real.mean() - synth.mean()),
        observed_diff_normalized=float(real_n.mean() - synth_n.mean()),
        ci_low=low_n * std,
        ci_high=high_n * std,
        ci_low_normalized=low_n,
        ci_high_normalized=high_n,
        p_value=two_sided_p(diffs),
        n_real=int(real.size),
        n_synth=int(synth.size),
        config=cfg,
        diffs=diffs,
    )
    logger.info(
        "bootstrap: diff %.4f, %.0f%% CI [%.4f, %.4f], p=%.4g",
        result.observed_diff, cfg.confidence_level * 100, result.ci_low, result.ci_high, result.p_value,
    )
    return result


def paired_samples(base, reduced, metric="energy_kwh", reduction=0.10):
    """Align base-frequency rows with rows at `reduction` by (scheduler, workflow)."""
    by_key = {t.key: t for t in reduced if abs(t.reduction - reduction) < 1e-9}
    real, synth = [], []
    for trace in sorted(base, key=lambda t: (t.scheduler.value, t.workflow)):
        match = by_key.get(trace.key)
        if match is None:
            continue
        a, b = getattr(trace, metric), getattr(match, metric)
        if np.isnan(a) or np.isnan(b):
            continue
        real.append(a)
        synth.append(b)
    if not real:
        raise CoverageError(f"no base rows align with rows at {reduction:.0%}")
    logger.debug("aligned %d pairs on %s", len(real), metric)
    return np.array(real), np.array(synth)
