"""Run configuration: module defaults, a JSON file, then command-line flags."""

import copy
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

from energy_sched.errors import ConfigError
from energy_sched.utils import derive_seed

logger = logging.getLogger(__name__)

Config = {
    "seed": 2024,
    "paths": {
        "table3": None,
        "table4": None,
        "out_dir": "runs/default",
        "model": None,
    },
    "hardware": {
        "base_freq_hz": 2.1e9,
        "v_min": 0.80,
        "v_max": 1.10,
        "switching_capacitance_f": 2.5e-7,
        "leakage_ref_current_a": 40.0,
        "leakage_temp_coeff": 0.02,
        "leakage_ref_temp_k": 318.15,
        "cooling_efficiency": 0.8,
        "ambient_k": 295.15,
        "thermal_resistance_k_per_w": 0.008,
        "thermal_capacitance_j_per_k": 2000.0,
    },
    "limits": {
        "max_core_temp": 358.0,
        "max_power": 4500.0,
    },
    "calibration": {
        "base_tolerance": 0.01,
        "reduced_tolerance": 0.02,
        "energy_scale": 1e5,
        "jitter_sigma": 0.15,
        "level_targets": {
            "0.05": {"tat_pct": 3.475, "energy_pct": 4.475},
            "0.20": {"tat_pct": 10.44, "energy_pct": 12.76, "energy_scope": "SAS"},
        },
    },
    "vae": {
        "latent_dim": 8,
        "encoder_widths": [64, 32, 16],
        "decoder_widths": [16, 32, 64],
        "beta": 1.0,
        "gamma": 0.1,
        "learning_rate": 5e-3,
        "batch_size": 16,
        "epochs": 100,
        "optimizer": "adam",
    },
    "generate": {
        "n_samples": 500,
        "chunk_size": 256,
        "workers": 1,
        "budget_factor": 20,
    },
    "validation": {
        "hull_tolerance": 0.10,
        "z_threshold": 4.0,
    },
    "bootstrap": {
        "b_samples": 10000,
        "confidence_level": 0.95,
        "metric": "energy_kwh",
        "source": "table4",
        "workers": 1,
    },
    "weights": {
        "alpha_energy": 0.5,
        "beta_time": 0.5,
        "max_tat_increase_pct": None,
    },
    "report": {
        "horizon_s": 80.0,
        "sample_step_s": 1.0,
    },
}


@dataclass(frozen=True)
class PathsConfig:
    table3: Path
    table4: Path
    out_dir: Path
    model: Path

    def artifact(self, name):
        return self.out_dir / name


@dataclass(frozen=True)
class CalibrationSettings:
    base_tolerance: float = 0.01
    reduced_tolerance: float = 0.02
    energy_scale: float = 1e5
    jitter_sigma: float = 0.15
    level_targets: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GenerationSettings:
    n_samples: int = 500
    chunk_size: int = 256
    workers: int = 1
    budget_factor: int = 20


@dataclass(frozen=True)
class ValidationSettings:
    hull_tolerance: float = 0.10
    z_threshold: float = 4.0


@dataclass(frozen=True)
class ReportSettings:
    horizon_s: float = 80.0
    sample_step_s: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    seed: int
    paths: PathsConfig
    hardware: object
    limits: object
    calibration: CalibrationSettings
    hyper: object
    generate: GenerationSettings
    validation: ValidationSettings
    bootstrap: object
    bootstrap_metric: str
    bootstrap_source: str
    weights: object
    max_tat_increase_pct: float
    report: ReportSettings

    @property
    def node(self):
        return self.hardware.node


def deep_merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check_keys(section, data, allowed):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {section} keys: {', '.join(unknown)}")


def _build(cls, section, data):
    names = {f.name for f in fields(cls)}
    _check_keys(section, data, names)
    return cls(**data)


def read_config_file(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_config(path=None, overrides=None):
    """Defaults, then the JSON file at `path`, then `overrides`; later wins."""
    from energy_sched.analysis.optimizer import ObjectiveWeights
    from energy_sched.analysis.uq import BootstrapConfig
    from energy_sched.physics.hardware import HardwareProfile
    from energy_sched.physics.thermal import ThermalLimits
    from energy_sched.scheduler.tables import bundled_table
    from energy_sched.synth.pivae import VaeHyper

    data = copy.deepcopy(Config)
    if path is not None:
        file_data = read_config_file(path)
        _check_keys("top-level", file_data, Config)
        data = deep_merge(data, file_data)
        logger.debug("loaded config from %s", path)
    if overrides:
        data = deep_merge(data, {k: v for k, v in overrides.items() if v is not None})

    seed = int(data["seed"])
    paths = data["paths"]
    _check_keys("paths", paths, Config["paths"])
    out_dir = Path(paths["out_dir"])

    bootstrap = dict(data["bootstrap"])
    metric = bootstrap.pop("metric")
    source = bootstrap.pop("source")
    if metric not in ("energy_kwh", "tat_ms"):
        raise ConfigError(f"bootstrap metric must be energy_kwh or tat_ms, got {metric!r}")
    if source not in ("table4", "synthetic"):
        raise ConfigError(f"bootstrap source must be table4 or synthetic, got {source!r}")

    weights = dict(data["weights"])
    max_tat = weights.pop("max_tat_increase_pct", None)

    calibration = dict(data["calibration"])
    calibration["level_targets"] = {
        round(float(level), 6): target for level, target in calibration.get("level_targets", {}).items()
    }

    vae = dict(data["vae"])
    for key in ("encoder_widths", "decoder_widths"):
        if key in vae:
            vae[key] = tuple(vae[key])

    try:
        return RunConfig(
            seed=seed,
            paths=PathsConfig(
                table3=Path(paths["table3"]) if paths["table3"] else bundled_table("table3.csv"),
                table4=Path(paths["table4"]) if paths["table4"] else bundled_table("table4.csv"),
                out_dir=out_dir,
                model=Path(paths["model"]) if paths["model"] else out_dir / "model.json",
            ),
            hardware=_build(HardwareProfile, "hardware", data["hardware"]),
            limits=_build(ThermalLimits, "limits", data["limits"]),
            calibration=_build(CalibrationSettings, "calibration", calibration),
            hyper=_build(VaeHyper, "vae", {**vae, "seed": vae.get("seed", derive_seed(seed, "train"))}),
            generate=_build(GenerationSettings, "generate", data["generate"]),
            validation=_build(ValidationSettings, "validation", data["validation"]),
            bootstrap=_build(BootstrapConfig, "bootstrap", {**bootstrap, "seed": bootstrap.get("seed", derive_seed(seed, "bootstrap"))}),
            bootstrap_metric=metric,
            bootstrap_source=source,
            weights=_build(ObjectiveWeights, "weights", weights),
            max_tat_increase_pct=max_tat,
            report=_build(ReportSettings, "report", data["report"]),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {e}") from None
