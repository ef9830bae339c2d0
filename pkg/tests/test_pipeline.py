import json
import subprocess
import sys
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parents[1]

SMALL_RUN = {
    "seed": 2024,
    "vae": {"epochs": 5},
    "generate": {"n_samples": 50},
    "bootstrap": {"b_samples": 500},
}


def _pipeline(tmp_path, name):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SMALL_RUN), encoding="utf-8")
    out = tmp_path / name
    result = subprocess.run(
        [sys.executable, "run_pipeline.py", "--config", str(config), "--out-dir", str(out)],
        cwd=ROOT,
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stdout + result.stderr
    return out


def test_pipeline_writes_every_artifact(tmp_path):
    out = _pipeline(tmp_path, "run")
    for name in ("calibration.json", "residuals.csv", "traces.csv", "sweep.csv", "model.json", "loss_history.csv",
                 "synthetic.csv", "validation.json", "bootstrap.json", "sweet_spot.json", "tradeoff.csv",
                 "tradeoff_by_scheduler.csv", "thermal_summary.csv", "report.md"):
        assert (out / name).exists(), name
    assert len(list((out / "thermal").glob("*.csv"))) == 60

    synthetic = pd.read_csv(out / "synthetic.csv")
    assert synthetic["accepted"].sum() == 50

    report = (out / "report.md").read_text(encoding="utf-8")
    assert "## Sweet spots" in report
    assert "## Synthetic record validation" in report


def test_pipeline_is_deterministic(tmp_path):
    first = _pipeline(tmp_path, "a")
    second = _pipeline(tmp_path, "b")
    for name in ("report.md", "sweep.csv", "synthetic.csv", "loss_history.csv", "bootstrap.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
