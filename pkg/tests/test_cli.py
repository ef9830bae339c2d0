import json

import pandas as pd
import pytest

from energy_sched.cli import build_parser, main
from energy_sched.scheduler.tables import bundled_table


def _run(tmp_path, *args):
    return main([*args, "--out-dir", str(tmp_path)])


@pytest.fixture(scope="module")
def calibrated(tmp_path_factory):
    out = tmp_path_factory.mktemp("calibrated")
    assert _run(out, "calibrate") == 0
    return out


def test_help_lists_every_command(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--help"])
    text = capsys.readouterr().out
    for name in ("calibrate", "simulate", "sweep", "train", "generate", "validate", "bootstrap", "optimize",
                 "report", "pipeline"):
        assert name in text


def test_calibrate_writes_artifacts(calibrated):
    assert (calibrated / "calibration.json").exists()
    residuals = pd.read_csv(calibrated / "residuals.csv")
    base = residuals[residuals["reduction_pct"] == 0.0]
    assert len(base) == 60
    assert base["rel_error"].max() < 0.01


def test_corrupted_table_exits_with_input_error(tmp_path):
    lines = bundled_table("table3.csv").read_text(encoding="utf-8").splitlines()
    lines[2] = "FCFS,WF-2,600,abc,1095.16,18.89"
    broken = tmp_path / "broken.csv"
    broken.write_text("\n".join(lines) + "\n", encoding="utf-8")

    out = tmp_path / "out"
    assert _run(out, "calibrate", "--table3", str(broken)) == 2
    assert not (out / "calibration.json").exists()


def test_missing_calibration_exits_3(tmp_path):
    assert _run(tmp_path, "simulate") == 3
    assert _run(tmp_path, "optimize") == 3


def test_simulate_single_cell(calibrated, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"paths": {"out_dir": str(calibrated)}}), encoding="utf-8")
    code = main(["simulate", "--config", str(config), "--scheduler", "LAS", "--workflow", "WF-3", "--reduction", "15"])
    assert code == 0
    traces = pd.read_csv(calibrated / "traces.csv")
    assert len(traces) == 1


def test_simulate_rejects_unknown_reduction(calibrated):
    assert _run(calibrated, "simulate", "--reduction", "30") == 2


def test_sweep_optimize_and_rerun(calibrated):
    assert _run(calibrated, "sweep") == 0
    first = (calibrated / "sweep.csv").read_bytes()
    assert len(pd.read_csv(calibrated / "sweep.csv")) == 150

    assert _run(calibrated, "optimize") == 0
    with open(calibrated / "sweet_spot.json", encoding="utf-8") as f:
        data = json.load(f)
    assert data["modal_best_reduction_pct"] == 15.0
    assert len(pd.read_csv(calibrated / "tradeoff_by_scheduler.csv")) == 30

    assert _run(calibrated, "sweep") == 0
    assert (calibrated / "sweep.csv").read_bytes() == first


def test_optimize_weight_flags(calibrated):
    assert _run(calibrated, "sweep") == 0
    assert _run(calibrated, "optimize", "--alpha", "1", "--beta", "0") == 0
    with open(calibrated / "sweet_spot.json", encoding="utf-8") as f:
        data = json.load(f)
    assert data["modal_best_reduction_pct"] == 20.0
    assert _run(calibrated, "optimize", "--alpha", "0", "--beta", "0") == 2


def test_bootstrap_against_table4(tmp_path):
    assert _run(tmp_path, "bootstrap", "--b-samples", "2000") == 0
    with open(tmp_path / "bootstrap.json", encoding="utf-8") as f:
        data = json.load(f)
    low, high = data["ci"]
    assert low <= high
    assert data["b_samples"] == 2000
    assert data["paired"] is True


def test_generate_without_model_exits_3(tmp_path):
    assert _run(tmp_path, "generate") == 3


def test_unsatisfiable_limits_exit_5(calibrated, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps({
            "paths": {"out_dir": str(calibrated)},
            "limits": {"max_core_temp": 295.2, "max_power": 1.0},
            "generate": {"budget_factor": 2},
        }),
        encoding="utf-8",
    )
    assert main(["train", "--config", str(config), "--epochs", "2"]) == 0
    assert (calibrated / "model.json").exists()
    assert len(pd.read_csv(calibrated / "loss_history.csv")) == 2
    assert main(["generate", "--config", str(config), "-n", "5"]) == 5
    assert not (calibrated / "synthetic.csv").exists()


def test_bad_config_exits_2(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"nonsense": 1}), encoding="utf-8")
    assert main(["calibrate", "--config", str(config), "--out-dir", str(tmp_path)]) == 2
