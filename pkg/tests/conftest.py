import pytest

from energy_sched.analysis.optimizer import SweepCell, simulate_grid
from energy_sched.scheduler.calibration import calibrate
from energy_sched.scheduler.tables import bundled_table, load_table, load_table4
from energy_sched.synth.pivae import VaeHyper, train
from energy_sched.synth.preprocessing import assemble

SEED = 2024


@pytest.fixture(scope="session")
def table3():
    return load_table(bundled_table("table3.csv"))


@pytest.fixture(scope="session")
def table4():
    return load_table4(bundled_table("table4.csv"))


@pytest.fixture(scope="session")
def calibration(table3, table4):
    return calibrate(table3, table4, seed=SEED)


@pytest.fixture(scope="session")
def sweep_traces(calibration):
    return simulate_grid(calibration)


@pytest.fixture(scope="session")
def sweep_grid(sweep_traces):
    return [SweepCell.from_trace(t) for t in sweep_traces]


@pytest.fixture(scope="session")
def dataset(sweep_traces):
    return assemble(sweep_traces, seed=SEED)


@pytest.fixture(scope="session")
def trained(dataset, calibration):
    """(hyper, params, history) after a full default-length run."""
    hyper = VaeHyper(seed=SEED)
    params, history = train(dataset, hyper, energy_scale=calibration.energy_scale)
    return hyper, params, history
