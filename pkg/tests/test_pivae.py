from dataclasses import replace

import numpy as np
import pytest

from energy_sched.errors import EmptyDatasetError, GenerationStarvationError, SchemaError, ShapeError
from energy_sched.physics.thermal import LumpedNode, ThermalLimits, check_thermal_feasibility
from energy_sched.synth.artifact import load_model, save_model
from energy_sched.synth.network import OPTIMIZER_DICT
from energy_sched.synth.pivae import (
    HISTORY_COLUMNS,
    REJECT_RANGE,
    REJECT_THERMAL,
    EnergyConsistency,
    VaeHyper,
    VaeParams,
    backprop_step,
    decode,
    encode,
    gate_record,
    generate,
    init_params,
    loss,
    loss_and_gradients,
    reparameterize,
    train,
)
from energy_sched.synth.preprocessing import FeatureSchema, SyntheticRecord
from energy_sched.utils import GATE_LEVELS, SchedulerKind

TOY_HYPER = VaeHyper(latent_dim=2, encoder_widths=(3,), decoder_widths=(3,), gamma=0.1, seed=3)


def _toy_schema():
    return FeatureSchema(
        categorical_maps={},
        numeric_ranges={
            "tat_ms": (300.0, 1000.0),
            "power_w": (900.0, 4000.0),
            "energy_kwh": (10.0, 70.0),
            "reduction": (0.0, 0.2),
        },
        feature_order=["tat_ms", "power_w", "energy_kwh", "reduction"],
    )


def _zero_params(input_dim, hyper):
    params = init_params(input_dim, hyper, np.random.default_rng(0))
    return VaeParams({k: np.zeros_like(v) for k, v in params.arrays.items()}, input_dim, hyper.latent_dim)


def test_zero_network():
    params = _zero_params(5, TOY_HYPER)
    mu, logvar = encode(np.linspace(0, 1, 5), params)
    np.testing.assert_array_equal(mu, [0.0, 0.0])
    np.testing.assert_array_equal(logvar, [0.0, 0.0])
    np.testing.assert_array_equal(decode(np.array([0.3, -2.0]), params), np.full(5, 0.5))


def test_encode_decode_are_deterministic_and_bounded(dataset, trained):
    _, params, _ = trained
    mu, logvar = encode(dataset.matrix, params)
    assert np.all(np.isfinite(mu)) and np.all(np.isfinite(logvar))
    again, _ = encode(dataset.matrix, params)
    np.testing.assert_array_equal(mu, again)

    z = np.random.default_rng(1).standard_normal((100, params.latent_dim)) * 5
    xhat = decode(z, params)
    assert np.all((xhat >= 0) & (xhat <= 1))
    np.testing.assert_array_equal(xhat, decode(z, params))


def test_shape_errors():
    params = init_params(4, TOY_HYPER, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        encode(np.zeros(5), params)
    with pytest.raises(ShapeError):
        decode(np.zeros(3), params)
    with pytest.raises(ShapeError):
        reparameterize(np.zeros(2), np.zeros(2), np.zeros(3))


def test_reparameterize():
    mu = np.array([0.5, -1.0])
    np.testing.assert_array_equal(reparameterize(mu, np.zeros(2), np.zeros(2)), mu)
    np.testing.assert_array_equal(reparameterize(mu, np.zeros(2), np.ones(2)), mu + 1)

    n = 100_000
    logvar = np.array([0.4, -0.6])
    eps = np.random.default_rng(9).standard_normal((n, 2))
    z = reparameterize(np.tile(mu, (n, 1)), np.tile(logvar, (n, 1)), eps)
    sigma = np.exp(0.5 * logvar)
    assert np.all(np.abs(z.mean(axis=0) - mu) < 3 * sigma / np.sqrt(n))


def test_loss_closed_forms():
    x = np.array([[0.2, 0.4, 0.6]])
    perfect = loss(x, x, np.zeros((1, 2)), np.zeros((1, 2)), np.zeros(1))
    assert perfect.total == 0.0

    kl_only = loss(x, x, np.array([[1.0]]), np.array([[0.0]]), np.zeros(1))
    assert kl_only.kl == pytest.approx(0.5)

    rng = np.random.default_rng(4)
    for _ in range(50):
        b = loss(x, x, rng.normal(size=(1, 4)), rng.normal(size=(1, 4)), np.zeros(1))
        assert b.kl >= 0


def test_loss_identity():
    rng = np.random.default_rng(2)
    x, xhat = rng.random((8, 4)), rng.random((8, 4))
    b = loss(x, xhat, rng.normal(size=(8, 2)), rng.normal(size=(8, 2)), rng.random(8), beta=0.7, gamma=0.3)
    assert b.total == b.recon + 0.7 * b.kl + 0.3 * b.cfd


def test_energy_consistency_penalty():
    schema = _toy_schema()
    constraint = EnergyConsistency(schema, energy_scale=1e5)
    # 2000 W for 500 ms is 27.78 reported kWh
    xhat = np.array([[(500 - 300) / 700, (2000 - 900) / 3100, (30 - 10) / 60, 0.5]])
    assert constraint.penalty(xhat)[0] == pytest.approx(abs(30.0 - 2000 * 500 / 1000 / 3.6e6 * 1e5))

    with pytest.raises(SchemaError):
        EnergyConsistency(FeatureSchema({}, {"tat_ms": (0.0, 1.0)}, ["tat_ms"]))


def test_gradients_match_finite_differences():
    constraint = EnergyConsistency(_toy_schema(), energy_scale=1e5)
    rng = np.random.default_rng(11)
    params = init_params(4, TOY_HYPER, rng)
    batch = rng.random((5, 4))
    eps = rng.standard_normal((5, TOY_HYPER.latent_dim))

    _, grads = loss_and_gradients(batch, params, TOY_HYPER, eps, constraint)
    h = 1e-6
    for name, array in params.arrays.items():
        numeric = np.zeros_like(array)
        for idx in np.ndindex(array.shape):
            original = array[idx]
            array[idx] = original + h
            up = loss_and_gradients(batch, params, TOY_HYPER, eps, constraint)[0].total
            array[idx] = original - h
            down = loss_and_gradients(batch, params, TOY_HYPER, eps, constraint)[0].total
            array[idx] = original
            numeric[idx] = (up - down) / (2 * h)
        scale = max(np.max(np.abs(grads[name]) + np.abs(numeric)), 1e-8)
        assert np.max(np.abs(grads[name] - numeric)) / scale < 1e-4, name


def test_zero_learning_rate_leaves_params_unchanged(dataset):
    hyper = replace(TOY_HYPER, learning_rate=0.0)
    params = init_params(dataset.schema.k, hyper, np.random.default_rng(0))
    batch = dataset.train[:8]
    eps = np.random.default_rng(1).standard_normal((8, hyper.latent_dim))
    updated, _ = backprop_step(batch, params, hyper, eps)
    for name, array in params.arrays.items():
        np.testing.assert_array_equal(updated.arrays[name], array)


def test_empty_batch(dataset):
    params = init_params(dataset.schema.k, TOY_HYPER, np.random.default_rng(0))
    with pytest.raises(EmptyDatasetError):
        backprop_step(dataset.train[:0], params, TOY_HYPER, np.zeros((0, TOY_HYPER.latent_dim)))


def test_repeated_batch_loss_trends_down(dataset):
    hyper = VaeHyper(seed=0)
    params = init_params(dataset.schema.k, hyper, np.random.default_rng(0))
    optimizer = OPTIMIZER_DICT["adam"](hyper.learning_rate)
    batch = dataset.train[:16]
    eps = np.zeros((16, hyper.latent_dim))
    losses = []
    for _ in range(200):
        params, b = backprop_step(batch, params, hyper, eps, optimizer)
        losses.append(b.total)
    for i in range(len(losses) - 50):
        assert losses[i + 50] <= losses[i]


def test_training_halves_the_loss(trained):
    hyper, params, history = trained
    assert len(history) == hyper.epochs == 100
    assert [row["epoch"] for row in history] == list(range(1, 101))
    assert set(history[0]) == set(HISTORY_COLUMNS)
    assert history[-1]["total"] <= 0.5 * history[0]["total"]
    assert params.is_finite()
    for row in history:
        assert row["total"] == pytest.approx(row["recon"] + hyper.beta * row["kl"] + hyper.gamma * row["cfd"])


def test_training_is_deterministic(dataset):
    hyper = VaeHyper(epochs=3, seed=12)
    _, first = train(dataset, hyper)
    _, second = train(dataset, hyper)
    assert first == second


def test_zero_gamma_is_a_plain_vae(dataset):
    hyper = VaeHyper(epochs=2, gamma=0.0, seed=12)
    _, history = train(dataset, hyper)
    assert all(row["cfd"] == 0.0 for row in history)

    params = init_params(dataset.schema.k, hyper, np.random.default_rng(0))
    eps = np.random.default_rng(1).standard_normal((4, hyper.latent_dim))
    b, _ = loss_and_gradients(dataset.train[:4], params, hyper, eps)
    assert b.cfd == 0.0
    assert b.total == b.recon + hyper.beta * b.kl


def test_gate_record_order():
    node = LumpedNode()
    limits = ThermalLimits()
    hot = gate_record(SyntheticRecord(SchedulerKind.SAS, "WF-1", 0.30, 300.0, 9000.0, 20.0), limits, node)
    assert not hot.accepted and hot.rejection_reason == REJECT_THERMAL

    out = gate_record(SyntheticRecord(SchedulerKind.SAS, "WF-1", 0.02, 300.0, 2000.0, 20.0), limits, node)
    assert not out.accepted and out.rejection_reason == REJECT_RANGE

    ok = gate_record(SyntheticRecord(SchedulerKind.SAS, "WF-1", 0.137, 300.0, 2000.0, 20.0), limits, node)
    assert ok.accepted and ok.rejection_reason is None
    assert ok.reduction == 0.15
    assert ok.decoded_reduction == 0.137


def test_generated_records_pass_the_gates(dataset, trained):
    _, params, _ = trained
    limits, node = ThermalLimits(), LumpedNode()
    records = generate(params, dataset.schema, 60, limits, node, seed=8, chunk_size=32)
    accepted = [r for r in records if r.accepted]
    assert len(accepted) == 60
    for r in accepted:
        assert 0.05 <= r.decoded_reduction + 1e-9 and r.decoded_reduction <= 0.20 + 1e-9
        assert r.reduction in GATE_LEVELS
        assert check_thermal_feasibility(r.power_w, limits, node)
    for r in records:
        if not r.accepted:
            assert r.rejection_reason in (REJECT_THERMAL, REJECT_RANGE)


def test_generation_is_deterministic_across_workers(dataset, trained):
    _, params, _ = trained
    limits, node = ThermalLimits(), LumpedNode()
    serial = generate(params, dataset.schema, 40, limits, node, seed=8, chunk_size=16, workers=1)
    parallel = generate(params, dataset.schema, 40, limits, node, seed=8, chunk_size=16, workers=3)
    assert serial == parallel


def test_unsatisfiable_limits_starve(dataset, trained):
    _, params, _ = trained
    limits = ThermalLimits(max_core_temp=295.2, max_power=1.0)
    with pytest.raises(GenerationStarvationError) as excinfo:
        generate(params, dataset.schema, 10, limits, LumpedNode(), seed=8, budget_factor=5)
    assert excinfo.value.accepted == 0
    assert excinfo.value.draws == 50
    assert excinfo.value.exit_code == 5


def test_model_artifact_round_trip(tmp_path, dataset, trained):
    hyper, params, _ = trained
    path = tmp_path / "model.json"
    save_model(path, params, hyper, dataset.schema, 1e5)
    artifact = load_model(path)
    assert artifact.hyper == hyper
    assert artifact.schema.feature_order == dataset.schema.feature_order
    z = np.random.default_rng(0).standard_normal((5, params.latent_dim))
    np.testing.assert_array_equal(decode(z, artifact.params), decode(z, params))


def test_model_artifact_rejects_other_json(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"format": "something-else"}', encoding="utf-8")
    with pytest.raises(SchemaError):
        load_model(path)
