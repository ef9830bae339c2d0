"""Physics-informed variational autoencoder with hand-written backpropagation.

The loss is reconstruction + beta * KL + gamma * energy consistency, where the
consistency term compares the decoded energy field against the energy implied
by the decoded power and turnaround fields.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from energy_sched.errors import (
    EmptyDatasetError,
    GenerationStarvationError,
    InvalidParameterError,
    SchemaError,
    ShapeError,
    TrainingDivergenceError,
)
from energy_sched.physics.energy_model import run_energy_kwh
from energy_sched.physics.thermal import cfd_penalty, check_thermal_feasibility
from energy_sched.scheduler.simulator import DEFAULT_ENERGY_SCALE
from energy_sched.synth.network import (
    OPTIMIZER_DICT,
    dense,
    glorot_uniform,
    mlp_backward,
    mlp_forward,
    sigmoid_backward,
    sigmoid_forward,
)
from energy_sched.synth.preprocessing import invert
from energy_sched.utils import in_gate, nearest_level

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "recon", "kl", "cfd", "total", "val_total"]

REJECT_THERMAL = "thermal_limit"
REJECT_RANGE = "reduction_out_of_range"


# ─── Data Classes ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class VaeHyper:
    latent_dim: int = 8
    encoder_widths: tuple = (64, 32, 16)
    decoder_widths: tuple = (16, 32, 64)
    beta: float = 1.0
    gamma: float = 0.1
    learning_rate: float = 5e-3
    batch_size: int = 16
    epochs: int = 100
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        object.__setattr__(self, "decoder_widths", tuple(int(w) for w in self.decoder_widths))
        if not self.encoder_widths or not self.decoder_widths:
            raise InvalidParameterError("encoder and decoder need at least one hidden layer")
        if any(w < 1 for w in self.encoder_widths + self.decoder_widths):
            raise InvalidParameterError("layer widths must be >= 1")
        if self.latent_dim < 1:
            raise InvalidParameterError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.beta < 0 or self.gamma < 0:
            raise InvalidParameterError("beta and gamma must be >= 0")
        if self.learning_rate < 0:
            raise InvalidParameterError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidParameterError("batch_size must be >= 1 and epochs >= 0")
        if self.optimizer not in OPTIMIZER_DICT:
            raise InvalidParameterError(
                f"unknown optimizer {self.optimizer!r}; choose from {sorted(OPTIMIZER_DICT)}"
            )

    def to_dict(self):
        data = asdict(self)
        data["encoder_widths"] = list(self.encoder_widths)
        data["decoder_widths"] = list(self.decoder_widths)
        return data


@dataclass
class VaeParams:
    """Named weight arrays: encoder.{i}, mu, logvar, decoder.{i} and decoder.out."""

    arrays: dict
    input_dim: int
    latent_dim: int

    def _stack(self, prefix):
        layers = []
        i = 0
        while f"{prefix}.{i}.W" in self.arrays:
            layers.append((self.arrays[f"{prefix}.{i}.W"], self.arrays[f"{prefix}.{i}.b"]))
            i += 1
        return layers

    @property
    def encoder(self):
        return self._stack("encoder")

    @property
    def decoder(self):
        return self._stack("decoder")

    def head(self, name):
        return self.arrays[f"{name}.W"], self.arrays[f"{name}.b"]

    def copy(self):
        return VaeParams({k: v.copy() for k, v in self.arrays.items()}, self.input_dim, self.latent_dim)

    def is_finite(self):
        return all(np.all(np.isfinite(v)) for v in self.arrays.values())


@dataclass(frozen=True)
class LossBreakdown:
    recon: float
    kl: float
    cfd: float
    total: float

    @classmethod
    def compose(cls, recon, kl, cfd, beta, gamma):
        return cls(recon=recon, kl=kl, cfd=cfd, total=recon + beta * kl + gamma * cfd)


class EnergyConsistency:
    """Gap between the decoded energy and power x turnaround, in reported kWh."""

    def __init__(self, schema, energy_scale=DEFAULT_ENERGY_SCALE):
        try:
            self.power_col = schema.column("power_w")
            self.tat_col = schema.column("tat_ms")
            self.energy_col = schema.column("energy_kwh")
        except SchemaError as e:
            raise SchemaError(f"energy consistency needs power_w, tat_ms and energy_kwh: {e}") from None
        self.power_lo, self.power_hi = schema.numeric_ranges["power_w"]
        self.tat_lo, self.tat_hi = schema.numeric_ranges["tat_ms"]
        self.energy_lo, self.energy_hi = schema.numeric_ranges["energy_kwh"]
        self.energy_scale = energy_scale
        # kWh per (W * ms)
        self.rate = run_energy_kwh(1.0, 1.0, energy_scale)

    def fields(self, xhat):
        power = self.power_lo + xhat[:, self.power_col] * (self.power_hi - self.power_lo)
        tat = self.tat_lo + xhat[:, self.tat_col] * (self.tat_hi - self.tat_lo)
        energy = self.energy_lo + xhat[:, self.energy_col] * (self.energy_hi - self.energy_lo)
        return power, tat, energy

    def penalty(self, xhat):
        power, tat, energy = self.fields(xhat)
        return cfd_penalty(energy, run_energy_kwh(power, tat, self.energy_scale))

    def gradient(self, xhat):
        """d(per-row penalty)/d(xhat)."""
        power, tat, energy = self.fields(xhat)
        sign = np.sign(run_energy_kwh(power, tat, self.energy_scale) - energy)
        grad = np.zeros_like(xhat)
        grad[:, self.power_col] = sign * self.rate * tat * (self.power_hi - self.power_lo)
        grad[:, self.tat_col] = sign * self.rate * power * (self.tat_hi - self.tat_lo)
        grad[:, self.energy_col] = -sign * (self.energy_hi - self.energy_lo)
        return grad


# ─── Network ──────────────────────────────────────────────────────────────────


def init_params(input_dim, hyper, rng):
    arrays = {}
    fan_in = input_dim
    for i, width in enumerate(hyper.encoder_widths):
        arrays[f"encoder.{i}.W"] = glorot_uniform(rng, fan_in, width)
        arrays[f"encoder.{i}.b"] = np.zeros(width)
        fan_in = width
    for head in ("mu", "logvar"):
        arrays[f"{head}.W"] = glorot_uniform(rng, fan_in, hyper.latent_dim)
        arrays[f"{head}.b"] = np.zeros(hyper.latent_dim)
    fan_in = hyper.latent_dim
    for i, width in enumerate(hyper.decoder_widths):
        arrays[f"decoder.{i}.W"] = glorot_uniform(rng, fan_in, width)
        arrays[f"decoder.{i}.b"] = np.zeros(width)
        fan_in = width
    arrays["decoder.out.W"] = glorot_uniform(rng, fan_in, input_dim)
    arrays["decoder.out.b"] = np.zeros(input_dim)
    return VaeParams(arrays=arrays, input_dim=input_dim, latent_dim=hyper.latent_dim)


def _as_batch(x, width, what):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != width:
        raise ShapeError(f"{what} has shape {x.shape}, expected last dimension {width}")
    return batch, single


def _encode_batch(x, params):
    trunk = mlp_forward(x, params.encoder)
    h = trunk[-1]
    mu = dense(h, *params.head("mu"))
    logvar = dense(h, *params.head("logvar"))
    return mu, logvar, trunk


def _decode_batch(z, params):
    hidden = mlp_forward(z, params.decoder)
    xhat = sigmoid_forward(dense(hidden[-1], *params.head("decoder.out")))
    return xhat, hidden


def encode(x, params):
    batch, single = _as_batch(x, params.input_dim, "input")
    mu, logvar, _ = _encode_batch(batch, params)
    return (mu[0], logvar[0]) if single else (mu, logvar)


def reparameterize(mu, logvar, eps):
    mu, logvar, eps = (np.asarray(a, dtype=np.float64) for a in (mu, logvar, eps))
    if not mu.shape == logvar.shape == eps.shape:
        raise ShapeError(f"mu {mu.shape}, logvar {logvar.shape} and eps {eps.shape} differ")
    return mu + np.exp(0.5 * logvar) * eps


def decode(z, params):
    batch, single = _as_batch(z, params.latent_dim, "latent")
    xhat, _ = _decode_batch(batch, params)
    return xhat[0] if single else xhat


def loss(x, xhat, mu, logvar, cfd_term, beta=1.0, gamma=0.1):
    """Batch-mean loss; reconstruction sums over features and KL over latent dims."""
    x, xhat = np.atleast_2d(x), np.atleast_2d(xhat)
    mu, logvar = np.atleast_2d(mu), np.atleast_2d(logvar)
    if x.shape != xhat.shape or mu.shape != logvar.shape or len(mu) != len(x):
        raise ShapeError("inconsistent shapes passed to loss")
    recon = float(np.mean(np.sum((x - xhat) ** 2, axis=1)))
    kl = float(np.mean(0.5 * np.sum(mu**2 + np.exp(logvar) - 1.0 - logvar, axis=1)))
    cfd = float(np.mean(cfd_term))
    return LossBreakdown.compose(recon, kl, cfd, beta, gamma)


def loss_and_gradients(batch, params, hyper, eps, constraint=None):
    """Forward pass, loss and analytic gradients for every array in `params`."""
    x, _ = _as_batch(batch, params.input_dim, "batch")
    eps = np.asarray(eps, dtype=np.float64).reshape(len(x), params.latent_dim)
    n = len(x)
    gamma = hyper.gamma if constraint is not None else 0.0

    mu, logvar, trunk = _encode_batch(x, params)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    xhat, hidden = _decode_batch(z, params)
    cfd_rows = constraint.penalty(xhat) if constraint is not None else np.zeros(n)
    breakdown = loss(x, xhat, mu, logvar, cfd_rows, hyper.beta, gamma)

    grads = {}
    d_xhat = 2.0 * (xhat - x) / n
    if constraint is not None:
        d_xhat = d_xhat + gamma * constraint.gradient(xhat) / n
    d_out = sigmoid_backward(d_xhat, xhat)
    grads["decoder.out.W"] = hidden[-1].T @ d_out
    grads["decoder.out.b"] = d_out.sum(axis=0)
    dec_grads, d_z = mlp_backward(d_out @ params.arrays["decoder.out.W"].T, params.decoder, hidden)
    for i, (dw, db) in enumerate(dec_grads):
        grads[f"decoder.{i}.W"], grads[f"decoder.{i}.b"] = dw, db

    d_mu = d_z + hyper.beta * mu / n
    d_logvar = d_z * eps * 0.5 * sigma + hyper.beta * 0.5 * (np.exp(logvar) - 1.0) / n
    h = trunk[-1]
    grads["mu.W"], grads["mu.b"] = h.T @ d_mu, d_mu.sum(axis=0)
    grads["logvar.W"], grads["logvar.b"] = h.T @ d_logvar, d_logvar.sum(axis=0)
    d_h = d_mu @ params.arrays["mu.W"].T + d_logvar @ params.arrays["logvar.W"].T
    enc_grads, _ = mlp_backward(d_h, params.encoder, trunk)
    for i, (dw, db) in enumerate(enc_grads):
        grads[f"encoder.{i}.W"], grads[f"encoder.{i}.b"] = dw, db
    return breakdown, grads


def backprop_step(batch, params, hyper, eps, optimizer=None, constraint=None):
    """One update; returns (new params, loss before the update)."""
    if len(batch) == 0:
        raise EmptyDatasetError("cannot take a step on an empty batch")
    breakdown, grads = loss_and_gradients(batch, params, hyper, eps, constraint)
    if not math.isfinite(breakdown.total) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise TrainingDivergenceError(last_finite_loss=None, epoch=0, step=0)
    if optimizer is None:
        optimizer = OPTIMIZER_DICT[hyper.optimizer](hyper.learning_rate)
    arrays = optimizer.step(params.arrays, grads)
    return VaeParams(arrays, params.input_dim, params.latent_dim), breakdown


def evaluate(matrix, params, hyper, constraint=None):
    """Loss with z = mu, used for the validation split."""
    x, _ = _as_batch(matrix, params.input_dim, "matrix")
    mu, logvar, _ = _encode_batch(x, params)
    xhat, _ = _decode_batch(mu, params)
    gamma = hyper.gamma if constraint is not None else 0.0
    cfd_rows = constraint.penalty(xhat) if constraint is not None else np.zeros(len(x))
    return loss(x, xhat, mu, logvar, cfd_rows, hyper.beta, gamma)


# ─── Training ─────────────────────────────────────────────────────────────────


def train(dataset, hyper, energy_scale=DEFAULT_ENERGY_SCALE, progress=False):
    """Minibatch training; returns (params, per-epoch history rows)."""
    train_x = dataset.train
    if len(train_x) == 0:
        raise EmptyDatasetError("training split is empty")
    rng = np.random.default_rng(hyper.seed)
    params = init_params(dataset.schema.k, hyper, rng)
    optimizer = OPTIMIZER_DICT[hyper.optimizer](hyper.learning_rate)
    constraint = EnergyConsistency(dataset.schema, energy_scale) if hyper.gamma > 0 else None
    val_x = dataset.val

    history = []
    last_finite = None
    for epoch in tqdm(range(1, hyper.epochs + 1), desc="train", disable=not progress):
        order = rng.permutation(len(train_x))
        sums = np.zeros(4)
        for step, start in enumerate(range(0, len(order), hyper.batch_size)):
            batch = train_x[order[start:start + hyper.batch_size]]
            eps = rng.standard_normal((len(batch), hyper.latent_dim))
            try:
                params, lb = backprop_step(batch, params, hyper, eps, optimizer, constraint)
            except TrainingDivergenceError:
                raise TrainingDivergenceError(last_finite, epoch, step) from None
            last_finite = lb.total
            sums += len(batch) * np.array([lb.recon, lb.kl, lb.cfd, lb.total])
        recon, kl, cfd, total = sums / len(train_x)
        val_total = evaluate(val_x, params, hyper, constraint).total if len(val_x) else math.nan
        history.append({
            "epoch": epoch, "recon": recon, "kl": kl, "cfd": cfd, "total": total, "val_total": val_total,
        })
        logger.debug("epoch %d: total %.5f (recon %.5f kl %.5f cfd %.5f) val %.5f",
                      epoch, total, recon, kl, cfd, val_total)
    if history:
        logger.info("trained %d epochs: loss %.4f -> %.4f", hyper.epochs, history[0]["total"], history[-1]["total"])
    return params, history


def write_loss_history(path, history):
    frame = pd.DataFrame(history, columns=HISTORY_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.8f", lineterminator="\n")


# ─── Generation ───────────────────────────────────────────────────────────────


def gate_record(record, limits, node):
    """Thermal check first, then the reduction range; mutates and returns `record`."""
    if not check_thermal_feasibility(max(record.power_w, 0.0), limits, node):
        record.accepted, record.rejection_reason = False, REJECT_THERMAL
    elif not in_gate(record.decoded_reduction):
        record.accepted, record.rejection_reason = False, REJECT_RANGE
    else:
        record.accepted, record.rejection_reason = True, None
        record.reduction = nearest_level(record.decoded_reduction)
    return record


def _draw_chunk(params, schema, limits, node, seed, chunk, size):
    rng = np.random.default_rng([seed, chunk])
    xhat = decode(rng.standard_normal((size, params.latent_dim)), params)
    return [gate_record(invert(row, schema), limits, node) for row in xhat]


def generate(params, schema, n, limits, node, seed=0, chunk_size=256, workers=1,
             budget_factor=20, progress=False):
    """Draw until `n` records pass the gates; returns accepted and rejected records in draw order."""
    if n < 1:
        raise InvalidParameterError(f"sample count must be >= 1, got {n}")
    if chunk_size < 1 or workers < 1:
        raise InvalidParameterError("chunk_size and workers must be >= 1")
    budget = budget_factor * n
    sizes = [min(chunk_size, budget - start) for start in range(0, budget, chunk_size)]

    records = []
    accepted = 0
    draws = 0
    bar = tqdm(total=n, desc="generate", disable=not progress)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for wave in range(0, len(sizes), workers):
            chunks = range(wave, min(wave + workers, len(sizes)))
            results = pool.map(lambda c: _draw_chunk(params, schema, limits, node, seed, c, sizes[c]), chunks)
            for chunk_records in results:
                for record in chunk_records:
                    if accepted >= n:
                        break
                    records.append(record)
                    draws += 1
                    if record.accepted:
                        accepted += 1
                        bar.update(1)
            if accepted >= n:
                break
    bar.close()

    if accepted < n:
        raise GenerationStarvationError(accepted, n, draws)
    logger.info("generated %d accepted records from %d draws", accepted, draws)
    return records
