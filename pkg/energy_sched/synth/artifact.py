"""Model artifact: hyperparameters, feature schema and weights in one JSON file."""

import base64
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from energy_sched.errors import MissingArtifactError, SchemaError
from energy_sched.synth.pivae import VaeHyper, VaeParams
from energy_sched.synth.preprocessing import FeatureSchema

logger = logging.getLogger(__name__)

MODEL_FORMAT = "energy-sched-pivae"
MODEL_VERSION = 1


@dataclass
class ModelArtifact:
    params: VaeParams
    hyper: VaeHyper
    schema: FeatureSchema
    energy_scale: float


def encode_array(array):
    data = np.ascontiguousarray(array, dtype="<f8").tobytes()
    return {"shape": list(array.shape), "data": base64.b64encode(data).decode("ascii")}


def decode_array(entry):
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])


def save_model(path, params, hyper, schema, energy_scale):
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "activations": {"hidden": "tanh", "output": "sigmoid"},
        "hyper": hyper.to_dict(),
        "schema": schema.to_dict(),
        "energy_scale": energy_scale,
        "input_dim": params.input_dim,
        "latent_dim": params.latent_dim,
        "weights": {name: encode_array(arr) for name, arr in params.arrays.items()},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug("saved model to %s", path)


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "run `train` first")
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != MODEL_FORMAT:
        raise SchemaError(f"{path} is not a model artifact")
    try:
        arrays = {name: decode_array(entry) for name, entry in payload["weights"].items()}
        params = VaeParams(arrays, int(payload["input_dim"]), int(payload["latent_dim"]))
        hyper = VaeHyper(**payload["hyper"])
        schema = FeatureSchema.from_dict(payload["schema"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: malformed model artifact ({e})") from None
    if schema.k != params.input_dim:
        raise SchemaError(f"{path}: schema has {schema.k} features, weights expect {params.input_dim}")
    return ModelArtifact(params=params, hyper=hyper, schema=schema, energy_scale=payload.get("energy_scale", 1e5))
