"""Checkpoint serialization for trained models.

A checkpoint is a flat container (see `coss.container`) holding:

* ``meta``: format version, the full model config, and the activation masks;
* one ``param/<name>`` array per surviving parameter (float64);
* one ``buffer/<name>`` array per surviving batch-norm running statistic.

Only active parameters are stored, so the number of stored parameter
elements equals ``cost.param_count``.  Round-trips are bit-exact; two
checkpoints of identical models have identical bytes.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import container
from .errors import DataError
from .model import CossModel, ModelConfig, build_model

FORMAT_VERSION = 1

__all__ = ["save_model", "load_model", "model_bytes", "model_digest", "FORMAT_VERSION"]


def _named_buffers(model: CossModel) -> dict[str, np.ndarray]:
    out = {}
    for sid in model.active_sensors():
        for r in model.active_rates(sid):
            for st in model.branches[sid][r].bn_states():
                out[f"{st.name}/running_mean"] = st.running_mean
                out[f"{st.name}/running_var"] = st.running_var
    return out


def _active_alpha_values(gate) -> np.ndarray:
    return gate.alphas.data[gate.active_indices()]


def model_bytes(model: CossModel) -> bytes:
    """Serialized checkpoint bytes (deterministic for identical models)."""
    arrays: dict[str, np.ndarray] = {}
    for name, p in model.named_parameters().items():
        if name.startswith(("rate_gates/", "sensor_gate")):
            # gates store surviving scores only, matching the cost model
            gate = model.sensor_gate if name == "sensor_gate" else model.rate_gates[name.split("/")[1]]
            arrays[f"param/{name}"] = _active_alpha_values(gate)
        else:
            arrays[f"param/{name}"] = p.data
    for name, buf in _named_buffers(model).items():
        arrays[f"buffer/{name}"] = buf

    meta = {
        "format_version": FORMAT_VERSION,
        "kind": "model_checkpoint",
        "config": model.config.to_dict(),
        "active": {
            "sensors": {sid: bool(model.sensor_gate.is_active(sid)) for sid in model.sensor_gate.labels},
            "rates": {
                sid: {repr(r): bool(a) for r, a in zip(g.labels, g.active)}
                for sid, g in model.rate_gates.items()
            },
        },
    }
    return container.pack(meta, arrays)


def save_model(path, model: CossModel) -> None:
    Path(path).write_bytes(model_bytes(model))


def model_digest(model: CossModel) -> str:
    """SHA-256 of the serialized state; used for mutation/purity checks."""
    return hashlib.sha256(model_bytes(model)).hexdigest()


def load_model(path) -> CossModel:
    """Rebuild a model from a checkpoint; active state is restored bit-exactly."""
    meta, arrays = container.read(path)
    if meta.get("kind") != "model_checkpoint":
        raise DataError(f"{path}: not a model checkpoint")
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported checkpoint format version {meta.get('format_version')}"
        )
    config = ModelConfig.from_dict(meta["config"])
    model = build_model(config)

    # restore masks first so named_parameters() matches what was stored
    for sid, is_active in meta["active"]["sensors"].items():
        idx = model.sensor_gate.labels.index(sid)
        model.sensor_gate.active[idx] = is_active
    for sid, per_rate in meta["active"]["rates"].items():
        gate = model.rate_gates[sid]
        for rkey, is_active in per_rate.items():
            gate.active[gate.labels.index(float(rkey))] = is_active

    for name, p in model.named_parameters().items():
        key = f"param/{name}"
        if key not in arrays:
            raise DataError(f"{path}: checkpoint is missing {key}")
        stored = arrays[key]
        if name.startswith(("rate_gates/", "sensor_gate")):
            gate = model.sensor_gate if name == "sensor_gate" else model.rate_gates[name.split("/")[1]]
            idx = gate.active_indices()
            if stored.shape != (len(idx),):
                raise DataError(f"{path}: {key} has shape {stored.shape}, expected ({len(idx)},)")
            gate.alphas.data[idx] = stored
        else:
            if stored.shape != p.data.shape:
                raise DataError(f"{path}: {key} has shape {stored.shape}, expected {p.data.shape}")
            p.data[...] = stored
    for name, buf in _named_buffers(model).items():
        key = f"buffer/{name}"
        if key not in arrays:
            raise DataError(f"{path}: checkpoint is missing {key}")
        buf[...] = arrays[key]
    return model
