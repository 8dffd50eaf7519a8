"""The gated multi-branch classifier.

One encoder branch per (sensor, rate candidate) turns a resampled window into
a fixed-width feature vector; a per-sensor rate gate and a global sensor gate
blend branch features with softmax weights that are themselves trainable.
After training, those weights are the importance scores that drive pruning
and rate selection.

Encoder stack per branch (valid convolutions, stride 1):
    conv -> relu -> bn -> conv -> relu -> bn -> conv -> relu -> global max pool
followed by a shared two-dense-layer classifier on the fused features.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, InputError, ShapeError, StateError
from .resample import adaptive_kernel, plan_resample

__all__ = [
    "SensorConfig",
    "ModelConfig",
    "GateLayer",
    "Branch",
    "CossModel",
    "build_model",
    "rate_fusion",
    "sensor_fusion",
    "forward",
    "gate_weights",
]

N_CONV_LAYERS = 3


@dataclass(frozen=True)
class SensorConfig:
    """One physical sensor: channel count, native rate, and rate candidates."""

    sensor_id: str
    channels: int
    f_original: float
    rate_candidates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "f_original", float(self.f_original))
        object.__setattr__(self, "rate_candidates", tuple(float(r) for r in self.rate_candidates))
        if not self.sensor_id:
            raise ConfigError("sensor_id must be a non-empty string")
        if self.channels < 1:
            raise ConfigError(f"sensor {self.sensor_id}: channels must be >= 1")
        if self.f_original <= 0:
            raise ConfigError(f"sensor {self.sensor_id}: f_original must be positive")
        if not self.rate_candidates:
            raise ConfigError(f"sensor {self.sensor_id}: rate_candidates must be non-empty")
        for r in self.rate_candidates:
            if r <= 0 or r > self.f_original:
                raise ConfigError(
                    f"sensor {self.sensor_id}: rate candidate {r} Hz outside (0, {self.f_original}]"
                )
        diffs = np.diff(self.rate_candidates)
        if len(diffs) and not np.all(diffs < 0):
            raise ConfigError(
                f"sensor {self.sensor_id}: rate_candidates must be strictly decreasing"
            )

    def to_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "channels": self.channels,
            "f_original": self.f_original,
            "rate_candidates": list(self.rate_candidates),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorConfig":
        return cls(
            sensor_id=d["sensor_id"],
            channels=int(d["channels"]),
            f_original=d["f_original"],
            rate_candidates=tuple(d["rate_candidates"]),
        )


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to build the network reproducibly."""

    sensors: tuple[SensorConfig, ...]
    window_seconds: float
    ks_original: int
    num_classes: int
    filters: int = 100
    classifier_hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if not self.sensors:
            raise ConfigError("model needs at least one sensor")
        ids = [s.sensor_id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate sensor ids in config: {ids}")
        if self.window_seconds <= 0:
            raise ConfigError("window_seconds must be positive")
        if self.ks_original < 1:
            raise ConfigError("ks_original must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.filters < 1 or self.classifier_hidden < 1:
            raise ConfigError("filters and classifier_hidden must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for s in self.sensors:
            wl = self.window_len(s)
            for r in s.rate_candidates:
                plan = plan_resample(s.f_original, r, wl)
                ks = adaptive_kernel(self.ks_original, s.f_original, r)
                feat_len = plan.target_len - N_CONV_LAYERS * (ks - 1)
                if feat_len < 1:
                    raise ConfigError(
                        f"sensor {s.sensor_id} at {r} Hz: window of {plan.target_len} samples "
                        f"collapses below 1 after {N_CONV_LAYERS} convolutions with kernel {ks}"
                    )

    def window_len(self, sensor: SensorConfig) -> int:
        return int(round(self.window_seconds * sensor.f_original))

    @property
    def branch_count(self) -> int:
        return sum(len(s.rate_candidates) for s in self.sensors)

    def sensor(self, sensor_id: str) -> SensorConfig:
        for s in self.sensors:
            if s.sensor_id == sensor_id:
                return s
        raise InputError(f"unknown sensor id {sensor_id!r}")

    def to_dict(self) -> dict:
        return {
            "sensors": [s.to_dict() for s in self.sensors],
            "window_seconds": self.window_seconds,
            "ks_original": self.ks_original,
            "num_classes": self.num_classes,
            "filters": self.filters,
            "classifier_hidden": self.classifier_hidden,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            sensors=tuple(SensorConfig.from_dict(s) for s in d["sensors"]),
            window_seconds=float(d["window_seconds"]),
            ks_original=int(d["ks_original"]),
            num_classes=int(d["num_classes"]),
            filters=int(d.get("filters", 100)),
            classifier_hidden=int(d.get("classifier_hidden", 128)),
            seed=int(d.get("seed", 0)),
        )


class GateLayer:
    """A selection layer: one trainable score per candidate, softmax-normalized.

    Pruning deactivates entries; the softmax then renormalizes over the
    survivors, preserving the convex-combination semantics.
    """

    def __init__(self, labels, name: str):
        self.labels = tuple(labels)
        if not self.labels:
            raise ConfigError(f"gate {name}: needs at least one candidate")
        self.alphas = nn.Parameter(np.zeros(len(self.labels)), name)
        self.active = np.ones(len(self.labels), dtype=bool)
        self.name = name

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def active_labels(self) -> list:
        return [self.labels[i] for i in self.active_indices()]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def is_active(self, label) -> bool:
        return bool(self.active[self.labels.index(label)])

    def deactivate(self, label) -> None:
        i = self.labels.index(label)
        if not self.active[i]:
            raise StateError(f"gate {self.name}: {label!r} is already pruned")
        if self.n_active == 1:
            raise StateError(f"gate {self.name}: cannot prune the last active candidate")
        self.active[i] = False

    def weights_tensor(self) -> nn.Tensor:
        """Softmax over the active scores, as a graph node."""
        if self.n_active == 0:
            raise StateError(f"gate {self.name}: empty active set")
        if self.n_active == len(self.labels):
            return nn.softmax(self.alphas)
        return nn.softmax(nn.select(self.alphas, self.active_indices()))

    def scores(self) -> dict:
        """Plain softmax weight scores over active candidates, keyed by label."""
        idx = self.active_indices()
        a = self.alphas.data[idx]
        e = np.exp(a - a.max())
        w = e / e.sum()
        return {self.labels[i]: float(w[j]) for j, i in enumerate(idx)}


class Branch:
    """Encoder for one (sensor, rate) input variant."""

    def __init__(self, sensor: SensorConfig, rate: float, cfg: ModelConfig, rng: np.random.Generator):
        self.sensor_id = sensor.sensor_id
        self.rate = float(rate)
        self.channels = sensor.channels
        self.plan = plan_resample(sensor.f_original, rate, cfg.window_len(sensor))
        self.ks = adaptive_kernel(cfg.ks_original, sensor.f_original, rate)
        f = cfg.filters
        name = f"branches/{sensor.sensor_id}/{self.rate!r}"

        def conv_init(c_out, c_in, ks):
            std = np.sqrt(2.0 / (c_in * ks))
            return rng.normal(0.0, std, size=(c_out, c_in, ks))

        self.conv1_w = nn.Parameter(conv_init(f, sensor.channels, self.ks), f"{name}/conv1/weight")
        self.conv1_b = nn.Parameter(np.zeros(f), f"{name}/conv1/bias")
        self.bn1 = nn.BatchNormState(f, name=f"{name}/bn1")
        self.conv2_w = nn.Parameter(conv_init(f, f, self.ks), f"{name}/conv2/weight")
        self.conv2_b = nn.Parameter(np.zeros(f), f"{name}/conv2/bias")
        self.bn2 = nn.BatchNormState(f, name=f"{name}/bn2")
        self.conv3_w = nn.Parameter(conv_init(f, f, self.ks), f"{name}/conv3/weight")
        self.conv3_b = nn.Parameter(np.zeros(f), f"{name}/conv3/bias")

    def conv_lengths(self) -> list[int]:
        """Temporal lengths after each of the three convolutions."""
        lens = []
        n = self.plan.target_len
        for _ in range(N_CONV_LAYERS):
            n = n - self.ks + 1
            lens.append(n)
        return lens

    def forward(self, x: nn.Tensor) -> nn.Tensor:
        h = nn.relu(nn.conv1d(x, self.conv1_w, self.conv1_b))
        h = nn.batch_norm(h, self.bn1)
        h = nn.relu(nn.conv1d(h, self.conv2_w, self.conv2_b))
        h = nn.batch_norm(h, self.bn2)
        h = nn.relu(nn.conv1d(h, self.conv3_w, self.conv3_b))
        return nn.global_max_pool(h)

    def parameters(self) -> list[nn.Parameter]:
        return [
            self.conv1_w, self.conv1_b, *self.bn1.parameters(),
            self.conv2_w, self.conv2_b, *self.bn2.parameters(),
            self.conv3_w, self.conv3_b,
        ]

    def bn_states(self) -> list[nn.BatchNormState]:
        return [self.bn1, self.bn2]


def _entropy(s: str) -> int:
    return int.from_bytes(s.encode("utf-8"), "little")


class CossModel:
    """Branches + gates + classifier, with activation masks for pruning.

    Branch parameters are seeded per sensor, so permuting sensor order in the
    config yields the same per-sensor weights.  Gate scores start at zero
    (uniform weights).  Deactivated branches and sensors contribute nothing
    to the forward pass or to cost accounting.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        self.branches: dict[str, dict[float, Branch]] = {}
        self.rate_gates: dict[str, GateLayer] = {}
        for sensor in config.sensors:
            seq = np.random.SeedSequence([config.seed, _entropy(sensor.sensor_id)])
            rngs = [np.random.default_rng(s) for s in seq.spawn(len(sensor.rate_candidates))]
            self.branches[sensor.sensor_id] = {
                float(r): Branch(sensor, r, config, rng)
                for r, rng in zip(sensor.rate_candidates, rngs)
            }
            self.rate_gates[sensor.sensor_id] = GateLayer(
                sensor.rate_candidates, f"rate_gates/{sensor.sensor_id}"
            )
        self.sensor_gate = GateLayer([s.sensor_id for s in config.sensors], "sensor_gate")

        crng = np.random.default_rng(np.random.SeedSequence([config.seed, _entropy("classifier")]))
        f, h, c = config.filters, config.classifier_hidden, config.num_classes
        self.fc1_w = nn.Parameter(crng.normal(0.0, np.sqrt(2.0 / f), size=(h, f)), "classifier/fc1/weight")
        self.fc1_b = nn.Parameter(np.zeros(h), "classifier/fc1/bias")
        self.fc2_w = nn.Parameter(crng.normal(0.0, np.sqrt(1.0 / h), size=(c, h)), "classifier/fc2/weight")
        self.fc2_b = nn.Parameter(np.zeros(c), "classifier/fc2/bias")
        self.training = True

    # -- activation masks ---------------------------------------------------

    def active_sensors(self) -> list[str]:
        return self.sensor_gate.active_labels()

    def active_rates(self, sensor_id: str) -> list[float]:
        return self.rate_gates[sensor_id].active_labels()

    def sensor_is_active(self, sensor_id: str) -> bool:
        if sensor_id not in self.rate_gates:
            raise InputError(f"unknown sensor id {sensor_id!r}")
        return self.sensor_gate.is_active(sensor_id)

    def active_branches(self) -> list[tuple[str, float]]:
        return [
            (sid, r) for sid in self.active_sensors() for r in self.active_rates(sid)
        ]

    # -- parameter access ---------------------------------------------------

    def named_parameters(self) -> dict[str, nn.Parameter]:
        """Active (surviving) parameters only, in a stable order."""
        out: dict[str, nn.Parameter] = {}
        for sid in self.active_sensors():
            for r in self.active_rates(sid):
                for p in self.branches[sid][r].parameters():
                    out[p.name] = p
        for sid in self.active_sensors():
            out[self.rate_gates[sid].alphas.name] = self.rate_gates[sid].alphas
        out[self.sensor_gate.alphas.name] = self.sensor_gate.alphas
        for p in (self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b):
            out[p.name] = p
        return out

    def parameters(self) -> list[nn.Parameter]:
        return list(self.named_parameters().values())

    def bn_states(self) -> list[nn.BatchNormState]:
        states = []
        for sid in self.active_sensors():
            for r in self.active_rates(sid):
                states.extend(self.branches[sid][r].bn_states())
        return states

    def all_bn_states(self) -> list[nn.BatchNormState]:
        return [st for per in self.branches.values() for b in per.values() for st in b.bn_states()]

    # -- mode switches ------------------------------------------------------

    def train(self) -> "CossModel":
        self.training = True
        for st in self.all_bn_states():
            st.training = True
        return self

    def eval(self) -> "CossModel":
        self.training = False
        for st in self.all_bn_states():
            st.training = False
        return self

    def copy(self) -> "CossModel":
        return copy.deepcopy(self)

    def forward(self, batch: dict) -> nn.Tensor:
        return forward(self, batch)


def build_model(cfg: ModelConfig) -> CossModel:
    """Construct the network described by ``cfg`` with seeded initialization."""
    return CossModel(cfg)


def rate_fusion(features: list[nn.Tensor], gate: GateLayer) -> nn.Tensor:
    """Blend one sensor's branch features with its gate's softmax weights.

    ``features`` must align with the gate's active candidates, in order.
    """
    if gate.n_active == 0:
        raise StateError(f"gate {gate.name}: empty active set")
    if len(features) != gate.n_active:
        raise ShapeError(
            f"gate {gate.name}: got {len(features)} feature tensors for {gate.n_active} active candidates"
        )
    return nn.weighted_sum(features, gate.weights_tensor())


def sensor_fusion(fused: list[nn.Tensor], gate: GateLayer) -> nn.Tensor:
    """Blend per-sensor fused features with the sensor gate's softmax weights."""
    return rate_fusion(fused, gate)


def forward(model: CossModel, batch: dict) -> nn.Tensor:
    """Logits for a batch: {sensor_id: {rate: array [b, channels, len]}}.

    Every active (sensor, rate) pair must be present, resampled to the
    branch's target length.
    """
    sensors = model.active_sensors()
    batch_size = None
    fused = []
    for sid in sensors:
        feats = []
        for r in model.active_rates(sid):
            per_sensor = batch.get(sid)
            x = None if per_sensor is None else per_sensor.get(r)
            if x is None:
                raise InputError(f"batch is missing input for branch ({sid}, {r} Hz)")
            branch = model.branches[sid][r]
            x = np.asarray(x)
            expect = (branch.channels, branch.plan.target_len)
            if x.ndim != 3 or x.shape[1:] != expect:
                raise ShapeError(
                    f"branch ({sid}, {r} Hz) expects [batch, {expect[0]}, {expect[1]}], got {x.shape}"
                )
            if batch_size is None:
                batch_size = x.shape[0]
            elif x.shape[0] != batch_size:
                raise ShapeError(f"inconsistent batch sizes: {x.shape[0]} vs {batch_size}")
            feats.append(branch.forward(nn.Tensor(x)))
        fused.append(rate_fusion(feats, model.rate_gates[sid]))
    mixed = sensor_fusion(fused, model.sensor_gate)
    hidden = nn.relu(nn.dense(mixed, model.fc1_w, model.fc1_b))
    return nn.dense(hidden, model.fc2_w, model.fc2_b)


def gate_weights(model: CossModel) -> dict:
    """Normalized weight scores: sensors and, per sensor, rate candidates."""
    return {
        "sensors": model.sensor_gate.scores(),
        "rates": {sid: model.rate_gates[sid].scores() for sid in model.active_sensors()},
    }
