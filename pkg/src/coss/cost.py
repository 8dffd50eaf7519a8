"""Hardware-cost accounting: parameters, bytes, MACs per window, data rate.

MACs count the multiply-accumulates of the deployed arithmetic: convolutions,
dense layers, and the gate fusions.  Batch norm folds into the following
convolution at deployment, so it contributes no MACs; ReLU, pooling and the
gate softmax are comparisons/exponentials, not MACs.  Model bytes are
reported both at 4 bytes/parameter (deployment) and 8 bytes/parameter
(training precision).

All functions are read-only over the model and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError
from .model import Branch, CossModel, SensorConfig

__all__ = [
    "BranchCost",
    "CostSnapshot",
    "ReductionReport",
    "conv_param_count",
    "dense_param_count",
    "conv_mac_count",
    "dense_mac_count",
    "param_count",
    "macs_per_window",
    "data_rate",
    "model_data_rate",
    "cost_snapshot",
    "reduction_report",
]

BYTES_DEPLOY = 4
BYTES_TRAIN = 8


def conv_param_count(c_out: int, c_in: int, ks: int) -> int:
    return c_out * c_in * ks + c_out


def dense_param_count(d_out: int, d_in: int) -> int:
    return d_out * d_in + d_out


def conv_mac_count(c_in: int, c_out: int, ks: int, len_out: int) -> int:
    """Multiplies of one valid stride-1 conv applied to a single window."""
    return c_in * c_out * ks * len_out


def dense_mac_count(d_in: int, d_out: int) -> int:
    return d_in * d_out


def _branch_params(branch: Branch, filters: int) -> int:
    return (
        conv_param_count(filters, branch.channels, branch.ks)
        + conv_param_count(filters, filters, branch.ks) * 2
        + 2 * filters * 2  # two batch-norm layers, gamma+beta each
    )


def _branch_macs(branch: Branch, filters: int) -> int:
    lens = branch.conv_lengths()
    return (
        conv_mac_count(branch.channels, filters, branch.ks, lens[0])
        + conv_mac_count(filters, filters, branch.ks, lens[1])
        + conv_mac_count(filters, filters, branch.ks, lens[2])
    )


@dataclass(frozen=True)
class BranchCost:
    sensor_id: str
    rate: float
    params: int
    macs: int

    def to_dict(self) -> dict:
        return {"sensor_id": self.sensor_id, "rate": self.rate, "params": self.params, "macs": self.macs}


@dataclass(frozen=True)
class CostSnapshot:
    params: int
    bytes_deploy: int
    bytes_train: int
    macs_per_window: int
    data_rate: float
    branches: tuple[BranchCost, ...]
    gate_params: int
    classifier_params: int
    classifier_macs: int
    fusion_macs: int

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "bytes_deploy": self.bytes_deploy,
            "bytes_train": self.bytes_train,
            "macs_per_window": self.macs_per_window,
            "data_rate": self.data_rate,
            "branches": [b.to_dict() for b in self.branches],
            "gate_params": self.gate_params,
            "classifier_params": self.classifier_params,
            "classifier_macs": self.classifier_macs,
            "fusion_macs": self.fusion_macs,
        }


def _gate_param_count(model: CossModel) -> int:
    return sum(model.rate_gates[sid].n_active for sid in model.active_sensors()) + len(
        model.active_sensors()
    )


def _classifier_param_count(model: CossModel) -> int:
    cfg = model.config
    return dense_param_count(cfg.classifier_hidden, cfg.filters) + dense_param_count(
        cfg.num_classes, cfg.classifier_hidden
    )


def _classifier_macs(model: CossModel) -> int:
    cfg = model.config
    return dense_mac_count(cfg.filters, cfg.classifier_hidden) + dense_mac_count(
        cfg.classifier_hidden, cfg.num_classes
    )


def _fusion_macs(model: CossModel) -> int:
    cfg = model.config
    active = model.active_sensors()
    rate_terms = sum(model.rate_gates[sid].n_active for sid in active)
    return (rate_terms + len(active)) * cfg.filters


def param_count(model: CossModel) -> int:
    """Trainable parameters of the surviving network (matches checkpoint size)."""
    filters = model.config.filters
    total = sum(
        _branch_params(model.branches[sid][r], filters) for sid, r in model.active_branches()
    )
    return total + _gate_param_count(model) + _classifier_param_count(model)


def macs_per_window(model: CossModel) -> int:
    """Multiply-accumulates for one window of inference through the survivors."""
    filters = model.config.filters
    total = sum(_branch_macs(model.branches[sid][r], filters) for sid, r in model.active_branches())
    return total + _fusion_macs(model) + _classifier_macs(model)


def data_rate(selection: dict[str, float], sensors: list[SensorConfig]) -> float:
    """Samples/second acquired for a rate selection: sum of channels x Hz."""
    by_id = {s.sensor_id: s for s in sensors}
    total = 0.0
    for sid, rate in selection.items():
        if sid not in by_id:
            raise InputError(f"unknown sensor id {sid!r} in rate selection")
        total += by_id[sid].channels * float(rate)
    return total


def model_data_rate(model: CossModel) -> float:
    """Acquisition rate implied by the active branches.

    A sensor with several active rate candidates must still be sampled at the
    highest of them, so each active sensor contributes channels x max(active rates).
    """
    total = 0.0
    for sid in model.active_sensors():
        sensor = model.config.sensor(sid)
        total += sensor.channels * max(model.active_rates(sid))
    return total


def cost_snapshot(model: CossModel) -> CostSnapshot:
    filters = model.config.filters
    branches = tuple(
        BranchCost(
            sid,
            r,
            _branch_params(model.branches[sid][r], filters),
            _branch_macs(model.branches[sid][r], filters),
        )
        for sid, r in model.active_branches()
    )
    params = sum(b.params for b in branches) + _gate_param_count(model) + _classifier_param_count(model)
    macs = sum(b.macs for b in branches) + _fusion_macs(model) + _classifier_macs(model)
    return CostSnapshot(
        params=params,
        bytes_deploy=params * BYTES_DEPLOY,
        bytes_train=params * BYTES_TRAIN,
        macs_per_window=macs,
        data_rate=model_data_rate(model),
        branches=branches,
        gate_params=_gate_param_count(model),
        classifier_params=_classifier_param_count(model),
        classifier_macs=_classifier_macs(model),
        fusion_macs=_fusion_macs(model),
    )


@dataclass(frozen=True)
class ReductionReport:
    """Before/after cost and performance deltas, Table-style."""

    metric_before: float
    metric_after: float
    performance_reduction_points: float  # (before - after) * 100
    params_before: int
    params_after: int
    size_before_mb: float
    size_after_mb: float
    size_reduction_mb: float
    size_reduction_pct: float
    macs_before: int
    macs_after: int
    macs_reduction_pct: float
    data_rate_before: float
    data_rate_after: float
    data_rate_reduction_pct: float

    def size_summary(self) -> str:
        """'reduction/original (pct%)' in MB, mirroring the usual reporting style."""
        return f"{self.size_reduction_mb:.2f}/{self.size_before_mb:.2f} ({self.size_reduction_pct:.0f}%)"

    def to_dict(self) -> dict:
        return {
            "metric_before": self.metric_before,
            "metric_after": self.metric_after,
            "performance_reduction_points": self.performance_reduction_points,
            "params_before": self.params_before,
            "params_after": self.params_after,
            "size_before_mb": self.size_before_mb,
            "size_after_mb": self.size_after_mb,
            "size_reduction_mb": self.size_reduction_mb,
            "size_reduction_pct": self.size_reduction_pct,
            "size_summary": self.size_summary(),
            "macs_before": self.macs_before,
            "macs_after": self.macs_after,
            "macs_reduction_pct": self.macs_reduction_pct,
            "data_rate_before": self.data_rate_before,
            "data_rate_after": self.data_rate_after,
            "data_rate_reduction_pct": self.data_rate_reduction_pct,
        }


def _pct(before: float, after: float) -> float:
    return 100.0 * (before - after) / before if before else 0.0


def reduction_report(
    before: CostSnapshot, after: CostSnapshot, metric_before: float, metric_after: float
) -> ReductionReport:
    mb = BYTES_DEPLOY / 1e6
    return ReductionReport(
        metric_before=metric_before,
        metric_after=metric_after,
        performance_reduction_points=(metric_before - metric_after) * 100.0,
        params_before=before.params,
        params_after=after.params,
        size_before_mb=before.params * mb,
        size_after_mb=after.params * mb,
        size_reduction_mb=(before.params - after.params) * mb,
        size_reduction_pct=_pct(before.params, after.params),
        macs_before=before.macs_per_window,
        macs_after=after.macs_per_window,
        macs_reduction_pct=_pct(before.macs_per_window, after.macs_per_window),
        data_rate_before=before.data_rate,
        data_rate_after=after.data_rate,
        data_rate_reduction_pct=_pct(before.data_rate, after.data_rate),
    )
