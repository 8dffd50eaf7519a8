"""Weight-score ranking, progressive sensor pruning, and rate selection.

Everything here works on the trained gates: sensors (and rate branches) are
deactivated by mask, the surviving gate weights renormalize through the
softmax, and the pruned model is evaluated by direct inference, never by
retraining from scratch.  Metric "drops" are measured in percentage points
(a metric lives in [0, 1]; a drop of 2 points means 0.02).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSnapshot, cost_snapshot
from .data import PreparedData
from .errors import InputError, StateError
from .model import CossModel, gate_weights
from .train import TrainConfig, evaluate, fine_tune

__all__ = [
    "PruneStep",
    "PruneReport",
    "RateSelection",
    "rank_sensors",
    "prune_sensor",
    "select_rate",
    "progressive_prune",
    "prune_to_threshold",
    "prune_keep",
    "rate_probe",
    "select_rates_by_policy",
    "rate_sensitivity",
]


@dataclass
class PruneStep:
    removed_sensor: str
    remaining: tuple[str, ...]
    metric_before: float | None
    metric_after: float | None
    metric_after_finetune: float | None
    cost_after: CostSnapshot

    def to_dict(self) -> dict:
        return {
            "removed_sensor": self.removed_sensor,
            "remaining": list(self.remaining),
            "metric_before": self.metric_before,
            "metric_after": self.metric_after,
            "metric_after_finetune": self.metric_after_finetune,
            "cost_after": self.cost_after.to_dict(),
        }


@dataclass
class PruneReport:
    metric_name: str
    split: str
    baseline_metric: float | None
    steps: list[PruneStep]
    pruned: list[str]  # sensors removed in the model this report accompanies
    cost_before: CostSnapshot

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "split": self.split,
            "baseline_metric": self.baseline_metric,
            "steps": [s.to_dict() for s in self.steps],
            "pruned": list(self.pruned),
            "cost_before": self.cost_before.to_dict(),
        }


@dataclass
class RateSelection:
    rates: dict[str, float]
    metric: float | None

    def to_dict(self) -> dict:
        return {"rates": {sid: r for sid, r in self.rates.items()}, "metric": self.metric}


# ---------------------------------------------------------------------------
# ranking and the two mask edits
# ---------------------------------------------------------------------------


def rank_sensors(model: CossModel) -> list[tuple[str, float]]:
    """Active sensors by descending weight score; ties break lexicographically."""
    scores = model.sensor_gate.scores()
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def prune_sensor(model: CossModel, sensor_id: str) -> CossModel:
    """Deactivate a sensor's branches; the sensor gate renormalizes over survivors.

    No parameter values are touched.  Pruning the last active sensor is an error.
    """
    if sensor_id not in model.rate_gates:
        raise InputError(f"unknown sensor id {sensor_id!r}")
    if not model.sensor_gate.is_active(sensor_id):
        raise StateError(f"sensor {sensor_id} is already pruned")
    model.sensor_gate.deactivate(sensor_id)
    return model


def select_rate(model: CossModel, sensor_id: str, rate: float) -> CossModel:
    """Keep only one rate branch for a sensor; its gate weight becomes 1."""
    if sensor_id not in model.rate_gates:
        raise InputError(f"unknown sensor id {sensor_id!r}")
    if not model.sensor_gate.is_active(sensor_id):
        raise StateError(f"sensor {sensor_id} is pruned; cannot select a rate for it")
    gate = model.rate_gates[sensor_id]
    rate = float(rate)
    if rate not in gate.labels:
        raise InputError(f"sensor {sensor_id}: {rate} Hz is not a rate candidate")
    if not gate.is_active(rate):
        raise InputError(f"sensor {sensor_id}: rate {rate} Hz was already pruned")
    for r in list(gate.active_labels()):
        if r != rate:
            gate.deactivate(r)
    return model


# ---------------------------------------------------------------------------
# progressive pruning
# ---------------------------------------------------------------------------


def progressive_prune(
    model: CossModel,
    data: PreparedData | None,
    evaluate_each: bool = True,
    finetune_each: bool = False,
    train_cfg: TrainConfig | None = None,
    split: str = "test",
    metric: str = "macro_f1",
) -> list[PruneStep]:
    """Remove the lowest-scored sensor until one remains; one step per removal.

    The input model is left untouched (the walk runs on an internal copy).
    With ``evaluate_each`` the surviving model is scored by direct inference
    after every removal; ``finetune_each`` additionally fine-tunes a throwaway
    copy per step so the non-retrained curve stays pure.
    """
    if evaluate_each and data is None:
        raise InputError("progressive_prune needs data when evaluate_each is set")
    if finetune_each and train_cfg is None:
        raise InputError("progressive_prune needs a train config when finetune_each is set")
    working = model.copy()
    steps: list[PruneStep] = []
    current = evaluate(working, data, split).by_name(metric) if evaluate_each else None
    while len(working.active_sensors()) > 1:
        victim = rank_sensors(working)[-1][0]
        prune_sensor(working, victim)
        after = evaluate(working, data, split).by_name(metric) if evaluate_each else None
        after_ft = None
        if finetune_each:
            ft = working.copy()
            fine_tune(ft, data, train_cfg)
            after_ft = evaluate(ft, data, split).by_name(metric)
        steps.append(
            PruneStep(
                removed_sensor=victim,
                remaining=tuple(working.active_sensors()),
                metric_before=current,
                metric_after=after,
                metric_after_finetune=after_ft,
                cost_after=cost_snapshot(working),
            )
        )
        current = after
    return steps


def _apply_removals(model: CossModel, removed: list[str]) -> CossModel:
    out = model.copy()
    for sid in removed:
        prune_sensor(out, sid)
    return out


def prune_to_threshold(
    model: CossModel,
    data: PreparedData,
    max_drop: float = 2.0,
    train_cfg: TrainConfig | None = None,
    finetune_each: bool = False,
    split: str = "val",
    metric: str = "macro_f1",
) -> tuple[CossModel, PruneReport]:
    """Largest pruned set whose direct-inference metric drop stays <= max_drop points."""
    baseline = evaluate(model, data, split).by_name(metric)
    steps = progressive_prune(
        model, data, evaluate_each=True, finetune_each=finetune_each,
        train_cfg=train_cfg, split=split, metric=metric,
    )
    floor = baseline - max_drop / 100.0
    chosen = 0
    for k, step in enumerate(steps, start=1):
        if step.metric_after >= floor:
            chosen = k
    removed = [s.removed_sensor for s in steps[:chosen]]
    pruned_model = _apply_removals(model, removed)
    report = PruneReport(
        metric_name=metric,
        split=split,
        baseline_metric=baseline,
        steps=steps,
        pruned=removed,
        cost_before=cost_snapshot(model),
    )
    return pruned_model, report


def prune_keep(
    model: CossModel,
    data: PreparedData | None,
    keep: int,
    train_cfg: TrainConfig | None = None,
    finetune_each: bool = False,
    split: str = "val",
    metric: str = "macro_f1",
) -> tuple[CossModel, PruneReport]:
    """Prune by rank until ``keep`` sensors remain."""
    n = len(model.active_sensors())
    if not 1 <= keep <= n:
        raise InputError(f"--keep must be in [1, {n}], got {keep}")
    evaluate_each = data is not None
    baseline = evaluate(model, data, split).by_name(metric) if evaluate_each else None
    steps = progressive_prune(
        model, data, evaluate_each=evaluate_each, finetune_each=finetune_each,
        train_cfg=train_cfg, split=split, metric=metric,
    )[: n - keep]
    removed = [s.removed_sensor for s in steps]
    pruned_model = _apply_removals(model, removed)
    report = PruneReport(
        metric_name=metric,
        split=split,
        baseline_metric=baseline,
        steps=steps,
        pruned=removed,
        cost_before=cost_snapshot(model),
    )
    return pruned_model, report


# ---------------------------------------------------------------------------
# rate selection
# ---------------------------------------------------------------------------


def rate_probe(
    model: CossModel,
    data: PreparedData,
    sensor_id: str,
    split: str = "val",
    metric: str = "macro_f1",
) -> dict[float, float]:
    """Metric when a sensor is pinned to each of its rates, others untouched.

    Every probe keeps all other sensors fully fused (all their branches
    active) and evaluates a fresh copy by direct inference.
    """
    if sensor_id not in model.rate_gates:
        raise InputError(f"unknown sensor id {sensor_id!r}")
    out = {}
    for r in model.active_rates(sensor_id):
        probe = model.copy()
        select_rate(probe, sensor_id, r)
        out[r] = evaluate(probe, data, split).by_name(metric)
    return out


def select_rates_by_policy(
    model: CossModel,
    data: PreparedData,
    max_drop: float = 2.0,
    split: str = "val",
    metric: str = "macro_f1",
) -> tuple[CossModel, RateSelection, float]:
    """Pick one rate per surviving sensor.

    Start from each sensor's top-scored rate, then walk sensors in ascending
    importance and greedily lower each sensor's rate to the next candidate
    while the metric drop from the pre-selection baseline stays <= max_drop
    points.  Returns (selected model, selection, baseline metric).
    """
    baseline = evaluate(model, data, split).by_name(metric)
    floor = baseline - max_drop / 100.0
    weights = gate_weights(model)["rates"]
    # top-scored rate per sensor; ties go to the higher rate
    selection = {
        sid: max(scores.items(), key=lambda kv: (kv[1], kv[0]))[0]
        for sid, scores in weights.items()
    }

    def apply(sel: dict[str, float]) -> CossModel:
        out = model.copy()
        for sid, r in sel.items():
            select_rate(out, sid, r)
        return out

    ascending = [sid for sid, _ in reversed(rank_sensors(model))]
    for sid in ascending:
        lower = sorted((r for r in model.active_rates(sid) if r < selection[sid]), reverse=True)
        for r in lower:
            trial = dict(selection)
            trial[sid] = r
            if evaluate(apply(trial), data, split).by_name(metric) >= floor:
                selection = trial
            else:
                break
    final = apply(selection)
    final_metric = evaluate(final, data, split).by_name(metric)
    return final, RateSelection(rates=selection, metric=final_metric), baseline


def rate_sensitivity(model: CossModel) -> dict[str, float]:
    """Population std of each active sensor's rate-gate weight scores.

    A large spread means the sensor's usefulness varies strongly with its
    sampling rate; near-zero means the gate never differentiated the rates.
    """
    out = {}
    for sid in model.active_sensors():
        scores = np.array(list(model.rate_gates[sid].scores().values()))
        out[sid] = float(scores.std())
    return out
