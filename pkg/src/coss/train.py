"""Mini-batch SGD training with early stopping, splitting, and metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import SPLIT_CODES, PreparedData, WindowedDataset
from .errors import ConfigError, InputError, NumericError
from .model import CossModel, forward
from .seeding import derive_rng

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "History",
    "Metrics",
    "split_dataset",
    "train",
    "evaluate",
    "fine_tune",
    "compute_metrics",
    "predict",
]

EVAL_CHUNK = 256


@dataclass(frozen=True)
class TrainConfig:
    sgd: nn.SgdConfig = field(default_factory=nn.SgdConfig)
    batch_size: int = 512
    max_epochs: int = 300
    patience: int = 30
    fine_tune_epochs: int = 10
    seed: int = 0
    metric: str = "macro_f1"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch-norm constraint)")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.patience >= self.max_epochs:
            raise ConfigError(
                f"patience ({self.patience}) must be smaller than max_epochs ({self.max_epochs})"
            )
        if self.fine_tune_epochs < 0:
            raise ConfigError("fine_tune_epochs must be >= 0")
        if self.metric not in ("accuracy", "macro_f1"):
            raise ConfigError(f"metric must be 'accuracy' or 'macro_f1', got {self.metric!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.sgd.learning_rate,
            "momentum": self.sgd.momentum,
            "weight_decay": self.sgd.weight_decay,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "fine_tune_epochs": self.fine_tune_epochs,
            "seed": self.seed,
            "metric": self.metric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            sgd=nn.SgdConfig(
                learning_rate=float(d.get("learning_rate", 1e-2)),
                momentum=float(d.get("momentum", 0.9)),
                weight_decay=float(d.get("weight_decay", 1e-4)),
            ),
            batch_size=int(d.get("batch_size", 512)),
            max_epochs=int(d.get("max_epochs", 300)),
            patience=int(d.get("patience", 30)),
            fine_tune_epochs=int(d.get("fine_tune_epochs", 10)),
            seed=int(d.get("seed", 0)),
            metric=str(d.get("metric", "macro_f1")),
        )


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def split_dataset(
    ds: WindowedDataset,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset]:
    """Random label-stratified train/val/test partition.

    Assigns split codes on ``ds`` in place and returns the three subsets.
    An empty class inside a split only warns; tiny datasets are legal.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be 3 non-negative values summing to 1, got {ratios}")
    rng = derive_rng(seed, "split")
    codes = np.full(ds.num_windows, -1, dtype=np.int8)
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.labels == c)
        rng.shuffle(idx)
        n = len(idx)
        n_train = int(round(n * ratios[0]))
        n_val = int(round(n * ratios[1]))
        if n_train + n_val > n:
            n_val = n - n_train
        codes[idx[:n_train]] = SPLIT_CODES["train"]
        codes[idx[n_train : n_train + n_val]] = SPLIT_CODES["val"]
        codes[idx[n_train + n_val :]] = SPLIT_CODES["test"]
    ds.split = codes
    for name in ("train", "val", "test"):
        present = np.unique(ds.labels[ds.indices(name)])
        if len(present) < ds.num_classes:
            missing = sorted(set(range(ds.num_classes)) - set(present.tolist()))
            warnings.warn(
                f"{name} split has no windows for class(es) {missing}", stacklevel=2
            )
    return ds.subset("train"), ds.subset("val"), ds.subset("test")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    per_class_f1: tuple[float, ...]
    confusion: np.ndarray  # [true, predicted]
    num_windows: int

    def by_name(self, name: str) -> float:
        if name == "accuracy":
            return self.accuracy
        if name == "macro_f1":
            return self.macro_f1
        raise ConfigError(f"unknown metric {name!r}")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": list(self.per_class_f1),
            "confusion": self.confusion.tolist(),
            "num_windows": self.num_windows,
        }


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> Metrics:
    """Accuracy, macro-F1 (0/0-class F1 counted as 0), and confusion matrix."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise InputError(f"prediction/label shape mismatch: {y_pred.shape} vs {y_true.shape}")
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    tp = np.diag(conf).astype(np.float64)
    support = conf.sum(axis=1).astype(np.float64)
    predicted = conf.sum(axis=0).astype(np.float64)
    denom = support + predicted
    f1 = np.divide(2.0 * tp, denom, out=np.zeros(num_classes), where=denom > 0)
    acc = float(tp.sum() / max(len(y_true), 1))
    return Metrics(
        accuracy=acc,
        macro_f1=float(f1.mean()),
        per_class_f1=tuple(float(v) for v in f1),
        confusion=conf,
        num_windows=len(y_true),
    )


def predict(model: CossModel, data: PreparedData, idx: np.ndarray) -> np.ndarray:
    """Class predictions in inference mode; chunked, shard-independent."""
    model.eval()
    preds = np.empty(len(idx), dtype=np.int64)
    with nn.no_grad():
        for start in range(0, len(idx), EVAL_CHUNK):
            chunk = idx[start : start + EVAL_CHUNK]
            logits = forward(model, data.batch(chunk))
            preds[start : start + len(chunk)] = logits.data.argmax(axis=1)
    return preds


def evaluate(model: CossModel, data: PreparedData, split: str = "test") -> Metrics:
    """Metrics over one split, computed with running batch-norm statistics."""
    idx = data.indices(split)
    if len(idx) == 0:
        raise InputError(f"split {split!r} is empty")
    preds = predict(model, data, idx)
    return compute_metrics(data.labels[idx], preds, data.num_classes)


def _mean_loss(model: CossModel, data: PreparedData, idx: np.ndarray) -> float:
    model.eval()
    total = 0.0
    with nn.no_grad():
        for start in range(0, len(idx), EVAL_CHUNK):
            chunk = idx[start : start + EVAL_CHUNK]
            loss = nn.cross_entropy(forward(model, data.batch(chunk)), data.labels[chunk])
            total += loss.item() * len(chunk)
    return total / len(idx)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_metric": self.val_metric,
        }


@dataclass
class History:
    records: list[EpochRecord]
    best_epoch: int
    best_val_loss: float
    best_val_metric: float
    stopped_early: bool
    metric_name: str

    @property
    def epochs_run(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "best_val_metric": self.best_val_metric,
            "stopped_early": self.stopped_early,
            "metric_name": self.metric_name,
        }


def _snapshot(model: CossModel) -> dict:
    state = {"params": {}, "momentum": {}, "bn": {}}
    for name, p in model.named_parameters().items():
        state["params"][name] = p.data.copy()
        state["momentum"][name] = p.momentum_buffer.copy()
    for st in model.bn_states():
        state["bn"][st.name] = (st.running_mean.copy(), st.running_var.copy())
    return state


def _restore(model: CossModel, state: dict) -> None:
    for name, p in model.named_parameters().items():
        p.data[...] = state["params"][name]
        p.momentum_buffer[...] = state["momentum"][name]
    for st in model.bn_states():
        mean, var = state["bn"][st.name]
        st.running_mean[...] = mean
        st.running_var[...] = var


def _run_epoch(model, data, cfg, rng, train_idx, epoch) -> float:
    """One pass of shuffled mini-batch SGD; returns the mean training loss."""
    model.train()
    params = model.parameters()
    order = train_idx[rng.permutation(len(train_idx))]
    total, seen = 0.0, 0
    for start in range(0, len(order), cfg.batch_size):
        chunk = order[start : start + cfg.batch_size]
        if len(chunk) < 2:
            continue  # a trailing singleton would break batch norm
        try:
            loss = nn.cross_entropy(forward(model, data.batch(chunk)), data.labels[chunk])
            nn.backward(loss)
        except NumericError as e:
            raise NumericError(f"training diverged at epoch {epoch}: {e}") from e
        nn.sgd_step(params, cfg.sgd)
        total += loss.item() * len(chunk)
        seen += len(chunk)
    if seen == 0:
        raise InputError("training split has no usable batch (need >= 2 windows)")
    return total / seen


def train(model: CossModel, data: PreparedData, cfg: TrainConfig) -> tuple[CossModel, History]:
    """SGD with early stopping on validation loss; restores the best weights."""
    train_idx = data.indices("train")
    val_idx = data.indices("val")
    if len(train_idx) < 2:
        raise InputError("training split needs at least 2 windows")
    if len(val_idx) == 0:
        raise InputError("validation split is empty")

    rng = derive_rng(cfg.seed, "shuffle")
    records: list[EpochRecord] = []
    best = None  # (val_loss, epoch, snapshot, val_metric)
    bad_epochs = 0
    stopped = False
    for epoch in range(cfg.max_epochs):
        train_loss = _run_epoch(model, data, cfg, rng, train_idx, epoch)
        val_loss = _mean_loss(model, data, val_idx)
        val_metric = evaluate(model, data, "val").by_name(cfg.metric)
        records.append(EpochRecord(epoch, train_loss, val_loss, val_metric))
        if best is None or val_loss < best[0]:
            best = (val_loss, epoch, _snapshot(model), val_metric)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                stopped = True
                break
    _restore(model, best[2])
    model.eval()
    return model, History(
        records=records,
        best_epoch=best[1],
        best_val_loss=best[0],
        best_val_metric=best[3],
        stopped_early=stopped,
        metric_name=cfg.metric,
    )


def fine_tune(model: CossModel, data: PreparedData, cfg: TrainConfig) -> CossModel:
    """A short continuation of training (no early stopping, no restore).

    Updates every surviving parameter, gates included; intended to recover
    accuracy after pruning or rate selection.
    """
    train_idx = data.indices("train")
    if cfg.fine_tune_epochs == 0:
        return model
    if len(train_idx) < 2:
        raise InputError("training split needs at least 2 windows")
    rng = derive_rng(cfg.seed, "finetune")
    for epoch in range(cfg.fine_tune_epochs):
        _run_epoch(model, data, cfg, rng, train_idx, epoch)
    model.eval()
    return model
