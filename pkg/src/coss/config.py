"""Run-configuration files: one JSON document describing data, model, training.

Schema (version 1)::

    {
      "schema_version": 1,
      "data": {"synth": {...SynthSpec...}}        // or {"manifest": "path.json"}
                                                  // or {"windows": "dataset.bin"}
      "split": {"ratios": [0.70, 0.15, 0.15]},    // optional
      "model": {...ModelConfig...},
      "train": {...TrainConfig...}
    }

Relative paths are resolved against the config file's directory.  A single
seed (the model seed, overridable with --seed) drives synthesis, splitting,
initialization, and shuffling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .data import SynthSpec, WindowedDataset, load_dataset, load_windows, synth_generate
from .errors import ConfigError
from .model import ModelConfig
from .train import TrainConfig

__all__ = ["RunConfig", "load_run_config", "run_config_from_dict"]

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    data: dict
    model: ModelConfig
    train: TrainConfig
    split_ratios: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "data": self.data,
            "split": {"ratios": list(self.split_ratios)},
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
        }

    def with_seed(self, seed: int) -> "RunConfig":
        """Reseed every stage from one root seed."""
        data = dict(self.data)
        if "synth" in data:
            synth = dict(data["synth"])
            synth["seed"] = seed
            data["synth"] = synth
        return RunConfig(
            data=data,
            model=ModelConfig.from_dict({**self.model.to_dict(), "seed": seed}),
            train=TrainConfig.from_dict({**self.train.to_dict(), "seed": seed}),
            split_ratios=self.split_ratios,
        )

    @property
    def seed(self) -> int:
        return self.model.seed

    def load_data(self) -> WindowedDataset:
        if "synth" in self.data:
            return synth_generate(SynthSpec.from_dict(self.data["synth"]))
        if "manifest" in self.data:
            return load_dataset(self.data["manifest"])
        if "windows" in self.data:
            return load_windows(self.data["windows"])
        raise ConfigError("data section needs one of: synth, manifest, windows")


def run_config_from_dict(d: dict, base_dir: Path | None = None) -> RunConfig:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {d.get('schema_version')}")
    for key in ("data", "model", "train"):
        if key not in d:
            raise ConfigError(f"run config is missing the {key!r} section")
    data = dict(d["data"])
    if base_dir is not None:
        for key in ("manifest", "windows"):
            if key in data:
                data[key] = str((base_dir / data[key]).resolve())
    if "synth" in data:
        SynthSpec.from_dict(data["synth"])  # validate early
    ratios = tuple(d.get("split", {}).get("ratios", (0.70, 0.15, 0.15)))
    if len(ratios) != 3:
        raise ConfigError(f"split ratios must have 3 entries, got {ratios}")
    return RunConfig(
        data=data,
        model=ModelConfig.from_dict(d["model"]),
        train=TrainConfig.from_dict(d["train"]),
        split_ratios=ratios,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return run_config_from_dict(raw, base_dir=path.parent)
