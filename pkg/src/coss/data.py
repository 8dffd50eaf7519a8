"""Dataset handling: windowing, normalization, synthetic generation, ingestion.

Real recordings enter through a JSON manifest naming delimited-text channel
files (one row per time step) plus a label stream; see ``load_dataset`` for
the schema.  The synthetic generator produces ground-truth datasets whose
sensors have known roles (informative / redundant / noise), which the test
suite uses as its oracle for ranking, pruning and rate-selection behavior.

All loading and generation is pure given (files, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import container
from .errors import ConfigError, DataError, InputError
from .model import ModelConfig
from .resample import resample_series, step_size
from .seeding import derive_rng

__all__ = [
    "SPLIT_CODES",
    "WindowedDataset",
    "SynthSensorSpec",
    "SynthSpec",
    "windowize",
    "normalize",
    "synth_generate",
    "load_dataset",
    "save_windows",
    "load_windows",
    "PreparedData",
    "prepare_branches",
]

SPLIT_CODES = {"train": 0, "val": 1, "test": 2}
SPLIT_NAMES = {v: k for k, v in SPLIT_CODES.items()}
DATASET_FORMAT_VERSION = 1


@dataclass
class WindowedDataset:
    """Labeled fixed-length windows per sensor, at each sensor's native rate."""

    sensors: dict[str, np.ndarray]  # sensor_id -> [num_windows, channels, window_len]
    rates: dict[str, float]         # sensor_id -> f_original (Hz)
    labels: np.ndarray              # [num_windows] class indices
    class_names: tuple[str, ...]
    window_seconds: float
    split: np.ndarray | None = None            # [num_windows] codes from SPLIT_CODES
    norm_stats: dict[str, tuple[np.ndarray, np.ndarray]] | None = None  # (mean, std) per channel

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.labels)
        if not self.sensors:
            raise InputError("dataset has no sensors")
        for sid, arr in self.sensors.items():
            if sid not in self.rates:
                raise InputError(f"sensor {sid}: no sampling rate recorded")
            if arr.ndim != 3:
                raise InputError(f"sensor {sid}: windows must be [num, channels, len], got {arr.shape}")
            if arr.shape[0] != n:
                raise InputError(
                    f"sensor {sid}: {arr.shape[0]} windows but {n} labels"
                )
            expect = int(round(self.window_seconds * self.rates[sid]))
            if arr.shape[2] != expect:
                raise InputError(
                    f"sensor {sid}: window length {arr.shape[2]} != "
                    f"round({self.window_seconds} s x {self.rates[sid]} Hz) = {expect}"
                )
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise InputError(f"labels out of range [0, {len(self.class_names)})")
        if self.split is not None:
            self.split = np.asarray(self.split, dtype=np.int8)
            if self.split.shape != (n,):
                raise InputError("split assignment length mismatch")

    @property
    def num_windows(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def indices(self, split: str) -> np.ndarray:
        if self.split is None:
            raise InputError("dataset has no split assignment yet")
        return np.flatnonzero(self.split == SPLIT_CODES[split])

    def subset(self, split: str) -> "WindowedDataset":
        idx = self.indices(split)
        return WindowedDataset(
            sensors={sid: arr[idx] for sid, arr in self.sensors.items()},
            rates=dict(self.rates),
            labels=self.labels[idx],
            class_names=self.class_names,
            window_seconds=self.window_seconds,
            split=self.split[idx],
            norm_stats=self.norm_stats,
        )


# ---------------------------------------------------------------------------
# windowing and normalization
# ---------------------------------------------------------------------------


def windowize(
    streams: dict[str, np.ndarray],
    rates: dict[str, float],
    label_stream: np.ndarray,
    label_rate: float,
    window_seconds: float,
    overlap_fraction: float = 0.5,
    class_names: tuple[str, ...] | None = None,
) -> WindowedDataset:
    """Cut time-aligned continuous streams into fixed-length labeled windows.

    ``streams`` maps sensor id to a [time, channels] array at that sensor's
    rate.  Windows advance by ``window_seconds * (1 - overlap_fraction)``;
    each window's label is the majority label over its time span, and windows
    whose majority covers less than half the span are dropped.
    """
    if not 0.0 <= overlap_fraction < 1.0:
        raise ConfigError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    if window_seconds <= 0:
        raise ConfigError("window_seconds must be positive")
    label_stream = np.asarray(label_stream)
    if label_stream.ndim != 1:
        raise InputError("label stream must be 1-d")
    if label_rate <= 0:
        raise ConfigError("label rate must be positive")

    durations = {sid: streams[sid].shape[0] / rates[sid] for sid in streams}
    durations["<labels>"] = len(label_stream) / label_rate
    d_min, d_max = min(durations.values()), max(durations.values())
    tol = max(1.0 / min(list(rates.values()) + [label_rate]), 1e-9)
    if d_max - d_min > tol + 1e-9:
        median = float(np.median(list(durations.values())))
        bad = max(durations, key=lambda k: abs(durations[k] - median))
        raise InputError(
            f"streams are not time-aligned: {bad} covers {durations[bad]:.3f} s "
            f"but the others cover about {median:.3f} s"
        )
    duration = d_min
    if duration < window_seconds:
        raise InputError(
            f"streams cover {duration:.3f} s, shorter than one {window_seconds} s window"
        )

    stride = window_seconds * (1.0 - overlap_fraction)
    num = int(math.floor((duration - window_seconds) / stride + 1e-9)) + 1
    win_lens = {sid: int(round(window_seconds * rates[sid])) for sid in streams}
    label_win = int(round(window_seconds * label_rate))

    kept_labels = []
    kept_slices: dict[str, list[np.ndarray]] = {sid: [] for sid in streams}
    for w in range(num):
        t0 = w * stride
        j0 = min(int(round(t0 * label_rate)), len(label_stream) - label_win)
        seg = label_stream[j0 : j0 + label_win]
        counts = np.bincount(seg.astype(np.int64))
        maj = int(counts.argmax())
        if counts[maj] * 2 < len(seg):
            continue  # no >= 50% majority: window straddles a label change
        kept_labels.append(maj)
        for sid, stream in streams.items():
            i0 = min(int(round(t0 * rates[sid])), stream.shape[0] - win_lens[sid])
            kept_slices[sid].append(stream[i0 : i0 + win_lens[sid]].T)

    if not kept_labels:
        raise InputError("no windows survived label-majority filtering")
    labels = np.asarray(kept_labels, dtype=np.int64)
    if class_names is None:
        class_names = tuple(f"class{i}" for i in range(int(labels.max()) + 1))
    return WindowedDataset(
        sensors={sid: np.ascontiguousarray(np.stack(sl), dtype=np.float64) for sid, sl in kept_slices.items()},
        rates={sid: float(rates[sid]) for sid in streams},
        labels=labels,
        class_names=tuple(class_names),
        window_seconds=float(window_seconds),
    )


def normalize(ds: WindowedDataset) -> WindowedDataset:
    """Z-score each channel using statistics from the training split only."""
    if ds.split is None:
        raise InputError("normalize needs a split assignment (call split_dataset first)")
    train_idx = ds.indices("train")
    if len(train_idx) == 0:
        raise InputError("normalize: training split is empty")
    stats = {}
    sensors = {}
    for sid, arr in ds.sensors.items():
        mean = arr[train_idx].mean(axis=(0, 2))
        std = arr[train_idx].std(axis=(0, 2))
        std = np.maximum(std, 1e-8)  # variance floor: constant channels map to zero
        stats[sid] = (mean, std)
        sensors[sid] = (arr - mean[None, :, None]) / std[None, :, None]
    return replace(ds, sensors=sensors, norm_stats=stats)


# ---------------------------------------------------------------------------
# synthetic ground-truth generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSensorSpec:
    """One synthetic sensor with a known role.

    informative: class-dependent tones inside ``band`` plus noise at ``snr``
    (signal power / noise power).  redundant: a low-passed copy of ``source``
    (default: the first informative sensor), noise scaled to the source's
    power.  noise: label-independent unit gaussian noise.
    """

    sensor_id: str
    role: str
    f_original: float
    channels: int = 1
    band: tuple[float, float] | None = None
    snr: float = 10.0
    source: str | None = None
    lowpass_hz: float | None = None

    def __post_init__(self):
        if self.role not in ("informative", "redundant", "noise"):
            raise ConfigError(f"sensor {self.sensor_id}: unknown role {self.role!r}")
        if self.f_original <= 0 or self.channels < 1:
            raise ConfigError(f"sensor {self.sensor_id}: bad rate or channel count")
        if self.snr <= 0:
            raise ConfigError(f"sensor {self.sensor_id}: SNR must be positive")
        if self.role == "informative":
            if self.band is None:
                raise ConfigError(f"sensor {self.sensor_id}: informative sensors need a band")
            lo, hi = self.band
            if not 0 < lo < hi:
                raise ConfigError(f"sensor {self.sensor_id}: band must satisfy 0 < lo < hi")
            if hi > self.f_original / 2:
                raise ConfigError(
                    f"sensor {self.sensor_id}: band top {hi} Hz exceeds Nyquist "
                    f"{self.f_original / 2} Hz"
                )


@dataclass(frozen=True)
class SynthSpec:
    sensors: tuple[SynthSensorSpec, ...]
    num_classes: int
    windows_per_class: int
    window_seconds: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.num_classes < 2:
            raise ConfigError("synthetic dataset needs >= 2 classes")
        if self.windows_per_class < 1 or self.window_seconds <= 0:
            raise ConfigError("windows_per_class and window_seconds must be positive")
        roles = [s.role for s in self.sensors]
        if "informative" not in roles:
            raise ConfigError("synthetic dataset needs at least one informative sensor")
        ids = [s.sensor_id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate synthetic sensor ids")
        informative = [s.sensor_id for s in self.sensors if s.role == "informative"]
        for s in self.sensors:
            if s.role == "redundant":
                src = s.source or informative[0]
                if src not in informative:
                    raise ConfigError(
                        f"sensor {s.sensor_id}: redundant source {src!r} is not an informative sensor"
                    )

    def to_dict(self) -> dict:
        return {
            "sensors": [
                {
                    "sensor_id": s.sensor_id,
                    "role": s.role,
                    "f_original": s.f_original,
                    "channels": s.channels,
                    "band": list(s.band) if s.band else None,
                    "snr": s.snr,
                    "source": s.source,
                    "lowpass_hz": s.lowpass_hz,
                }
                for s in self.sensors
            ],
            "num_classes": self.num_classes,
            "windows_per_class": self.windows_per_class,
            "window_seconds": self.window_seconds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            sensors=tuple(
                SynthSensorSpec(
                    sensor_id=s["sensor_id"],
                    role=s["role"],
                    f_original=float(s["f_original"]),
                    channels=int(s.get("channels", 1)),
                    band=tuple(s["band"]) if s.get("band") else None,
                    snr=float(s.get("snr", 10.0)),
                    source=s.get("source"),
                    lowpass_hz=s.get("lowpass_hz"),
                )
                for s in d["sensors"]
            ),
            num_classes=int(d["num_classes"]),
            windows_per_class=int(d["windows_per_class"]),
            window_seconds=float(d["window_seconds"]),
            seed=int(d.get("seed", 0)),
        )


def _class_tones(band: tuple[float, float], num_classes: int) -> list[tuple[float, float]]:
    """Two tones per class: one in the lower half of the band, one in the upper."""
    lo, hi = band
    mid = 0.5 * (lo + hi)
    out = []
    for c in range(num_classes):
        f1 = lo + (c + 0.5) * (mid - lo) / num_classes
        f2 = mid + (c + 0.5) * (hi - mid) / num_classes
        out.append((f1, f2))
    return out


def _one_pole_lowpass(x: np.ndarray, cutoff: float, fs: float, passes: int = 2) -> np.ndarray:
    """Repeated first-order IIR low-pass along the last axis."""
    a = math.exp(-2.0 * math.pi * cutoff / fs)
    y = x.astype(np.float64, copy=True)
    for _ in range(passes):
        for t in range(1, y.shape[-1]):
            y[..., t] = a * y[..., t - 1] + (1.0 - a) * y[..., t]
    return y


def synth_generate(spec: SynthSpec) -> WindowedDataset:
    """Seed-deterministic synthetic windows with known sensor roles."""
    n = spec.num_classes * spec.windows_per_class
    labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), spec.windows_per_class)

    informative = [s for s in spec.sensors if s.role == "informative"]
    clean_by_id: dict[str, np.ndarray] = {}
    sensors: dict[str, np.ndarray] = {}
    rates: dict[str, float] = {}

    for s in informative:
        rng = derive_rng(spec.seed, "synth", s.sensor_id)
        win_len = int(round(spec.window_seconds * s.f_original))
        t = np.arange(win_len) / s.f_original
        tones = _class_tones(s.band, spec.num_classes)
        ch_phase = 0.8 * np.arange(s.channels)
        clean = np.empty((n, s.channels, win_len))
        for w in range(n):
            f1, f2 = tones[labels[w]]
            p1, p2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
            arg1 = 2 * np.pi * f1 * t[None, :] + p1 + ch_phase[:, None]
            arg2 = 2 * np.pi * f2 * t[None, :] + p2 + ch_phase[:, None]
            clean[w] = np.sin(arg1) + 0.8 * np.sin(arg2)
        clean_by_id[s.sensor_id] = clean
        noise_std = float(np.sqrt(np.mean(clean**2))) / math.sqrt(s.snr)
        sensors[s.sensor_id] = clean + rng.normal(0.0, noise_std, size=clean.shape)
        rates[s.sensor_id] = s.f_original

    for s in spec.sensors:
        if s.role == "informative":
            continue
        rng = derive_rng(spec.seed, "synth", s.sensor_id)
        win_len = int(round(spec.window_seconds * s.f_original))
        if s.role == "noise":
            sensors[s.sensor_id] = rng.normal(0.0, 1.0, size=(n, s.channels, win_len))
        else:  # redundant: low-passed copy of an informative sensor
            src_id = s.source or informative[0].sensor_id
            src = next(i for i in informative if i.sensor_id == src_id)
            if s.f_original != src.f_original or s.channels != src.channels:
                raise ConfigError(
                    f"sensor {s.sensor_id}: redundant copies must match the source's rate and channels"
                )
            cutoff = s.lowpass_hz if s.lowpass_hz is not None else (s.band[1] if s.band else src.band[0])
            filtered = _one_pole_lowpass(clean_by_id[src_id], cutoff, s.f_original)
            noise_std = float(np.sqrt(np.mean(clean_by_id[src_id] ** 2))) / math.sqrt(s.snr)
            sensors[s.sensor_id] = filtered + rng.normal(0.0, noise_std, size=filtered.shape)
        rates[s.sensor_id] = s.f_original

    # preserve the declared sensor order
    ordered = {s.sensor_id: sensors[s.sensor_id] for s in spec.sensors}
    return WindowedDataset(
        sensors=ordered,
        rates={s.sensor_id: rates[s.sensor_id] for s in spec.sensors},
        labels=labels,
        class_names=tuple(f"C{i}" for i in range(spec.num_classes)),
        window_seconds=spec.window_seconds,
    )


# ---------------------------------------------------------------------------
# manifest ingestion (delimited text)
# ---------------------------------------------------------------------------


def _read_numeric_table(path: Path, expected_cols: int | None = None) -> np.ndarray:
    """Parse a delimited numeric text file; errors carry file and line number."""
    rows = []
    ncols = expected_cols
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"{path}: cannot read file: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.replace(",", " ").split()
        if ncols is None:
            ncols = len(toks)
        elif len(toks) != ncols:
            raise DataError(f"{path}:{lineno}: expected {ncols} columns, found {len(toks)}")
        try:
            rows.append([float(t) for t in toks])
        except ValueError:
            bad = next(t for t in toks if not _is_number(t))
            raise DataError(f"{path}:{lineno}: non-numeric value {bad!r}") from None
    if not rows:
        raise DataError(f"{path}: file contains no data rows")
    return np.asarray(rows, dtype=np.float64)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def load_dataset(manifest_path) -> WindowedDataset:
    """Load and windowize a dataset described by a JSON manifest.

    Schema (version 1)::

        {
          "schema_version": 1,
          "window_seconds": 3.0,
          "overlap_fraction": 0.5,            // optional, default 0.5
          "labels": {"file": "labels.csv", "rate_hz": 30.0},
          "class_names": ["stand", "walk"],   // or "class_names_file": "classes.txt"
          "sensors": [
            {"sensor_id": "S1", "rate_hz": 30.0, "file": "s1.csv"},          // columns = channels
            {"sensor_id": "S2", "rate_hz": 30.0, "files": ["s2x.csv", ...]}  // one column per file
          ]
        }

    Channel files are delimited numeric text, one row per time step.  The
    label file holds one integer class index per row at ``rate_hz``.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as e:
        raise DataError(f"{manifest_path}: cannot read manifest: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{manifest_path}: invalid JSON: {e}") from e
    if manifest.get("schema_version") != 1:
        raise DataError(f"{manifest_path}: unsupported schema_version {manifest.get('schema_version')}")
    base = manifest_path.parent

    for key in ("window_seconds", "labels", "sensors"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: manifest is missing {key!r}")

    label_info = manifest["labels"]
    label_table = _read_numeric_table(base / label_info["file"], expected_cols=1)[:, 0]
    if not np.all(label_table == np.round(label_table)):
        raise DataError(f"{base / label_info['file']}: labels must be integers")
    label_stream = label_table.astype(np.int64)
    if label_stream.min() < 0:
        raise DataError(f"{base / label_info['file']}: negative class index")

    streams: dict[str, np.ndarray] = {}
    rates: dict[str, float] = {}
    for sensor in manifest["sensors"]:
        sid = sensor["sensor_id"]
        if "file" in sensor:
            table = _read_numeric_table(base / sensor["file"])
        elif "files" in sensor:
            cols = [_read_numeric_table(base / f, expected_cols=1) for f in sensor["files"]]
            lengths = {c.shape[0] for c in cols}
            if len(lengths) > 1:
                names = ", ".join(str(f) for f in sensor["files"])
                raise DataError(
                    f"sensor {sid}: channel files have mismatched lengths "
                    f"{sorted(len(c) for c in cols)} ({names})"
                )
            table = np.hstack(cols)
        else:
            raise DataError(f"sensor {sid}: manifest entry needs 'file' or 'files'")
        declared = sensor.get("channels")
        if declared is not None and table.shape[1] != declared:
            raise DataError(
                f"sensor {sid}: manifest declares {declared} channels but data has {table.shape[1]}"
            )
        streams[sid] = table
        rates[sid] = float(sensor["rate_hz"])

    if "class_names" in manifest:
        class_names = tuple(manifest["class_names"])
    elif "class_names_file" in manifest:
        lines = (base / manifest["class_names_file"]).read_text().splitlines()
        class_names = tuple(ln.strip() for ln in lines if ln.strip())
    else:
        class_names = tuple(f"class{i}" for i in range(int(label_stream.max()) + 1))
    if label_stream.max() >= len(class_names):
        raise DataError(
            f"label {label_stream.max()} has no class name (only {len(class_names)} provided)"
        )

    return windowize(
        streams,
        rates,
        label_stream,
        float(label_info["rate_hz"]),
        float(manifest["window_seconds"]),
        float(manifest.get("overlap_fraction", 0.5)),
        class_names,
    )


# ---------------------------------------------------------------------------
# dataset artifact (binary container)
# ---------------------------------------------------------------------------


def save_windows(path, ds: WindowedDataset) -> None:
    """Persist a windowed dataset as a deterministic binary artifact."""
    arrays: dict[str, np.ndarray] = {"labels": ds.labels.astype(np.int64)}
    for sid, arr in ds.sensors.items():
        arrays[f"data/{sid}"] = arr
    if ds.split is not None:
        arrays["split"] = ds.split.astype(np.int8)
    if ds.norm_stats is not None:
        for sid, (mean, std) in ds.norm_stats.items():
            arrays[f"norm/{sid}/mean"] = mean
            arrays[f"norm/{sid}/std"] = std
    meta = {
        "kind": "windowed_dataset",
        "format_version": DATASET_FORMAT_VERSION,
        "class_names": list(ds.class_names),
        "window_seconds": ds.window_seconds,
        "rates": {sid: ds.rates[sid] for sid in ds.sensors},
        "sensor_order": list(ds.sensors),
        "has_split": ds.split is not None,
        "has_norm": ds.norm_stats is not None,
    }
    container.write(path, meta, arrays)


def load_windows(path) -> WindowedDataset:
    meta, arrays = container.read(path)
    if meta.get("kind") != "windowed_dataset":
        raise DataError(f"{path}: not a windowed dataset artifact")
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported dataset format version {meta.get('format_version')}")
    sensors = {sid: arrays[f"data/{sid}"] for sid in meta["sensor_order"]}
    norm = None
    if meta.get("has_norm"):
        norm = {sid: (arrays[f"norm/{sid}/mean"], arrays[f"norm/{sid}/std"]) for sid in sensors}
    return WindowedDataset(
        sensors=sensors,
        rates={sid: float(r) for sid, r in meta["rates"].items()},
        labels=arrays["labels"],
        class_names=tuple(meta["class_names"]),
        window_seconds=float(meta["window_seconds"]),
        split=arrays.get("split") if meta.get("has_split") else None,
        norm_stats=norm,
    )


# ---------------------------------------------------------------------------
# per-branch resampling cache
# ---------------------------------------------------------------------------


@dataclass
class PreparedData:
    """Windows resampled once per (sensor, rate candidate), plus labels/splits.

    The resampling layer has no trainable parameters, so branch inputs are
    computed a single time here and indexed per batch during training.
    """

    inputs: dict[str, dict[float, np.ndarray]]
    labels: np.ndarray
    split: np.ndarray
    class_names: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == SPLIT_CODES[split])

    def batch(self, idx: np.ndarray) -> dict[str, dict[float, np.ndarray]]:
        return {sid: {r: arr[idx] for r, arr in per.items()} for sid, per in self.inputs.items()}

    def split_size(self, split: str) -> int:
        return int((self.split == SPLIT_CODES[split]).sum())


def prepare_branches(ds: WindowedDataset, config: ModelConfig) -> PreparedData:
    """Resample every window to every rate candidate of every config sensor."""
    if ds.split is None:
        raise InputError("prepare_branches needs a split assignment (call split_dataset first)")
    if not math.isclose(ds.window_seconds, config.window_seconds, rel_tol=1e-9):
        raise ConfigError(
            f"config window {config.window_seconds} s != dataset window {ds.window_seconds} s"
        )
    if len(ds.class_names) != config.num_classes:
        raise ConfigError(
            f"config num_classes {config.num_classes} != dataset classes {len(ds.class_names)}"
        )
    inputs: dict[str, dict[float, np.ndarray]] = {}
    for sensor in config.sensors:
        sid = sensor.sensor_id
        if sid not in ds.sensors:
            raise ConfigError(f"config sensor {sid} not present in dataset")
        if not math.isclose(ds.rates[sid], sensor.f_original, rel_tol=1e-9):
            raise ConfigError(
                f"sensor {sid}: config rate {sensor.f_original} Hz != dataset rate {ds.rates[sid]} Hz"
            )
        if ds.sensors[sid].shape[1] != sensor.channels:
            raise ConfigError(
                f"sensor {sid}: config declares {sensor.channels} channels, dataset has "
                f"{ds.sensors[sid].shape[1]}"
            )
        arr = ds.sensors[sid]
        inputs[sid] = {
            float(r): np.ascontiguousarray(resample_series(arr, step_size(sensor.f_original, r)))
            for r in sensor.rate_candidates
        }
    return PreparedData(
        inputs=inputs,
        labels=ds.labels.copy(),
        split=ds.split.copy(),
        class_names=ds.class_names,
    )
