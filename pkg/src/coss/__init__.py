"""coss: co-selection of sensor modalities and sampling rates.

Train a multi-branch gated classifier once, read off learned importance
scores for every sensor and every candidate sampling rate, then prune
progressively to trade accuracy against hardware cost.
"""

__version__ = "0.1.0"

from .checkpoint import load_model, model_digest, save_model
from .cost import cost_snapshot, data_rate, macs_per_window, param_count, reduction_report
from .data import (
    PreparedData,
    SynthSensorSpec,
    SynthSpec,
    WindowedDataset,
    load_dataset,
    load_windows,
    normalize,
    prepare_branches,
    save_windows,
    synth_generate,
    windowize,
)
from .errors import (
    ConfigError,
    CossError,
    DataError,
    InputError,
    NumericError,
    ShapeError,
    StateError,
)
from .model import (
    CossModel,
    GateLayer,
    ModelConfig,
    SensorConfig,
    build_model,
    forward,
    gate_weights,
    rate_fusion,
    sensor_fusion,
)
from .nn import SgdConfig
from .prune import (
    PruneReport,
    PruneStep,
    RateSelection,
    progressive_prune,
    prune_sensor,
    prune_to_threshold,
    rank_sensors,
    rate_probe,
    rate_sensitivity,
    select_rate,
    select_rates_by_policy,
)
from .resample import adaptive_kernel, resample_series, step_size
from .train import (
    History,
    Metrics,
    TrainConfig,
    compute_metrics,
    evaluate,
    fine_tune,
    split_dataset,
    train,
)
