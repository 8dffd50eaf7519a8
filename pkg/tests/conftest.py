import numpy as np
import pytest

from coss.model import ModelConfig, SensorConfig, build_model


def make_tiny_config(seed=0, num_classes=3, filters=3, hidden=4, channels=(1, 2)):
    """Two sensors x two rates, small enough for exhaustive gradient checks."""
    sensors = tuple(
        SensorConfig(sid, ch, 16.0, (16.0, 8.0))
        for sid, ch in zip(("A", "B"), channels)
    )
    return ModelConfig(
        sensors=sensors,
        window_seconds=1.0,
        ks_original=3,
        num_classes=num_classes,
        filters=filters,
        classifier_hidden=hidden,
        seed=seed,
    )


def make_batch(model, batch_size, seed=0, active_only=False):
    """Random inputs shaped for every branch of ``model``."""
    rng = np.random.default_rng(seed)
    batch = {}
    pairs = (
        model.active_branches()
        if active_only
        else [(s.sensor_id, r) for s in model.config.sensors for r in s.rate_candidates]
    )
    for sid, r in pairs:
        br = model.branches[sid][r]
        batch.setdefault(sid, {})[r] = rng.normal(size=(batch_size, br.channels, br.plan.target_len))
    return batch


@pytest.fixture
def tiny_model():
    return build_model(make_tiny_config())
