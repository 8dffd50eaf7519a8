"""Deterministic downsampling of sensor windows by linear interpolation.

A target rate is reached by stepping through the original series with a real
step ``S = f_original / f_target`` and linearly interpolating between the two
neighbouring samples.  Fractional steps (and therefore fractional rate
ratios) are supported; upsampling is not.  Each branch of the model also gets
a kernel size scaled with its rate so that every branch's filters span the
same time interval.

All functions here are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

__all__ = [
    "ResamplePlan",
    "KernelPlan",
    "step_size",
    "target_length",
    "resample_series",
    "adaptive_kernel",
    "plan_resample",
    "plan_kernel",
]


def step_size(f_original: float, f_target: float) -> float:
    """Step between consecutive output samples, in units of input samples.

    Raises ConfigError for non-positive rates or a target above the original
    rate (upsampling is unsupported).
    """
    if f_original <= 0 or f_target <= 0:
        raise ConfigError(
            f"sampling rates must be positive, got f_original={f_original}, f_target={f_target}"
        )
    if f_target > f_original:
        raise ConfigError(
            f"target rate {f_target} Hz exceeds original rate {f_original} Hz; upsampling is unsupported"
        )
    return f_original / f_target


def target_length(source_len: int, step: float) -> int:
    """Largest output length whose interpolation indices stay in bounds.

    Equals floor((source_len - 1) / step) + 1: the last output index i has
    ceil(i * step) <= source_len - 1.
    """
    if source_len < 2:
        raise InputError(f"need at least 2 samples to resample, got {source_len}")
    if step < 1:
        raise ConfigError(f"resampling step must be >= 1, got {step}")
    return int(math.floor((source_len - 1) / step)) + 1


def resample_series(od: np.ndarray, step: float) -> np.ndarray:
    """Downsample a series along its last axis with linear interpolation.

    ``od`` may be 1-D or have leading batch/channel axes; interpolation is
    applied independently per leading index.  Output index i reads
    ``od[floor(i*step)]`` and ``od[ceil(i*step)]`` and blends them by the
    fractional part of ``i*step``.
    """
    od = np.asarray(od)
    n = od.shape[-1]
    out_len = target_length(n, step)
    idx = np.arange(out_len, dtype=np.float64) * float(step)
    lo = np.floor(idx).astype(np.intp)
    # Clip guards float fuzz when (out_len-1)*step lands a hair above n-1.
    hi = np.minimum(np.ceil(idx).astype(np.intp), n - 1)
    frac = idx - lo
    lo_vals = od[..., lo]
    return lo_vals + frac * (od[..., hi] - lo_vals)


def adaptive_kernel(ks_original: int, f_original: float, f_target: float) -> int:
    """Kernel size for a branch at ``f_target``, floor-scaled from the original.

    Keeping (ks * rate) roughly constant means every branch's filters cover
    the same time span.  A result below 1 is a configuration error: the rate
    candidate is too low for this kernel.
    """
    if ks_original < 1:
        raise ConfigError(f"kernel size must be >= 1, got {ks_original}")
    step_size(f_original, f_target)  # validates the rate pair
    # (ks * f_target) first: integer-valued products stay exact in float64.
    ks = int(math.floor((ks_original * f_target) / f_original))
    if ks < 1:
        raise ConfigError(
            f"kernel size {ks_original} at {f_original} Hz scales to {ks} at {f_target} Hz; "
            "rate candidate is too low for this kernel"
        )
    return ks


@dataclass(frozen=True)
class ResamplePlan:
    """Precomputed geometry of one (original rate -> target rate) resampling."""

    f_original: float
    f_target: float
    step: float
    source_len: int
    target_len: int


def plan_resample(f_original: float, f_target: float, source_len: int) -> ResamplePlan:
    """Validate and freeze a resampling; target_len < 2 is rejected here."""
    s = step_size(f_original, f_target)
    tl = target_length(source_len, s)
    if tl < 2:
        raise ConfigError(
            f"resampling {source_len} samples from {f_original} to {f_target} Hz leaves "
            f"{tl} sample(s); windows must keep at least 2"
        )
    return ResamplePlan(float(f_original), float(f_target), s, int(source_len), tl)


@dataclass(frozen=True)
class KernelPlan:
    """Kernel sizes for one branch before/after rate scaling."""

    ks_original: int
    ks_target: int
    f_original: float
    f_target: float


def plan_kernel(ks_original: int, f_original: float, f_target: float) -> KernelPlan:
    return KernelPlan(
        int(ks_original),
        adaptive_kernel(ks_original, f_original, f_target),
        float(f_original),
        float(f_target),
    )
