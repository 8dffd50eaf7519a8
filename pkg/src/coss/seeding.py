"""Deterministic seed derivation: one root seed fans out to named streams."""

from __future__ import annotations

import numpy as np


def entropy(tag: str) -> int:
    """Stable non-negative integer from a string tag."""
    return int.from_bytes(tag.encode("utf-8"), "little")


def seed_sequence(seed: int, *tags: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed)] + [entropy(t) for t in tags])


def derive_rng(seed: int, *tags: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *tags))


def derive_seed(seed: int, *tags: str) -> int:
    """A derived 63-bit integer seed, for configs that take plain ints."""
    return int(seed_sequence(seed, *tags).generate_state(1, np.uint64)[0] >> 1)
