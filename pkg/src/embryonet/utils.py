"""Small helpers shared across modules."""

from __future__ import annotations

import hashlib

import numpy as np


def to_float32_grid(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Round every tensor to the nearest float32 value, kept as float64.

    Trained models live on this grid so a float32 checkpoint round-trips them
    bit-exactly.
    """
    return {k: np.asarray(v, dtype=np.float32).astype(np.float64) for k, v in params.items()}


def derive_seed(seed: int, *keys) -> int:
    """Deterministic child seed for a named stage, e.g. ``derive_seed(7, "fold", 3)``."""
    h = hashlib.sha256(repr((int(seed),) + tuple(keys)).encode()).digest()
    return int.from_bytes(h[:8], "little")
