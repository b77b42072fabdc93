"""Adam over named parameter groups."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGradientError, ShapeError


@dataclass(frozen=True)
class LayerParams:
    """Named tensors plus their Adam moments and shared step count."""

    tensors: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def fresh(cls, tensors: dict[str, np.ndarray]) -> "LayerParams":
        tensors = {k: np.asarray(t, dtype=np.float64) for k, t in tensors.items()}
        return cls(tensors,
                   {k: np.zeros_like(t) for k, t in tensors.items()},
                   {k: np.zeros_like(t) for k, t in tensors.items()})


def adam_step(params: LayerParams, grads: dict[str, np.ndarray], lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> LayerParams:
    """One bias-corrected Adam update; returns new params, inputs untouched."""
    step = params.step + 1
    tensors, m_new, v_new = {}, {}, {}
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    for name, p in params.tensors.items():
        if name not in grads:
            raise MissingGradientError(f"no gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name!r} has the wrong shape", g.shape, p.shape)
        m = beta1 * params.m[name] + (1.0 - beta1) * g
        v = beta2 * params.v[name] + (1.0 - beta2) * g * g
        tensors[name] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        m_new[name] = m
        v_new[name] = v
    return LayerParams(tensors, m_new, v_new, step)
