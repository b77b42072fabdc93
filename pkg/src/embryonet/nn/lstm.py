"""LSTM cell and truncation-free backprop through time.

Parameters live in a flat dict with one weight matrix ``W_<gate>`` of shape
``(U, D + U)`` and one bias ``b_<gate>`` of shape ``(U,)`` per gate, where the
gates are input ``i``, forget ``f``, output ``o`` and candidate ``g``. The
affine input of every gate is ``concat(x, h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .layers import glorot_uniform, sigmoid

GATES = ("i", "f", "o", "g")


def init_lstm(rng: np.random.Generator, input_dim: int, hidden_dim: int,
              forget_bias: float = 1.0) -> dict[str, np.ndarray]:
    params = {}
    for gate in GATES:
        params[f"W_{gate}"] = glorot_uniform(
            rng, (hidden_dim, input_dim + hidden_dim), input_dim + hidden_dim, hidden_dim)
        params[f"b_{gate}"] = np.full(hidden_dim, forget_bias if gate == "f" else 0.0)
    return params


def lstm_dims(params) -> tuple[int, int]:
    """``(input_dim, hidden_dim)`` implied by a parameter dict."""
    try:
        w = params["W_i"]
    except KeyError:
        raise ShapeError("LSTM params lack W_i") from None
    u = w.shape[0]
    return w.shape[1] - u, u


def _check(params, x, h, c) -> None:
    d, u = lstm_dims(params)
    for gate in GATES:
        w, b = params.get(f"W_{gate}"), params.get(f"b_{gate}")
        if w is None or b is None:
            raise ShapeError(f"LSTM params lack gate {gate!r}")
        if w.shape != (u, d + u) or b.shape != (u,):
            raise ShapeError(f"gate {gate!r} has inconsistent shapes", w.shape, b.shape)
    if x.shape[-1] != d:
        raise ShapeError("x width does not match LSTM input dim", x.shape, (d,))
    if h.shape[-1] != u or c.shape[-1] != u:
        raise ShapeError("h/c width does not match LSTM hidden dim", h.shape, c.shape, (u,))


def _stacked(params):
    w = np.concatenate([params[f"W_{g}"] for g in GATES], axis=0)
    b = np.concatenate([params[f"b_{g}"] for g in GATES])
    return w, b


@dataclass
class StepCache:
    z: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def _step(x, h, c, w, b):
    u = h.shape[-1]
    z = np.concatenate([x, h], axis=-1)
    a = z @ w.T + b
    i = sigmoid(a[..., :u])
    f = sigmoid(a[..., u:2 * u])
    o = sigmoid(a[..., 2 * u:3 * u])
    g = np.tanh(a[..., 3 * u:])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    return o * tanh_c, c_new, StepCache(z, c, i, f, o, g, tanh_c)


def lstm_step(x, h, c, params):
    """One LSTM cell update; inputs may carry leading batch axes.

    Returns ``(h_new, c_new)``.
    """
    x, h, c = (np.asarray(a, dtype=np.float64) for a in (x, h, c))
    _check(params, x, h, c)
    h_new, c_new, _ = _step(x, h, c, *_stacked(params))
    return h_new, c_new


def _step_backward(dh, dc, cache: StepCache, w):
    """Backprop one step. Returns ``(dx_and_dh_prev, dc_prev, d_affine)``."""
    dc = dc + dh * cache.o * (1.0 - cache.tanh_c ** 2)
    do = dh * cache.tanh_c
    di = dc * cache.g
    dg = dc * cache.i
    df = dc * cache.c_prev
    da = np.concatenate([
        di * cache.i * (1.0 - cache.i),
        df * cache.f * (1.0 - cache.f),
        do * cache.o * (1.0 - cache.o),
        dg * (1.0 - cache.g ** 2),
    ], axis=-1)
    return da @ w, dc * cache.f, da


def _unstack_grads(dw, db, u):
    grads = {}
    for k, gate in enumerate(GATES):
        grads[f"W_{gate}"] = dw[k * u:(k + 1) * u]
        grads[f"b_{gate}"] = db[k * u:(k + 1) * u]
    return grads


def lstm_step_backward(dh_new, dc_new, x, h, c, params):
    """Gradients of ``sum(dh_new * h_new + dc_new * c_new)`` for one step.

    Returns ``(dx, dh, dc, param_grads)``. Recomputes the forward pass.
    """
    x, h, c = (np.asarray(a, dtype=np.float64) for a in (x, h, c))
    _check(params, x, h, c)
    d, u = lstm_dims(params)
    w, b = _stacked(params)
    _, _, cache = _step(x, h, c, w, b)
    dzh, dc_prev, da = _step_backward(np.asarray(dh_new, dtype=np.float64),
                                      np.asarray(dc_new, dtype=np.float64), cache, w)
    da2 = da.reshape(-1, 4 * u)
    z2 = cache.z.reshape(-1, d + u)
    grads = _unstack_grads(da2.T @ z2, da2.sum(axis=0), u)
    return dzh[..., :d], dzh[..., d:], dc_prev, grads


def lstm_forward(xs, params):
    """Run the cell over ``xs`` of shape ``(B, T, D)`` from zero state.

    Returns ``(hs, caches)`` with ``hs`` of shape ``(B, T, U)``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    d, u = lstm_dims(params)
    if xs.ndim != 3 or xs.shape[-1] != d:
        raise ShapeError("lstm_forward expects (B, T, D)", xs.shape, (d,))
    w, b = _stacked(params)
    n, t_len, _ = xs.shape
    h = np.zeros((n, u))
    c = np.zeros((n, u))
    hs = np.empty((n, t_len, u))
    caches = []
    for t in range(t_len):
        h, c, cache = _step(xs[:, t], h, c, w, b)
        hs[:, t] = h
        caches.append(cache)
    return hs, caches


def lstm_backward(dhs, caches, params):
    """BPTT for :func:`lstm_forward`. ``dhs`` is ``(B, T, U)``.

    Returns ``(dxs, param_grads)``.
    """
    d, u = lstm_dims(params)
    w, _ = _stacked(params)
    n, t_len, _ = dhs.shape
    dxs = np.empty((n, t_len, d))
    dw = np.zeros((4 * u, d + u))
    db = np.zeros(4 * u)
    dh = np.zeros((n, u))
    dc = np.zeros((n, u))
    for t in reversed(range(t_len)):
        dzh, dc, da = _step_backward(dh + dhs[:, t], dc, caches[t], w)
        dw += da.T @ caches[t].z
        db += da.sum(axis=0)
        dxs[:, t] = dzh[:, :d]
        dh = dzh[:, d:]
    return dxs, _unstack_grads(dw, db, u)
