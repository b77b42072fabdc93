"""Convolutional frame autoencoder whose encoder yields per-frame embeddings.

The encoder is a chain of layer descriptors (conv, pool, dense). Each conv and
dense layer carries its ReLU, except the last encoder layer, which is linear so
the embedding is unconstrained. The decoder mirrors the encoder in reverse:
dense -> dense, conv -> transposed conv, pool -> nearest upsampling, and ends
in a sigmoid so reconstructions live in [0, 1] like the frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import EmptyInputError, ShapeError, SpecError
from .nn.optim import LayerParams, adam_step
from .utils import to_float32_grid


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" | "pool" | "dense"
    size: int  # channels for conv, units for dense, window for pool
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "size": self.size, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding}


def conv(channels: int, kernel: int = 3, stride: int = 1, padding: int | None = None) -> LayerSpec:
    return LayerSpec("conv", channels, kernel, stride, kernel // 2 if padding is None else padding)


def pool(size: int = 2) -> LayerSpec:
    return LayerSpec("pool", size, size, size, 0)


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units, 1, 1, 0)


@dataclass(frozen=True)
class EncoderSpec:
    layers: tuple[LayerSpec, ...]
    embedding_dim: int
    frame_size: int

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {"layers": [layer.to_dict() for layer in self.layers],
                "embedding_dim": self.embedding_dim, "frame_size": self.frame_size}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(tuple(LayerSpec(**layer) for layer in d["layers"]),
                   int(d["embedding_dim"]), int(d["frame_size"]))

    def shapes(self) -> list[tuple[int, ...]]:
        """Activation shapes ``[input, after layer 0, ...]``; validates the chain."""
        if not self.layers:
            raise SpecError("encoder has no layers")
        shape: tuple[int, ...] = (1, self.frame_size, self.frame_size)
        out = [shape]
        for idx, layer in enumerate(self.layers):
            if layer.size < 1:
                raise SpecError(f"{layer.kind} size must be positive, got {layer.size}", idx)
            if layer.kind == "conv":
                if len(shape) != 3:
                    raise SpecError("conv layer after a dense layer", idx)
                c, h, w = shape
                if layer.kernel > h + 2 * layer.padding or layer.stride < 1:
                    raise SpecError(f"kernel {layer.kernel} does not fit a {h}x{w} input", idx)
                shape = (layer.size,
                         nn.conv_output_size(h, layer.kernel, layer.stride, layer.padding),
                         nn.conv_output_size(w, layer.kernel, layer.stride, layer.padding))
            elif layer.kind == "pool":
                if len(shape) != 3:
                    raise SpecError("pool layer after a dense layer", idx)
                c, h, w = shape
                if h % layer.size or w % layer.size:
                    raise SpecError(f"pool {layer.size} does not divide {h}x{w}", idx)
                shape = (c, h // layer.size, w // layer.size)
            elif layer.kind == "dense":
                shape = (layer.size,)
            else:
                raise SpecError(f"unknown layer kind {layer.kind!r}", idx)
            out.append(shape)
        final = int(np.prod(out[-1]))
        if final != self.embedding_dim:
            raise SpecError(
                f"chain ends at {final} dims, embedding_dim is {self.embedding_dim}",
                len(self.layers) - 1)
        return out


def desk_encoder_spec(frame_size: int = 32, embedding_dim: int = 32) -> EncoderSpec:
    return EncoderSpec((conv(8, stride=2), conv(16, stride=2), conv(32, stride=2), dense(embedding_dim)),
                       embedding_dim, frame_size)


def full_encoder_spec() -> EncoderSpec:
    """Ten-layer, 968-d encoder for 256x256 frames. Not trained in CI."""
    return EncoderSpec((
        conv(16, stride=2), conv(16), pool(2),
        conv(32, stride=2), conv(32), pool(2),
        conv(64, stride=2), conv(64),
        dense(2048), dense(968),
    ), 968, 256)


@dataclass(frozen=True)
class AutoencoderModel:
    spec: EncoderSpec
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def embedding_dim(self) -> int:
        return self.spec.embedding_dim


def parameter_shapes(spec: EncoderSpec) -> dict[str, tuple[int, ...]]:
    shapes = spec.shapes()
    out = {}
    for idx, layer in enumerate(spec.layers):
        src = shapes[idx]
        if layer.kind == "conv":
            kshape = (layer.size, src[0], layer.kernel, layer.kernel)
            out[f"enc{idx}.W"] = kshape
            out[f"enc{idx}.b"] = (layer.size,)
            out[f"dec{idx}.W"] = kshape
            out[f"dec{idx}.b"] = (src[0],)
        elif layer.kind == "dense":
            n_in = int(np.prod(src))
            out[f"enc{idx}.W"] = (layer.size, n_in)
            out[f"enc{idx}.b"] = (layer.size,)
            out[f"dec{idx}.W"] = (n_in, layer.size)
            out[f"dec{idx}.b"] = (n_in,)
    return out


def build_autoencoder(spec: EncoderSpec, seed: int) -> AutoencoderModel:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(spec).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif len(shape) == 4:
            c_out, c_in, kh, kw = shape
            params[name] = nn.glorot_uniform(rng, shape, c_in * kh * kw, c_out * kh * kw)
        else:
            params[name] = nn.glorot_uniform(rng, shape, shape[1], shape[0])
    return AutoencoderModel(spec, to_float32_grid(params))


def _as_batch(frames, spec: EncoderSpec) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, None]
    elif x.ndim == 3:
        x = x[:, None]
    expected = (1, spec.frame_size, spec.frame_size)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ShapeError("frames do not match the encoder input", x.shape, expected)
    return x


def _encode(params, spec: EncoderSpec, x, keep: bool):
    last = len(spec.layers) - 1
    acts = [x]
    for idx, layer in enumerate(spec.layers):
        if layer.kind == "conv":
            x = nn.conv2d(x, params[f"enc{idx}.W"], layer.stride, layer.padding, params[f"enc{idx}.b"])
        elif layer.kind == "pool":
            x = nn.max_pool2d(x, layer.size)
        else:
            x = nn.dense(x.reshape(len(x), -1), params[f"enc{idx}.W"], params[f"enc{idx}.b"])
        if layer.kind != "pool" and idx != last:
            x = nn.relu(x)
        if keep:
            acts.append(x)
    z = x.reshape(len(x), -1)
    return (z, acts) if keep else (z, None)


def _decode(params, spec: EncoderSpec, z):
    shapes = spec.shapes()
    x = z.reshape(len(z), *shapes[-1])
    acts = [x]
    for idx in reversed(range(len(spec.layers))):
        layer = spec.layers[idx]
        src = shapes[idx]
        if layer.kind == "conv":
            x = nn.conv_transpose2d(x, params[f"dec{idx}.W"], layer.stride, layer.padding,
                                    src[1:], params[f"dec{idx}.b"])
        elif layer.kind == "pool":
            x = nn.upsample2d(x, layer.size)
        else:
            x = nn.dense(x.reshape(len(x), -1), params[f"dec{idx}.W"], params[f"dec{idx}.b"])
            x = x.reshape(len(x), *src)
        if idx == 0:
            x = nn.sigmoid(x)
        elif layer.kind != "pool":
            x = nn.relu(x)
        acts.append(x)
    return x, acts


def reconstruct(model: AutoencoderModel, frames) -> np.ndarray:
    """Decode(encode(frames)); output has shape ``(N, 1, H, W)``."""
    x = _as_batch(frames, model.spec)
    z, _ = _encode(model.params, model.spec, x, keep=False)
    return _decode(model.params, model.spec, z)[0]


def reconstruction_loss(params, spec: EncoderSpec, x):
    """Mean L2 reconstruction loss of batch ``x`` and its gradient for every parameter."""
    z, enc_acts = _encode(params, spec, x, keep=True)
    recon, dec_acts = _decode(params, spec, z)
    loss = nn.l2_loss(recon, x)
    grads = {}
    n_layers = len(spec.layers)

    g = loss.gradient
    # decoder step j mirrors encoder layer n_layers-1-j; dec_acts[j] is its input
    for idx in range(n_layers):
        j = n_layers - 1 - idx
        layer = spec.layers[idx]
        inp, out = dec_acts[j], dec_acts[j + 1]
        if idx == 0:
            g = nn.sigmoid_backward(g, out)
        elif layer.kind != "pool":
            g = nn.relu_backward(g, out)
        if layer.kind == "conv":
            grads[f"dec{idx}.b"] = g.sum(axis=(0, 2, 3))
            g, grads[f"dec{idx}.W"] = nn.conv_transpose2d_backward(
                g, inp, params[f"dec{idx}.W"], layer.stride, layer.padding)
        elif layer.kind == "pool":
            g = nn.upsample2d_backward(g, layer.size)
        else:
            gx, grads[f"dec{idx}.W"], grads[f"dec{idx}.b"] = nn.dense_backward(
                g.reshape(len(g), -1), inp.reshape(len(inp), -1), params[f"dec{idx}.W"])
            g = gx.reshape(inp.shape)

    g = g.reshape(enc_acts[-1].shape)
    for idx in reversed(range(n_layers)):
        layer = spec.layers[idx]
        inp, out = enc_acts[idx], enc_acts[idx + 1]
        if layer.kind != "pool" and idx != n_layers - 1:
            g = nn.relu_backward(g, out)
        if layer.kind == "conv":
            grads[f"enc{idx}.b"] = g.sum(axis=(0, 2, 3))
            g, grads[f"enc{idx}.W"] = nn.conv2d_backward(
                g, inp, params[f"enc{idx}.W"], layer.stride, layer.padding)
        elif layer.kind == "pool":
            g = nn.max_pool2d_backward(g, inp, layer.size)
        else:
            gx, grads[f"enc{idx}.W"], grads[f"enc{idx}.b"] = nn.dense_backward(
                g, inp.reshape(len(inp), -1), params[f"enc{idx}.W"])
            g = gx.reshape(inp.shape)
    return loss.value, grads


def train_autoencoder(model: AutoencoderModel, frames, epochs: int, batch_size: int = 16,
                      seed: int = 0, lr: float = 1e-3):
    """Minibatch Adam on mean L2 reconstruction loss.

    Returns ``(model, loss_history)`` with one epoch-mean loss per epoch.
    """
    if len(frames) == 0:
        raise EmptyInputError("train_autoencoder needs at least one frame")
    x = _as_batch(frames, model.spec)
    if epochs <= 0:
        return model, []
    rng = np.random.default_rng(seed)
    state = LayerParams.fresh(model.params)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), batch_size):
            batch = x[order[start:start + batch_size]]
            value, grads = reconstruction_loss(state.tensors, model.spec, batch)
            state = adam_step(state, grads, lr=lr)
            total += value * len(batch)
        history.append(total / len(x))
    meta = dict(model.metadata, seed=seed, epochs=model.metadata.get("epochs", 0) + epochs,
                final_loss=history[-1],
                loss_history=list(model.metadata.get("loss_history", [])) + history)
    return replace(model, params=to_float32_grid(state.tensors), metadata=meta), history


def encode(model: AutoencoderModel, frames, batch_size: int = 256) -> np.ndarray:
    """Embeddings for a batch of frames, shape ``(N, embedding_dim)``."""
    x = _as_batch(frames, model.spec)
    chunks = [_encode(model.params, model.spec, x[s:s + batch_size], keep=False)[0]
              for s in range(0, len(x), batch_size)]
    return np.concatenate(chunks) if chunks else np.empty((0, model.embedding_dim))


def encode_frame(model: AutoencoderModel, frame) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    expected = (model.spec.frame_size, model.spec.frame_size)
    if frame.shape not in (expected, (1, *expected)):
        raise ShapeError("frame does not match the encoder input", frame.shape, (1, *expected))
    return encode(model, frame.reshape(1, 1, *expected))[0]


def embed_video(model: AutoencoderModel, frames) -> np.ndarray:
    """One embedding row per frame, in frame order."""
    if len(frames) == 0:
        raise EmptyInputError("embed_video needs at least one frame")
    return encode(model, frames)
