import numpy as np
import pytest

from embryonet.autoencoder import (
    EncoderSpec, build_autoencoder, conv, dense, desk_encoder_spec, embed_video, encode_frame,
    full_encoder_spec, pool, reconstruct, reconstruction_loss, train_autoencoder,
)
from embryonet.errors import EmptyInputError, ShapeError, SpecError
from embryonet.nn import finite_diff_grad, max_relative_error
from embryonet.synthdata import SyntheticConfig, render_frame


def synthetic_frames(n, size=32, seed=0):
    cfg = SyntheticConfig(frame_size=size)
    rng = np.random.default_rng(seed)
    return np.stack([render_frame(rng.uniform(), int(rng.integers(0, cfg.frames_per_video)), cfg, rng)
                     for _ in range(n)])


def test_desk_spec_shapes():
    spec = desk_encoder_spec()
    assert spec.shapes() == [(1, 32, 32), (8, 16, 16), (16, 8, 8), (32, 4, 4), (32,)]
    assert spec.layer_count == 4


def test_full_spec_accepted():
    spec = full_encoder_spec()
    assert spec.layer_count == 10
    assert spec.embedding_dim == 968
    assert spec.shapes()[-1] == (968,)


def test_spec_not_reaching_embedding_dim_names_layer():
    spec = EncoderSpec((conv(8, stride=2), conv(4, stride=2)), 32, 16)
    with pytest.raises(SpecError) as err:
        spec.shapes()
    assert err.value.layer == 1


def test_spec_with_oversized_kernel_names_layer():
    spec = EncoderSpec((conv(4, stride=2), conv(4, kernel=9, padding=0), dense(8)), 8, 8)
    with pytest.raises(SpecError) as err:
        build_autoencoder(spec, 0)
    assert err.value.layer == 1


def test_reconstruction_shape_round_trip():
    model = build_autoencoder(desk_encoder_spec(), 0)
    frames = synthetic_frames(3)
    assert reconstruct(model, frames).shape == (3, 1, 32, 32)


def test_same_seed_same_init():
    a = build_autoencoder(desk_encoder_spec(), 5)
    b = build_autoencoder(desk_encoder_spec(), 5)
    assert a.params.keys() == b.params.keys()
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_reconstruction_gradient_fd():
    spec = EncoderSpec((conv(2, stride=2), pool(2), conv(3), dense(4)), 4, 8)
    model = build_autoencoder(spec, 0)
    x = np.random.default_rng(1).uniform(0, 1, (2, 1, 8, 8))
    _, grads = reconstruction_loss(model.params, spec, x)
    for name, p in model.params.items():
        def f(v, name=name):
            return reconstruction_loss(dict(model.params, **{name: v}), spec, x)[0]
        assert max_relative_error(grads[name], finite_diff_grad(f, p, 1e-5)) < 1e-4, name


def test_training_halves_loss():
    frames = synthetic_frames(200)
    model = build_autoencoder(desk_encoder_spec(), 0)
    trained, history = train_autoencoder(model, frames, epochs=20, batch_size=16, seed=0)
    assert len(history) == 20
    assert history[-1] <= 0.5 * history[0]
    increases = sum(b > a for a, b in zip(history, history[1:]))
    assert increases <= 0.1 * (len(history) - 1)
    assert trained.metadata["final_loss"] == history[-1]
    assert trained.metadata["loss_history"] == history


def test_training_is_deterministic():
    frames = synthetic_frames(24)
    model = build_autoencoder(desk_encoder_spec(), 0)
    _, h1 = train_autoencoder(model, frames, epochs=2, batch_size=8, seed=4)
    _, h2 = train_autoencoder(model, frames, epochs=2, batch_size=8, seed=4)
    assert h1 == h2


def test_zero_epochs_is_identity():
    model = build_autoencoder(desk_encoder_spec(), 0)
    same, history = train_autoencoder(model, synthetic_frames(4), epochs=0)
    assert same is model and history == []


def test_empty_frames_rejected():
    model = build_autoencoder(desk_encoder_spec(), 0)
    with pytest.raises(EmptyInputError):
        train_autoencoder(model, [], epochs=1)


def test_encode_frame_contract():
    model = build_autoencoder(desk_encoder_spec(), 0)
    frame = synthetic_frames(1)[0]
    z = encode_frame(model, frame)
    assert z.shape == (32,)
    assert z.tobytes() == encode_frame(model, frame.copy()).tobytes()
    with pytest.raises(ShapeError):
        encode_frame(model, np.zeros((16, 16)))


def test_encode_frame_tiny_perturbation_is_bounded():
    model = build_autoencoder(desk_encoder_spec(), 0)
    frame = synthetic_frames(1)[0]
    bumped = frame + 1e-6 * np.random.default_rng(0).uniform(-1, 1, frame.shape)
    delta = encode_frame(model, bumped) - encode_frame(model, frame)
    assert np.all(np.isfinite(delta))
    assert np.abs(delta).max() < 1e-3


def test_embed_video_matches_encode_frame():
    model = build_autoencoder(desk_encoder_spec(), 0)
    frames = synthetic_frames(5)
    emb = embed_video(model, frames)
    assert emb.shape == (5, 32)
    for t in range(5):
        np.testing.assert_allclose(emb[t], encode_frame(model, frames[t]), rtol=1e-12, atol=1e-12)
    assert embed_video(model, frames[:1]).shape == (1, 32)
    with pytest.raises(EmptyInputError):
        embed_video(model, [])


def test_full_scale_embedding_length():
    model = build_autoencoder(full_encoder_spec(), 0)
    frame = np.random.default_rng(0).uniform(0, 1, (256, 256))
    assert encode_frame(model, frame).shape == (968,)
