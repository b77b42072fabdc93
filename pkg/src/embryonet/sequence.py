"""LSTM over frame embeddings with a grade-distribution head or a binary head.

The head reads the last hidden state. A grade model is trained against the
panel's grade histogram; its trunk is then reused under a fresh one-logit head
for implantation prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import nn
from .errors import EmptyInputError, GradeError, ShapeError, SingleClassError, WrongHeadError
from .nn.optim import LayerParams, adam_step
from .utils import to_float32_grid

N_GRADES = 5
HEAD_SIZES = {"grade": N_GRADES, "binary": 1}
POLICIES = ("head-only", "full-finetune")


@dataclass(frozen=True)
class SequenceHyper:
    hidden_dim: int = 64
    epochs: int = 40
    batch_size: int = 32
    lr: float = 3e-3
    trunk_lr_scale: float = 0.1
    clip_norm: float = 5.0


@dataclass(frozen=True)
class SequenceModel:
    trunk: dict[str, np.ndarray]
    head: dict[str, np.ndarray]
    head_kind: str
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.head_kind not in HEAD_SIZES:
            raise ValueError(f"unknown head kind {self.head_kind!r}")
        _, u = nn.lstm_dims(self.trunk)
        expected = (HEAD_SIZES[self.head_kind], u)
        if self.head["W"].shape != expected or self.head["b"].shape != expected[:1]:
            raise ShapeError("head does not fit the trunk", self.head["W"].shape, expected)

    @property
    def input_dim(self) -> int:
        return nn.lstm_dims(self.trunk)[0]

    @property
    def hidden_dim(self) -> int:
        return nn.lstm_dims(self.trunk)[1]


def panel_to_distribution(grades: Sequence[int]) -> np.ndarray:
    """Histogram of five panel grades over grades 1..5."""
    grades = list(grades)
    if len(grades) != N_GRADES:
        raise GradeError(f"expected {N_GRADES} grades, got {len(grades)}")
    if any(int(g) != g or not 1 <= g <= N_GRADES for g in grades):
        raise GradeError(f"grades must be integers in 1..{N_GRADES}: {grades}")
    return np.bincount(np.asarray(grades, dtype=np.int64) - 1, minlength=N_GRADES) / len(grades)


def init_head(rng: np.random.Generator, kind: str, hidden_dim: int) -> dict[str, np.ndarray]:
    k = HEAD_SIZES[kind]
    return {"W": nn.glorot_uniform(rng, (k, hidden_dim), hidden_dim, k), "b": np.zeros(k)}


def init_sequence_model(input_dim: int, hidden_dim: int, kind: str, seed: int) -> SequenceModel:
    rng = np.random.default_rng(seed)
    trunk = nn.init_lstm(rng, input_dim, hidden_dim)
    return SequenceModel(to_float32_grid(trunk), to_float32_grid(init_head(rng, kind, hidden_dim)), kind)


def _logits(trunk, head, xs):
    hs, caches = nn.lstm_forward(xs, trunk)
    last = hs[:, -1]
    return nn.dense(last, head["W"], head["b"]), (hs, caches, last)


def _backward(trunk, head, dlogits, cache, need_trunk: bool):
    hs, caches, last = cache
    dlast, dw, db = nn.dense_backward(dlogits, last, head["W"])
    head_grads = {"W": dw, "b": db}
    if not need_trunk:
        return None, head_grads
    dhs = np.zeros_like(hs)
    dhs[:, -1] = dlast
    _, trunk_grads = nn.lstm_backward(dhs, caches, trunk)
    return trunk_grads, head_grads


def grade_loss_and_grads(trunk, head, xs, targets, need_trunk: bool = True):
    logits, cache = _logits(trunk, head, xs)
    loss = nn.softmax_cross_entropy(logits, targets)
    return (loss.value, *_backward(trunk, head, loss.gradient, cache, need_trunk))


def binary_loss_and_grads(trunk, head, xs, labels, weights=1.0, need_trunk: bool = True):
    logits, cache = _logits(trunk, head, xs)
    loss = nn.binary_cross_entropy(logits[:, 0], labels, weights)
    return (loss.value, *_backward(trunk, head, loss.gradient[:, None], cache, need_trunk))


def _as_videos(videos) -> list[np.ndarray]:
    out = [np.asarray(v, dtype=np.float64) for v in videos]
    if not out:
        raise EmptyInputError("no training videos")
    dim = out[0].shape[-1] if out[0].ndim == 2 else None
    for i, v in enumerate(out):
        if v.ndim != 2 or len(v) == 0 or v.shape[1] != dim:
            raise ShapeError(f"video {i} is not a nonempty (T, {dim}) embedding sequence", v.shape)
    return out


def _batches(lengths: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled minibatches, each holding sequences of one length."""
    perm = rng.permutation(len(lengths))
    chunks = []
    for length in np.unique(lengths):
        idx = perm[lengths[perm] == length]
        chunks.extend(idx[s:s + batch_size] for s in range(0, len(idx), batch_size))
    return [chunks[i] for i in rng.permutation(len(chunks))]


def _clip(grad_groups: list[dict], clip_norm: float) -> list[dict]:
    if not clip_norm:
        return grad_groups
    total = np.sqrt(sum(float(np.sum(g * g)) for group in grad_groups for g in group.values()))
    if total <= clip_norm:
        return grad_groups
    scale = clip_norm / total
    return [{k: g * scale for k, g in group.items()} for group in grad_groups]


def train_grade_model(videos, targets, hyper: SequenceHyper = SequenceHyper(), seed: int = 0):
    """Fit trunk and grade head to per-video grade distributions.

    ``videos`` is a sequence of ``(T, D)`` embedding arrays; ``targets`` an
    ``(N, 5)`` array of distributions. Returns ``(model, loss_history)``.
    """
    videos = _as_videos(videos)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (len(videos), N_GRADES):
        raise ShapeError("targets must be (N, 5)", targets.shape, (len(videos), N_GRADES))
    model = init_sequence_model(videos[0].shape[1], hyper.hidden_dim, "grade", seed)
    rng = np.random.default_rng([seed, 1])
    trunk = LayerParams.fresh(model.trunk)
    head = LayerParams.fresh(model.head)
    lengths = np.array([len(v) for v in videos])
    history = []
    for _ in range(hyper.epochs):
        total = 0.0
        for idx in _batches(lengths, hyper.batch_size, rng):
            xs = np.stack([videos[i] for i in idx])
            value, tg, hg = grade_loss_and_grads(trunk.tensors, head.tensors, xs, targets[idx])
            tg, hg = _clip([tg, hg], hyper.clip_norm)
            trunk = adam_step(trunk, tg, lr=hyper.lr)
            head = adam_step(head, hg, lr=hyper.lr)
            total += value * len(idx)
        history.append(total / len(videos))
    meta = {"seed": seed, "epochs": hyper.epochs, "final_loss": history[-1] if history else None}
    return SequenceModel(to_float32_grid(trunk.tensors), to_float32_grid(head.tensors), "grade", meta), history


def transfer_binary_head(grade_model: SequenceModel, videos, labels, policy: str = "full-finetune",
                         hyper: SequenceHyper = SequenceHyper(), seed: int = 0):
    """Replace the grade head with a one-logit head and train on implantation labels.

    ``head-only`` freezes the trunk; ``full-finetune`` also trains it at
    ``hyper.lr * hyper.trunk_lr_scale``. Positives are weighted by
    ``n_neg / n_pos`` so the loss is balanced. Returns ``(model, loss_history)``.
    """
    if grade_model.head_kind != "grade":
        raise WrongHeadError("transfer needs a model carrying the grade head")
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    videos = _as_videos(videos)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(videos),):
        raise ShapeError("one label per video required", labels.shape, (len(videos),))
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(f"binary training needs both classes (pos={n_pos}, neg={n_neg})")
    if videos[0].shape[1] != grade_model.input_dim:
        raise ShapeError("embedding width differs from the trunk input", videos[0].shape, (grade_model.input_dim,))
    weights = np.where(labels == 1, n_neg / n_pos, 1.0)

    rng = np.random.default_rng([seed, 2])
    head = LayerParams.fresh(to_float32_grid(init_head(rng, "binary", grade_model.hidden_dim)))
    trunk = LayerParams.fresh(grade_model.trunk)
    train_trunk = policy == "full-finetune"
    lengths = np.array([len(v) for v in videos])
    history = []
    for _ in range(hyper.epochs):
        total = 0.0
        for idx in _batches(lengths, hyper.batch_size, rng):
            xs = np.stack([videos[i] for i in idx])
            value, tg, hg = binary_loss_and_grads(trunk.tensors, head.tensors, xs, labels[idx],
                                                  weights[idx], need_trunk=train_trunk)
            if train_trunk:
                tg, hg = _clip([tg, hg], hyper.clip_norm)
                trunk = adam_step(trunk, tg, lr=hyper.lr * hyper.trunk_lr_scale)
            else:
                (hg,) = _clip([hg], hyper.clip_norm)
            head = adam_step(head, hg, lr=hyper.lr)
            total += value * len(idx)
        history.append(total / len(videos))
    trunk_out = to_float32_grid(trunk.tensors) if train_trunk else dict(grade_model.trunk)
    meta = {"seed": seed, "epochs": hyper.epochs, "policy": policy,
            "final_loss": history[-1] if history else None}
    return SequenceModel(trunk_out, to_float32_grid(head.tensors), "binary", meta), history


def _require(model: SequenceModel, kind: str) -> None:
    if model.head_kind != kind:
        raise WrongHeadError(f"wrong head: model carries {model.head_kind!r}, need {kind!r}")


def _stack_one(model: SequenceModel, embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0 or x.shape[1] != model.input_dim:
        raise ShapeError("embeddings must be a nonempty (T, D) array", x.shape, (model.input_dim,))
    return x[None]


def predict_grades(model: SequenceModel, embeddings) -> np.ndarray:
    _require(model, "grade")
    logits, _ = _logits(model.trunk, model.head, _stack_one(model, embeddings))
    return nn.softmax(logits[0])


def predict_implantation(model: SequenceModel, embeddings) -> float:
    _require(model, "binary")
    logits, _ = _logits(model.trunk, model.head, _stack_one(model, embeddings))
    return float(nn.sigmoid(logits[0, 0]))


def predict_implantation_batch(model: SequenceModel, videos) -> np.ndarray:
    """Probabilities for many videos, batched by sequence length."""
    _require(model, "binary")
    videos = _as_videos(videos)
    out = np.empty(len(videos))
    lengths = np.array([len(v) for v in videos])
    for length in np.unique(lengths):
        idx = np.flatnonzero(lengths == length)
        logits, _ = _logits(model.trunk, model.head, np.stack([videos[i] for i in idx]))
        out[idx] = nn.sigmoid(logits[:, 0])
    return out
