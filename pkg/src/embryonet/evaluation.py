"""ROC/AUC, bootstrap uncertainty, predictive values and the prevalence baseline.

Every classification rule here is ``predict positive iff score >= threshold``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GradeError, SingleClassError


@dataclass(frozen=True)
class ScoredExample:
    score: float
    label: int  # 1 = implanted, 0 = failed


def scored_examples(scores, labels) -> list[ScoredExample]:
    return [ScoredExample(float(s), int(y)) for s, y in zip(scores, labels)]


def _arrays(examples: Sequence[ScoredExample]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([e.score for e in examples], dtype=np.float64)
    labels = np.array([e.label for e in examples], dtype=np.int64)
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError("labels must be 0 or 1")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels


def _require_both(labels: np.ndarray) -> None:
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise SingleClassError(f"ROC undefined: need both classes (pos={n_pos}, n={len(labels)})")


@dataclass(frozen=True)
class RocCurve:
    """Points ordered from (0, 0) to (1, 1); ``thresholds[0]`` is +inf.

    ``fp`` and ``tp`` hold the integer counts behind each rate.
    """

    thresholds: np.ndarray
    fp: np.ndarray
    tp: np.ndarray

    @property
    def fpr(self) -> np.ndarray:
        return self.fp / self.fp[-1]

    @property
    def tpr(self) -> np.ndarray:
        return self.tp / self.tp[-1]

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _roc_counts(scores: np.ndarray, labels: np.ndarray):
    """Thresholds with cumulative (FP, TP) integer counts, starting at (inf, 0, 0)."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # last index of each run of tied scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    return np.r_[np.inf, s[ends]], np.r_[0, fp[ends]], np.r_[0, tp[ends]]


def _count_auc(fp: np.ndarray, tp: np.ndarray) -> float:
    # trapezoid on integer counts: exact until the single final division
    return float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1]))) / float(2 * fp[-1] * tp[-1])


def roc_curve(examples: Sequence[ScoredExample]) -> RocCurve:
    """One point per distinct score, plus the (0, 0) start; ties collapse."""
    scores, labels = _arrays(examples)
    _require_both(labels)
    return RocCurve(*_roc_counts(scores, labels))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return _count_auc(curve.fp, curve.tp)


def auc_pair_oracle(examples: Sequence[ScoredExample]) -> float:
    """Fraction of (positive, negative) pairs ordered correctly; ties count half."""
    scores, labels = _arrays(examples)
    _require_both(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


@dataclass(frozen=True)
class BootstrapSummary:
    mean: float
    std: float
    repetitions: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _uniform_resample(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, n, size=n)


def bootstrap_auc(examples: Sequence[ScoredExample], repetitions: int = 1000, seed: int = 0,
                  resample: Callable[[np.random.Generator, int], np.ndarray] | None = None
                  ) -> BootstrapSummary:
    """AUC mean and population std over resamples drawn with replacement.

    Single-class resamples are redrawn, so exactly ``repetitions`` AUCs are
    averaged. ``resample(rng, n)`` may be supplied to control the index draw.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    scores, labels = _arrays(examples)
    _require_both(labels)
    draw = resample or _uniform_resample
    rng = np.random.default_rng(seed)
    n = len(scores)
    values = np.empty(repetitions)
    for rep in range(repetitions):
        while True:
            idx = draw(rng, n)
            y = labels[idx]
            if 0 < y.sum() < len(y):
                break
        values[rep] = _count_auc(*_roc_counts(scores[idx], y)[1:])
    return BootstrapSummary(float(values.mean()), float(values.std()), repetitions, seed)


@dataclass(frozen=True)
class PredictiveValues:
    """PPV/NPV with their confusion counts; ``None`` marks an undefined value."""

    threshold: float | None
    tp: int | None
    fp: int | None
    tn: int | None
    fn: int | None
    ppv: float | None
    npv: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def predictive_values(examples: Sequence[ScoredExample], threshold: float) -> PredictiveValues:
    scores, labels = _arrays(examples)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    tn = int(np.sum(~predicted & (labels == 0)))
    fn = int(np.sum(~predicted & (labels == 1)))
    ppv = tp / (tp + fp) if tp + fp else None
    npv = tn / (tn + fn) if tn + fn else None
    return PredictiveValues(float(threshold), tp, fp, tn, fn, ppv, npv)


def random_baseline(examples: Sequence[ScoredExample]) -> PredictiveValues:
    """Expected PPV/NPV of a classifier that ignores the input: the class prevalences."""
    _, labels = _arrays(examples)
    if len(labels) == 0:
        raise ValueError("random_baseline needs at least one example")
    n_pos = int(labels.sum())
    return PredictiveValues(None, None, None, None, None,
                            n_pos / len(labels), (len(labels) - n_pos) / len(labels))


def youden_threshold(curve: RocCurve) -> float:
    """Threshold maximizing TPR - FPR; the highest such threshold on ties."""
    j = curve.tpr[1:] - curve.fpr[1:]
    return float(curve.thresholds[1:][int(np.argmax(j))])


def _check_grades(grades) -> np.ndarray:
    g = np.asarray(grades)
    if g.shape != (5,):
        raise GradeError(f"expected 5 grades, got shape {g.shape}")
    if np.any(g != np.round(g)) or np.any((g < 1) | (g > 5)):
        raise GradeError(f"grades must be integers in 1..5: {g.tolist()}")
    return g.astype(np.float64)


def panel_score(grades) -> float:
    """Mean of the five panel grades."""
    return float(_check_grades(grades).mean())


def per_grader_auc(grade_rows, labels) -> list[float]:
    """AUC of each grader's column of grades against the labels."""
    g = np.asarray(grade_rows)
    return [auc(roc_curve(scored_examples(g[:, j], labels))) for j in range(g.shape[1])]
