"""Synthetic time-lapse embryo datasets with a known latent viability.

Each embryo draws a viability ``v ~ U(0, 1)``. Its video shows a bright disk
that grows over time at a rate proportional to ``v``, overlaid with blocky
fragmentation speckle whose amplitude is proportional to ``1 - v``. Five
simulated raters grade ``v`` with Gaussian noise, and the implantation label is
a Bernoulli draw whose log-odds are linear in ``v``.

``signal_strength`` controls everything observable about ``v``: it is the slope
of the outcome log-odds, and ``tanh(signal_strength)`` scales how much of ``v``
reaches the pixels. At zero the frames and the labels are both independent of
``v`` (the raters still see it, but raters never see pixels).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .records import Dataset, EmbryoRecord

N_RATERS = 5


@dataclass(frozen=True)
class SyntheticConfig:
    n_unlabeled: int = 800
    n_graded: int = 300
    n_kid: int = 272
    frames_per_video: int = 16
    frame_size: int = 32
    signal_strength: float = 10.0
    rater_noise_std: float = 1.0
    target_prevalence: float = 0.79
    pixel_noise_std: float = 0.03
    seed: int = 0

    def __post_init__(self):
        for name in ("n_unlabeled", "n_graded", "n_kid"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.frames_per_video < 1 or self.frame_size < 4:
            raise ValueError("need frames_per_video >= 1 and frame_size >= 4")
        if not 0.0 < self.target_prevalence < 1.0:
            raise ValueError("target_prevalence must lie in (0, 1)")
        if self.signal_strength < 0 or self.rater_noise_std < 0 or self.pixel_noise_std < 0:
            raise ValueError("signal_strength and noise levels must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OutcomeCalibration:
    """Implantation probability is ``sigmoid(slope * (v - 0.5) + offset)``."""

    slope: float
    offset: float

    def probability(self, v):
        z = self.slope * (np.asarray(v, dtype=np.float64) - 0.5) + self.offset
        return expit(z)


def expected_positive_rate(slope: float, offset: float) -> float:
    """Mean of ``sigmoid(slope*(v-0.5)+offset)`` for ``v ~ U(0,1)``, in closed form."""
    if slope == 0:
        return float(1.0 / (1.0 + np.exp(-offset)))
    hi = np.logaddexp(0.0, slope / 2 + offset)
    lo = np.logaddexp(0.0, -slope / 2 + offset)
    return float((hi - lo) / slope)


def calibrate_outcome(signal_strength: float, prevalence: float) -> OutcomeCalibration:
    """Pick the offset so the mean positive rate equals ``prevalence``."""
    slope = float(signal_strength)
    span = 50.0 + slope
    offset = brentq(lambda b: expected_positive_rate(slope, b) - prevalence, -span, span, xtol=1e-14)
    return OutcomeCalibration(slope, float(offset))


def _image_viability(v: float, signal_strength: float) -> float:
    return 0.5 + float(np.tanh(signal_strength)) * (v - 0.5)


def render_frame(v: float, t: int, config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    """One ``(H, W)`` grayscale frame in [0, 1] at time index ``t``."""
    if not 0 <= t < config.frames_per_video:
        raise ValueError(f"t={t} outside 0..{config.frames_per_video - 1}")
    size = config.frame_size
    vi = _image_viability(v, config.signal_strength)
    progress = t / (config.frames_per_video - 1) if config.frames_per_video > 1 else 1.0
    radius = size * (0.12 + 0.28 * vi * progress)

    cy, cx = size / 2 - 0.5 + rng.uniform(-1.0, 1.0, size=2)
    yy, xx = np.mgrid[0:size, 0:size]
    dist = np.hypot(yy - cy, xx - cx)
    inside = np.clip(radius - dist + 0.5, 0.0, 1.0)

    block = 4 if size >= 16 else 1
    coarse = rng.uniform(-1.0, 1.0, size=(-(-size // block),) * 2)
    speckle = np.kron(coarse, np.ones((block, block)))[:size, :size]

    frame = 0.1 + inside * (0.65 + 0.5 * (1.0 - vi) * speckle)
    frame = frame + rng.normal(0.0, config.pixel_noise_std, size=(size, size))
    return np.clip(frame, 0.0, 1.0)


def render_video(v: float, config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    return np.stack([render_frame(v, t, config, rng) for t in range(config.frames_per_video)]
                    ).astype(np.float32)


def sample_grades(v: float, rater_noise_std: float, rng: np.random.Generator) -> tuple[int, ...]:
    """Five independent rater grades: ``clamp(round(1 + 4v + noise), 1, 5)``."""
    raw = 1.0 + 4.0 * v + rng.normal(0.0, rater_noise_std, size=N_RATERS)
    # half-up rounding so v=0.5 with no noise lands on exactly 3
    return tuple(int(g) for g in np.clip(np.floor(raw + 0.5), 1, 5))


def sample_outcome(v: float, calibration: OutcomeCalibration, rng: np.random.Generator) -> int:
    return int(rng.random() < calibration.probability(v))


def _embryo_rng(seed: int, subset_index: int, embryo_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, subset_index, embryo_index])


def generate_dataset(config: SyntheticConfig) -> Dataset:
    """Build the unlabeled, graded and known-implantation subsets.

    Patients own 1 to 3 embryos each and never span subsets. Every embryo is
    rendered from its own derived generator, so output depends only on
    ``config``.
    """
    calibration = calibrate_outcome(config.signal_strength, config.target_prevalence)
    patient_rng = np.random.default_rng([config.seed, 99])
    dataset = Dataset()
    patient_no = 0
    embryo_no = 0
    for subset_index, (name, count) in enumerate(
            (("unlabeled", config.n_unlabeled), ("graded", config.n_graded), ("kid", config.n_kid))):
        records = dataset.subset(name)
        remaining_in_patient = 0
        patient_id = ""
        for i in range(count):
            if remaining_in_patient == 0:
                patient_no += 1
                patient_id = f"P{patient_no:05d}"
                remaining_in_patient = int(patient_rng.integers(1, 4))
            remaining_in_patient -= 1
            embryo_no += 1
            rng = _embryo_rng(config.seed, subset_index, i)
            v = float(rng.uniform())
            frames = render_video(v, config, rng)
            grades = sample_grades(v, config.rater_noise_std, rng) if name != "unlabeled" else None
            label = sample_outcome(v, calibration, rng) if name == "kid" else None
            records.append(EmbryoRecord(f"E{embryo_no:06d}", patient_id, frames, name, grades, label))
    return dataset
