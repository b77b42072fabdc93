"""End-to-end run: pretrain, grouped CV over grade and implantation models, evaluation."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .autoencoder import AutoencoderModel, build_autoencoder, embed_video, train_autoencoder
from .config import ExperimentConfig
from .cv import assert_disjoint_patients, fold_split, grouped_kfold
from .errors import EmbryoNetError, StageError
from .records import Dataset, EmbryoRecord
from .sequence import (
    SequenceModel, panel_to_distribution, predict_implantation_batch, train_grade_model,
    transfer_binary_head,
)
from .storage import dataset_fingerprint, load_dataset
from .utils import derive_seed

log = logging.getLogger(__name__)

REPORT_FORMAT = "embryonet-report/1"

REFERENCE_VALUES = {
    "status": "reference, not reproduced",
    "source": "published clinical results of the original study (272 embryos with known implantation)",
    "model_auc": {"mean": 0.82, "std": 0.07},
    "panel_auc": {"mean": 0.58, "std": 0.04},
    "model_ppv": 0.93,
    "model_npv": 0.58,
    "panel_ppv": {"mean": 0.81, "std": 0.01},
    "panel_npv": {"mean": 0.23, "std": 0.08},
    "random_baseline": {"ppv": 0.79, "npv": 0.21},
}


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (EmbryoNetError, ValueError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class EvaluationReport:
    config: dict
    seed: int
    fingerprint: dict
    autoencoder: dict
    folds: list
    pooled: dict
    panel: dict
    baseline: dict
    predictions: list
    reference_values: dict = field(default_factory=lambda: dict(REFERENCE_VALUES))
    format: str = REPORT_FORMAT

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**d)


def pretrain_autoencoder(dataset: Dataset, config: ExperimentConfig, seed: int):
    """Train the frame autoencoder on a subsample of unlabeled frames."""
    frames = []
    for r in dataset.unlabeled:
        step = max(1, r.frame_count // config.ae_frames_per_video)
        frames.append(r.frames[::step][:config.ae_frames_per_video])
    if not frames:
        frames = [np.zeros((0, config.frame_size, config.frame_size))]
    frames = np.concatenate(frames)
    model = build_autoencoder(config.encoder_spec(), derive_seed(seed, "ae-init"))
    return train_autoencoder(model, frames, config.ae_epochs, config.ae_batch_size,
                             derive_seed(seed, "ae-train"), config.ae_lr)


def embed_records(model: AutoencoderModel, records) -> dict[str, np.ndarray]:
    return {r.embryo_id: embed_video(model, r.frames) for r in records}


def train_grader(graded, embeddings, config: ExperimentConfig, seed: int) -> SequenceModel:
    targets = np.array([panel_to_distribution(r.grades) for r in graded])
    model, _ = train_grade_model([embeddings[r.embryo_id] for r in graded], targets,
                                 config.grade_hyper(), seed)
    return model


def finetune(grade_model, kid, embeddings, config: ExperimentConfig, seed: int) -> SequenceModel:
    model, _ = transfer_binary_head(grade_model, [embeddings[r.embryo_id] for r in kid],
                                    [r.label for r in kid], config.transfer_policy,
                                    config.binary_hyper(), seed)
    return model


def _roc_block(examples, repetitions: int, seed: int, thresholds: dict[str, float]) -> dict:
    curve = ev.roc_curve(examples)
    labelled = dict(thresholds)
    labelled["youden"] = ev.youden_threshold(curve)
    return {
        "roc": {"thresholds": [None if np.isinf(t) else float(t) for t in curve.thresholds],
                "fpr": curve.fpr.tolist(), "tpr": curve.tpr.tolist()},
        "auc": ev.auc(curve),
        "bootstrap": ev.bootstrap_auc(examples, repetitions, seed).to_dict(),
        "predictive_values": {name: ev.predictive_values(examples, t).to_dict()
                              for name, t in labelled.items()},
    }


def _has_both(labels) -> bool:
    return 0 < sum(labels) < len(labels)


def run_experiment(data, config: ExperimentConfig, seed: int | None = None,
                   autoencoder: AutoencoderModel | None = None) -> EvaluationReport:
    """Full protocol on a dataset directory (or an in-memory :class:`Dataset`).

    The autoencoder is pretrained once on the unlabeled pool. Each fold trains a
    grade model on graded training embryos, transfers it to a binary head on
    known-implantation training embryos and scores the held-out ones. Scores
    are pooled across folds before computing ROC, AUC and predictive values.
    """
    seed = config.seed if seed is None else seed
    with stage("load"):
        dataset = data if isinstance(data, Dataset) else load_dataset(Path(data))
        if not dataset.graded or not dataset.kid:
            raise ValueError("dataset needs graded and kid subsets")
    with stage("pretrain"):
        if autoencoder is None:
            autoencoder, _ = pretrain_autoencoder(dataset, config, seed)
        ae_history = list(autoencoder.metadata.get("loss_history", []))
        log.info("autoencoder ready (loss history %s)", ae_history)
    with stage("embed"):
        embeddings = embed_records(autoencoder, dataset.graded + dataset.kid)

    labelled: list[EmbryoRecord] = dataset.graded + dataset.kid
    with stage("cv"):
        assignment = grouped_kfold(labelled, config.folds, derive_seed(seed, "folds"))

    scores: dict[str, float] = {}
    folds = []
    for fold in range(config.folds):
        with stage(f"fold-{fold}"):
            train, validation = fold_split(labelled, assignment, fold)
            graded_train = [r for r in train if r.subset == "graded"]
            kid_train = [r for r in train if r.subset == "kid"]
            kid_val = [r for r in validation if r.subset == "kid"]
            assert_disjoint_patients(graded_train + kid_train, kid_val)
            grader = train_grader(graded_train, embeddings, config, derive_seed(seed, "grade", fold))
            binary = finetune(grader, kid_train, embeddings, config, derive_seed(seed, "binary", fold))
            probs = predict_implantation_batch(binary, [embeddings[r.embryo_id] for r in kid_val]) \
                if kid_val else np.empty(0)
            scores.update({r.embryo_id: float(p) for r, p in zip(kid_val, probs)})
            entry = {"fold": fold, "n_train_graded": len(graded_train), "n_train_kid": len(kid_train),
                     "n_validation": len(kid_val),
                     "grade_final_loss": grader.metadata["final_loss"],
                     "binary_final_loss": binary.metadata["final_loss"], "auc": None, "bootstrap": None}
            labels = [r.label for r in kid_val]
            if _has_both(labels):
                examples = ev.scored_examples(probs, labels)
                entry["auc"] = ev.auc(ev.roc_curve(examples))
                entry["bootstrap"] = ev.bootstrap_auc(
                    examples, config.bootstrap_repetitions, derive_seed(seed, "boot", fold)).to_dict()
            folds.append(entry)
            log.info("fold %d: auc=%s", fold, entry["auc"])

    with stage("evaluate"):
        kid = dataset.kid
        labels = [r.label for r in kid]
        model_examples = ev.scored_examples([scores[r.embryo_id] for r in kid], labels)
        fold_aucs = [f["auc"] for f in folds if f["auc"] is not None]
        pooled = {
            "model": _roc_block(model_examples, config.bootstrap_repetitions, derive_seed(seed, "boot-pooled"),
                                {"fixed": config.model_threshold}),
            "fold_mean_auc": float(np.mean(fold_aucs)) if fold_aucs else None,
            "fold_std_auc": float(np.std(fold_aucs)) if fold_aucs else None,
        }

        grade_rows = np.array([r.grades for r in kid])
        panel_examples = ev.scored_examples([ev.panel_score(g) for g in grade_rows], labels)
        grader_aucs = ev.per_grader_auc(grade_rows, labels)
        grader_pvs = [ev.predictive_values(ev.scored_examples(grade_rows[:, j], labels), config.panel_threshold)
                      for j in range(grade_rows.shape[1])]
        panel = {
            "aggregation": "mean of the five grades",
            "pooled_mean_score": _roc_block(panel_examples, config.bootstrap_repetitions,
                                            derive_seed(seed, "boot-panel"),
                                            {"recommend_transfer": config.panel_threshold}),
            "per_grader": {
                "threshold": config.panel_threshold,
                "auc": grader_aucs,
                "auc_mean": float(np.mean(grader_aucs)),
                "auc_std": float(np.std(grader_aucs)),
                "ppv": [pv.ppv for pv in grader_pvs],
                "npv": [pv.npv for pv in grader_pvs],
            },
        }
        baseline = {"random": ev.random_baseline(model_examples).to_dict()}
        predictions = [{"embryo_id": r.embryo_id, "patient_id": r.patient_id,
                        "fold": assignment.fold_of[r.embryo_id], "label": r.label,
                        "score": scores[r.embryo_id], "panel_score": ev.panel_score(r.grades)}
                       for r in kid]

    return EvaluationReport(
        config=config.to_dict(), seed=seed,
        fingerprint={"config": config.fingerprint(), "dataset": dataset_fingerprint(dataset)},
        autoencoder={"loss_history": list(ae_history)},
        folds=folds, pooled=pooled, panel=panel, baseline=baseline, predictions=predictions)
