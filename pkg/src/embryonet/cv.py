"""Patient-grouped k-fold cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FoldError, LeakageError
from .records import EmbryoRecord


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: dict[str, int]  # embryo_id -> fold index

    def to_dict(self) -> dict:
        return {"k": self.k, "fold_of": dict(sorted(self.fold_of.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "FoldAssignment":
        return cls(int(d["k"]), {str(e): int(f) for e, f in d["fold_of"].items()})


def grouped_kfold(records: Sequence[EmbryoRecord], k: int = 10, seed: int = 0) -> FoldAssignment:
    """Shuffle patients with ``seed`` and deal them round-robin into ``k`` folds."""
    if k < 2:
        raise FoldError(f"k must be >= 2, got {k}")
    patients = sorted({r.patient_id for r in records})
    if len(patients) < k:
        raise FoldError(f"{len(patients)} patients cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(patients))
    fold_of_patient = {patients[p]: i % k for i, p in enumerate(order)}
    fold_of = {}
    for r in records:
        if r.embryo_id in fold_of:
            raise FoldError(f"duplicate embryo_id {r.embryo_id}")
        fold_of[r.embryo_id] = fold_of_patient[r.patient_id]
    return FoldAssignment(k, fold_of)


def fold_split(records: Sequence[EmbryoRecord], assignment: FoldAssignment, fold_index: int):
    """Returns ``(train, validation)`` where validation is fold ``fold_index``."""
    if not 0 <= fold_index < assignment.k:
        raise FoldError(f"fold_index {fold_index} outside 0..{assignment.k - 1}")
    train, validation = [], []
    for r in records:
        try:
            fold = assignment.fold_of[r.embryo_id]
        except KeyError:
            raise FoldError(f"embryo {r.embryo_id} has no fold assignment") from None
        (validation if fold == fold_index else train).append(r)
    return train, validation


def assert_disjoint_patients(train: Sequence[EmbryoRecord], validation: Sequence[EmbryoRecord]) -> None:
    shared = {r.patient_id for r in train} & {r.patient_id for r in validation}
    if shared:
        raise LeakageError(f"patients on both sides of the split: {sorted(shared)[:5]}")
