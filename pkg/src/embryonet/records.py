"""Embryo records and the three-subset dataset container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

SUBSETS = ("unlabeled", "graded", "kid")


@dataclass(eq=False)
class EmbryoRecord:
    """One embryo video.

    ``frames`` is ``(T, H, W)`` float32 in [0, 1]. ``grades`` holds the five
    panel grades when the embryo was graded; ``label`` is 1 (implanted) or 0
    (failed) for known-implantation embryos.
    """

    embryo_id: str
    patient_id: str
    frames: np.ndarray
    subset: str
    grades: tuple[int, ...] | None = None
    label: int | None = None

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def frame_size(self) -> int:
        return int(self.frames.shape[1])


@dataclass(eq=False)
class Dataset:
    unlabeled: list[EmbryoRecord] = field(default_factory=list)
    graded: list[EmbryoRecord] = field(default_factory=list)
    kid: list[EmbryoRecord] = field(default_factory=list)

    def __iter__(self) -> Iterator[EmbryoRecord]:
        yield from self.unlabeled
        yield from self.graded
        yield from self.kid

    def __len__(self) -> int:
        return len(self.unlabeled) + len(self.graded) + len(self.kid)

    def subset(self, name: str) -> list[EmbryoRecord]:
        if name not in SUBSETS:
            raise KeyError(name)
        return getattr(self, name)
