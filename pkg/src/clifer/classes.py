"""Expression class vocabulary and the labelled-sequence record."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .errors import InputError, ProtocolError

# Canonical order: used for every label tie-break and for report layout.
CLASSES: tuple[str, ...] = ("neutral", "happy", "surprise", "anger", "fear", "sadness")
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}


def check_label(label: str) -> str:
    if label not in CLASS_INDEX:
        raise ProtocolError(f"unknown class label {label!r}; expected one of {', '.join(CLASSES)}")
    return label


def check_order(order) -> tuple[str, ...]:
    order = tuple(order)
    if sorted(order) != sorted(CLASSES) or len(order) != len(CLASSES):
        raise ProtocolError(f"class order must be a permutation of {CLASSES}, got {order}")
    return order


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    """An ordered run of feature frames sharing one label for one subject."""

    subject_id: Hashable
    label: str
    frames: np.ndarray
    sample_id: Hashable = None

    def __post_init__(self):
        check_label(self.label)
        frames = np.array(self.frames, dtype=float)
        if frames.ndim == 1:
            frames = frames[None, :]
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise InputError("a sequence needs at least one frame of dimension >= 1")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabeledSequence):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.sample_id == other.sample_id
            and self.label == other.label
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )

    __hash__ = None
