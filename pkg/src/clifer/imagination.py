"""Imagination: per-class feature samples synthesised from a subject's prototypes.

A generator turns prototypes of seen classes into samples for any target class,
keeping what is specific to the subject. :class:`TranslationModel` does this in
feature space: the subject's residual ``p - mean(source)`` is carried onto
``mean(target)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Protocol, Sequence

import numpy as np

from . import serial
from .classes import CLASS_INDEX, CLASSES, LabeledSequence, check_label
from .errors import FitError, GenerationError, InputError, ProtocolError

Sample = tuple[np.ndarray, str]


class ImaginationGenerator(Protocol):
    def imagine(
        self,
        prototypes: Sequence[tuple[np.ndarray, str]],
        targets: Sequence[str],
        n_per_class: int,
        seed: int,
    ) -> list[Sample]: ...


def _sample_rng(seed: int, label: str, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, CLASS_INDEX[label], index])


def _check_request(targets, n_per_class):
    targets = [check_label(t) for t in targets]
    if n_per_class < 0 or int(n_per_class) != n_per_class:
        raise InputError(f"n_per_class must be a non-negative integer, got {n_per_class}")
    return targets


@dataclass(frozen=True)
class TranslationModel:
    class_means: dict
    jitter_sigma: float = 0.05

    def __post_init__(self):
        missing = [c for c in CLASSES if c not in self.class_means]
        if missing:
            raise FitError(f"class means missing for: {', '.join(missing)}")
        dims = {np.asarray(v).shape for v in self.class_means.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise FitError("class means must be vectors of one dimension")
        if self.jitter_sigma < 0:
            raise InputError("jitter_sigma must be >= 0")
        means = {c: np.array(self.class_means[c], dtype=float) for c in CLASSES}
        for v in means.values():
            v.setflags(write=False)
        object.__setattr__(self, "class_means", means)

    @property
    def dim(self) -> int:
        return self.class_means[CLASSES[0]].size

    def imagine(self, prototypes, targets, n_per_class, seed) -> list[Sample]:
        targets = _check_request(targets, n_per_class)
        protos = [(np.asarray(p, dtype=float), check_label(src)) for p, src in prototypes]
        if not protos:
            raise GenerationError("imagination needs at least one prototype")
        for p, _ in protos:
            if p.shape != (self.dim,):
                raise InputError(f"prototype dimension {p.shape} does not match model dimension {self.dim}")
        out = []
        k = 0
        for c in targets:
            for i in range(n_per_class):
                p, src = protos[k % len(protos)]
                k += 1
                x = p - self.class_means[src] + self.class_means[c]
                if self.jitter_sigma > 0:
                    x = x + _sample_rng(seed, c, i).normal(0.0, self.jitter_sigma, self.dim)
                out.append((x, c))
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "translation_model",
            "version": 1,
            "class_means": {c: serial.array_hex(v) for c, v in self.class_means.items()},
            "jitter_sigma": serial.fhex(self.jitter_sigma),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TranslationModel":
        if doc.get("kind") != "translation_model":
            raise InputError("not a translation model snapshot")
        return cls(
            {c: serial.array_unhex(v, ndim=1) for c, v in doc["class_means"].items()},
            serial.funhex(doc["jitter_sigma"]),
        )


def fit_translation(support: Sequence[LabeledSequence], jitter_sigma: float = 0.05) -> TranslationModel:
    """Class means over every frame of the support corpus."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for seq in support:
        sums[seq.label] = sums.get(seq.label, 0.0) + seq.frames.sum(axis=0)
        counts[seq.label] = counts.get(seq.label, 0) + len(seq)
    for c in CLASSES:
        if c not in counts:
            raise FitError(f"support corpus has no frames for class {c}")
    return TranslationModel({c: sums[c] / counts[c] for c in CLASSES}, jitter_sigma)


def imagine(model: ImaginationGenerator, prototypes, targets, n_per_class: int, seed: int) -> list[Sample]:
    return model.imagine(prototypes, targets, n_per_class, seed)


@dataclass
class OracleGenerator:
    """Test-harness upper bound that knows each subject's true class means."""

    subject_means: dict = field(default_factory=dict)

    def oracle_imagine(self, subject_id: Hashable, targets, n_per_class: int, sigma: float, seed: int) -> list[Sample]:
        try:
            means = self.subject_means[subject_id]
        except KeyError:
            raise LookupError(f"oracle knows no subject {subject_id!r}") from None
        targets = _check_request(targets, n_per_class)
        out = []
        for c in targets:
            mu = np.asarray(means[c], dtype=float)
            for i in range(n_per_class):
                x = mu.copy() if sigma == 0 else mu + _sample_rng(seed, c, i).normal(0.0, sigma, mu.size)
                out.append((x, c))
        return out

    def for_subject(self, subject_id: Hashable, sigma: float = 0.0) -> "SubjectOracle":
        if subject_id not in self.subject_means:
            raise LookupError(f"oracle knows no subject {subject_id!r}")
        return SubjectOracle(self, subject_id, sigma)


@dataclass(frozen=True)
class SubjectOracle:
    """Binds an oracle to one subject so it fits the generator interface."""

    oracle: OracleGenerator
    subject_id: Hashable
    sigma: float = 0.0

    def imagine(self, prototypes, targets, n_per_class, seed) -> list[Sample]:
        return self.oracle.oracle_imagine(self.subject_id, targets, n_per_class, self.sigma, seed)


@dataclass(frozen=True)
class SourceLeakGenerator:
    """Wraps a generator so outputs keep part of the source prototype.

    ``leak[src]`` in [0, 1] is the fraction of the source image that survives
    translation; 0 leaves the wrapped generator unchanged. Used to build order
    effects where imagining from some classes is less faithful than others.
    """

    base: ImaginationGenerator
    leak: dict

    def imagine(self, prototypes, targets, n_per_class, seed) -> list[Sample]:
        prototypes = list(prototypes)
        if not prototypes:
            raise GenerationError("imagination needs at least one prototype")
        out = self.base.imagine(prototypes, targets, n_per_class, seed)
        # Mirrors the round-robin prototype choice of TranslationModel.
        leaked = []
        for k, (x, c) in enumerate(out):
            p, src = prototypes[k % len(prototypes)]
            w = float(self.leak.get(src, 0.0))
            leaked.append(((1.0 - w) * x + w * np.asarray(p, dtype=float), c))
        return leaked
