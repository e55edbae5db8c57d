"""Per-subject expression-feature datasets: synthetic generator, CSV I/O, splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable

import numpy as np

from .classes import CLASS_INDEX, CLASSES, LabeledSequence
from .errors import ConfigError, LabelError, ParseError, SchemaError, SplitError

HEADER_PREFIX = ["subject_id", "sample_id", "frame_index", "label"]


@dataclass(frozen=True, eq=False)
class SubjectDataset:
    subject_id: Hashable
    sequences: tuple
    dim: int

    def __post_init__(self):
        seqs = tuple(self.sequences)
        for s in seqs:
            if s.subject_id != self.subject_id:
                raise SchemaError(f"sequence of subject {s.subject_id!r} inside dataset of {self.subject_id!r}")
            if s.dim != self.dim:
                raise SchemaError(f"sequence dimension {s.dim} != dataset dimension {self.dim}")
        object.__setattr__(self, "sequences", seqs)

    def classes(self) -> list[str]:
        present = {s.label for s in self.sequences}
        return [c for c in CLASSES if c in present]

    def of_class(self, label: str) -> list[LabeledSequence]:
        return [s for s in self.sequences if s.label == label]

    def n_frames(self) -> int:
        return sum(len(s) for s in self.sequences)

    def __eq__(self, other):
        if not isinstance(other, SubjectDataset):
            return NotImplemented
        return self.subject_id == other.subject_id and self.dim == other.dim and self.sequences == other.sequences

    __hash__ = None


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 32
    subjects: int = 12
    sequences_per_class: int = 5
    frames_per_sequence: int = 6
    class_separation: float = 1.0
    within_class_sigma: float = 0.15
    ar_coefficient: float = 0.5
    subject_offset_sigma: float = 0.5
    seed: int = 0
    # Per-subject, per-class displacement of the class mean: how idiosyncratically
    # each subject expresses each class. Zero gives a purely additive identity.
    expression_sigma: float = 0.0

    def __post_init__(self):
        if self.dim < len(CLASSES):
            raise ConfigError(f"dim must be >= {len(CLASSES)} to hold the class simplex, got {self.dim}")
        if not self.class_separation > 0:
            raise ConfigError("class_separation must be > 0")
        for name in ("within_class_sigma", "subject_offset_sigma", "expression_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ConfigError("ar_coefficient must lie in [0, 1)")
        if self.subjects < 1 or self.sequences_per_class < 1 or self.frames_per_sequence < 1:
            raise ConfigError("subjects, sequences_per_class and frames_per_sequence must be >= 1")

    def replace(self, **changes) -> "SynthConfig":
        from dataclasses import replace

        return replace(self, **changes)


def class_anchors(dim: int, separation: float) -> dict[str, np.ndarray]:
    """Regular 6-simplex in the first six coordinates, centred on the origin.

    Scaled unit vectors e_i * s / sqrt(2) are pairwise exactly s apart;
    subtracting their centroid keeps the distances and centres the cloud.
    """
    k = len(CLASSES)
    if dim < k:
        raise ConfigError(f"dim must be >= {k}")
    basis = np.zeros((k, dim))
    basis[np.arange(k), np.arange(k)] = separation / math.sqrt(2.0)
    basis[:, :k] -= basis[:, :k].mean(axis=0)
    return {c: basis[i] for i, c in enumerate(CLASSES)}


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground-truth per-subject class means of a synthetic draw."""

    anchors: dict
    subject_means: dict = field(default_factory=dict)


def generate_synthetic(config: SynthConfig, return_truth: bool = False):
    anchors = class_anchors(config.dim, config.class_separation)
    sigma = config.within_class_sigma
    rho = config.ar_coefficient
    innovation = math.sqrt(1.0 - rho * rho)
    datasets = []
    truth = SyntheticTruth(anchors=anchors)
    children = np.random.SeedSequence(config.seed).spawn(config.subjects)
    for s, child in enumerate(children):
        rng = np.random.default_rng(child)
        sid = f"s{s:02d}"
        identity = rng.normal(0.0, 1.0, config.dim) * config.subject_offset_sigma
        means = {}
        for c in CLASSES:
            quirk = rng.normal(0.0, 1.0, config.dim) * config.expression_sigma
            means[c] = anchors[c] + identity + quirk
        truth.subject_means[sid] = means
        sequences = []
        for c in CLASSES:
            for j in range(config.sequences_per_class):
                frames = np.empty((config.frames_per_sequence, config.dim))
                e = rng.normal(0.0, 1.0, config.dim) * sigma
                frames[0] = means[c] + e
                for t in range(1, config.frames_per_sequence):
                    e = rho * e + innovation * rng.normal(0.0, 1.0, config.dim) * sigma
                    frames[t] = means[c] + e
                sequences.append(LabeledSequence(sid, c, frames, sample_id=f"{c}-{j}"))
        datasets.append(SubjectDataset(sid, tuple(sequences), config.dim))
    if return_truth:
        return datasets, truth
    return datasets


# ----------------------------------------------------------------------- CSV


def save_csv(datasets: Iterable[SubjectDataset], path) -> Path:
    datasets = list(datasets)
    if not datasets:
        raise SchemaError("nothing to write")
    dim = datasets[0].dim
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER_PREFIX + [f"f{i}" for i in range(dim)])
        for ds in datasets:
            if ds.dim != dim:
                raise SchemaError("all subjects must share one feature dimension")
            for k, seq in enumerate(ds.sequences):
                sample = seq.sample_id if seq.sample_id is not None else k
                for t, frame in enumerate(seq.frames):
                    writer.writerow([ds.subject_id, sample, t, seq.label] + [repr(float(v)) for v in frame])
    return path


def load_csv(path) -> list[SubjectDataset]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if header[:4] != HEADER_PREFIX:
            raise ParseError(f"header must start with {','.join(HEADER_PREFIX)}", line=1)
        feats = header[4:]
        if not feats or feats != [f"f{i}" for i in range(len(feats))]:
            raise SchemaError("feature columns must be named f0..f{d-1}", line=1)
        dim = len(feats)

        # (subject, sample) -> [label, {frame_index: vector}], insertion-ordered
        groups: dict[tuple, list] = {}
        subjects: dict[str, None] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 5:
                raise ParseError(f"expected {4 + dim} fields, got {len(row)}", line=line)
            if len(row) != 4 + dim:
                raise SchemaError(f"row has {len(row) - 4} feature columns, header declares {dim}", line=line)
            subject, sample, frame_index, label = row[:4]
            if label not in CLASS_INDEX:
                raise LabelError(f"unknown label {label!r}", line=line)
            try:
                t = int(frame_index)
                vec = np.array([float(v) for v in row[4:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            if not np.all(np.isfinite(vec)):
                raise ParseError("non-finite feature value", line=line)
            key = (subject, sample)
            entry = groups.setdefault(key, [label, {}])
            if entry[0] != label:
                raise LabelError(f"sample {sample!r} of subject {subject!r} mixes labels", line=line)
            if t in entry[1]:
                raise ParseError(f"duplicate frame_index {t} for sample {sample!r}", line=line)
            entry[1][t] = vec
            subjects.setdefault(subject, None)

    by_subject: dict[str, list] = {s: [] for s in subjects}
    for (subject, sample), (label, frames) in groups.items():
        ordered = np.array([frames[t] for t in sorted(frames)])
        by_subject[subject].append(LabeledSequence(subject, label, ordered, sample_id=sample))
    return [SubjectDataset(s, tuple(seqs), dim) for s, seqs in by_subject.items()]


# --------------------------------------------------------------------- split


def split(dataset: SubjectDataset, test_fraction: float, seed: int) -> tuple[SubjectDataset, SubjectDataset]:
    """Stratified per-class split; ceil(fraction * n) sequences go to test."""
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    train, test = [], []
    for c in CLASSES:
        seqs = dataset.of_class(c)
        if not seqs:
            continue
        if len(seqs) < 2:
            raise SplitError(f"class {c} of subject {dataset.subject_id} has fewer than 2 sequences: {c}")
        n_test = min(len(seqs) - 1, math.ceil(test_fraction * len(seqs)))
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, CLASS_INDEX[c]])
        perm = rng.permutation(len(seqs))
        test_idx = set(perm[:n_test].tolist())
        for i, s in enumerate(seqs):
            (test if i in test_idx else train).append(s)
    return (
        SubjectDataset(dataset.subject_id, tuple(train), dataset.dim),
        SubjectDataset(dataset.subject_id, tuple(test), dataset.dim),
    )
