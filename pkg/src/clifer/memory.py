"""Growing dual memory: a fast episodic GWR feeding a slow, label-gated semantic GWR.

Episodes arrive one class at a time. Each frame trains the episodic network;
the episode's distinct episodic winners then train the semantic network, which
only grows where it currently misclassifies. Replay re-presents temporal
trajectories read out of the episodic network, and an optional imagination
generator adds samples for every class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import serial
from .classes import CLASSES, LabeledSequence, check_label
from .errors import DimensionError, InputError, ProtocolError, StateError
from .gwr import MISCLASSIFY, PLAIN, GwrNetwork, GwrParams, episodic_params, init_network, semantic_params
from .imagination import ImaginationGenerator

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class ReplayTrajectory:
    frames: np.ndarray
    label: str
    start_id: int


@dataclass(frozen=True)
class EpisodeReport:
    class_learned: str
    episodic_size: int
    semantic_size: int
    episodic_insertions: int
    semantic_insertions: int
    replayed_trajectories: int
    imagined_samples: int


def build_trajectories(episodic: GwrNetwork, length: int) -> list[ReplayTrajectory]:
    """One trajectory per labelled neuron, following the strongest transitions."""
    if len(episodic) < 2:
        raise StateError("trajectories need a network with at least 2 neurons")
    if length < 1:
        raise InputError("trajectory length must be >= 1")
    best_next: dict[int, tuple[int, int]] = {}
    for (a, b), n in episodic.temporal_counts.items():
        cur = best_next.get(a)
        if cur is None or n > cur[0] or (n == cur[0] and b < cur[1]):
            best_next[a] = (n, b)
    out = []
    for j in episodic.ids:
        label = episodic.argmax_label(j)
        if label is None:
            continue
        path = [j]
        while len(path) < length:
            nxt = best_next.get(path[-1])
            path.append(path[-1] if nxt is None else nxt[1])
        frames = np.array([episodic.weights[episodic.row(i)] for i in path])
        out.append(ReplayTrajectory(frames, label, j))
    return out


class DualMemory:
    """Episodic + semantic GWR pair with replay and imagination switches.

    The two networks are created lazily from the first episode's data, since
    a GWR bootstrap needs two input vectors.
    """

    def __init__(
        self,
        episodic: GwrParams | None = None,
        semantic: GwrParams | None = None,
        *,
        replay_enabled: bool = False,
        imagination_enabled: bool = False,
        trajectory_length: int = 3,
        replay_period: int = 1,
        n_imagined_per_class: int = 4,
        replay_before_imagination: bool = True,
        seed: int = 0,
    ):
        if trajectory_length < 2:
            raise InputError("trajectory_length must be >= 2")
        if replay_period < 1:
            raise InputError("replay_period must be >= 1")
        if n_imagined_per_class < 0:
            raise InputError("n_imagined_per_class must be >= 0")
        self.episodic_params = episodic or episodic_params()
        self.semantic_params = semantic or semantic_params()
        self.replay_enabled = bool(replay_enabled)
        self.imagination_enabled = bool(imagination_enabled)
        self.trajectory_length = int(trajectory_length)
        self.replay_period = int(replay_period)
        self.n_imagined_per_class = int(n_imagined_per_class)
        self.replay_before_imagination = bool(replay_before_imagination)
        self.seed = int(seed)
        self.episodic: GwrNetwork | None = None
        self.semantic: GwrNetwork | None = None
        self.episodes_learned = 0
        # Called as observer(kind, frames) for every input reaching a learning
        # operation; kind is "learn", "replay" or "imagine".
        self.observer: Callable[[str, np.ndarray], None] | None = None

    @property
    def dim(self) -> int | None:
        return None if self.episodic is None else self.episodic.dim

    def _notify(self, kind, frames):
        if self.observer is not None:
            self.observer(kind, frames)

    def _check_dim(self, frames: np.ndarray):
        if self.episodic is not None and frames.shape[-1] != self.episodic.dim:
            raise DimensionError(f"expected dimension {self.episodic.dim}, got {frames.shape[-1]}")

    # ------------------------------------------------------------- internals

    def _episodic_stream(self, frames: np.ndarray, label: str) -> tuple[list[int], int]:
        """Feed one sequence; return its winners (first-seen order) and insertions.

        A frame's winner is the neuron that represents it after the step: the
        new neuron when one was inserted, the BMU otherwise.
        """
        if self.episodic is None:
            second = frames[1] if len(frames) > 1 else frames[0]
            self.episodic = init_network(self.episodic_params, frames[0], second, (label, label), rng_seed=self.seed)
        net = self.episodic
        net.reset_context(frames[0])
        winners: dict[int, None] = {}
        inserted = 0
        for x in frames:
            out = net.adapt(x, label, PLAIN)
            winners.setdefault(out.new_neuron_id if out.inserted else out.bmu_id, None)
            inserted += out.inserted
        return list(winners), inserted

    def _semantic_stream(self, winner_ids: Sequence[int], label: str) -> int:
        live = [w for w in winner_ids if w in self.episodic._row_of]
        if not live:
            return 0
        vectors = np.array([self.episodic.weights[self.episodic.row(w)] for w in live])
        if self.semantic is None:
            second = vectors[1] if len(vectors) > 1 else vectors[0]
            self.semantic = init_network(self.semantic_params, vectors[0], second, (label, label), rng_seed=self.seed)
        net = self.semantic
        net.reset_context(vectors[0])
        inserted = 0
        for v in vectors:
            inserted += net.adapt(v, label, MISCLASSIFY).inserted
        return inserted

    def _mini_episode(self, frames: np.ndarray, label: str) -> tuple[int, int]:
        winners, e_ins = self._episodic_stream(frames, label)
        return e_ins, self._semantic_stream(winners, label)

    # ------------------------------------------------------------- learning

    def learn_episode(self, batch: Sequence[LabeledSequence], imagination: ImaginationGenerator | None = None) -> EpisodeReport:
        batch = list(batch)
        if not batch:
            raise ProtocolError("an episode needs at least one sequence")
        labels = {s.label for s in batch}
        if len(labels) != 1:
            raise ProtocolError(f"an episode must contain one class, got {sorted(labels)}")
        (label,) = labels
        for s in batch:
            self._check_dim(s.frames)
        if len({s.dim for s in batch}) != 1:
            raise DimensionError("sequences in one episode differ in dimension")

        self.episodes_learned += 1
        winners: dict[int, None] = {}
        e_ins = 0
        for seq in batch:
            self._notify("learn", seq.frames)
            ws, ins = self._episodic_stream(seq.frames, label)
            e_ins += ins
            for w in ws:
                winners.setdefault(w, None)
        s_ins = self._semantic_stream(list(winners), label)

        replayed = imagined = 0

        def do_replay():
            nonlocal replayed, e_ins, s_ins
            if self.replay_enabled and self.episodes_learned % self.replay_period == 0:
                trajectories = build_trajectories(self.episodic, self.trajectory_length)
                a, b = self._replay(trajectories)
                replayed += len(trajectories)
                e_ins += a
                s_ins += b

        def do_imagine():
            nonlocal imagined, e_ins, s_ins
            if not (self.imagination_enabled and imagination is not None and self.n_imagined_per_class):
                return
            protos = [(w, label) for w, _ in self.episodic.prototypes_of(label)]
            if not protos:
                return
            seed = self.seed * 1000 + self.episodes_learned
            samples = imagination.imagine(protos, CLASSES, self.n_imagined_per_class, seed)
            a, b = self._integrate(samples)
            imagined += len(samples)
            e_ins += a
            s_ins += b

        steps = (do_replay, do_imagine) if self.replay_before_imagination else (do_imagine, do_replay)
        for step in steps:
            step()

        return EpisodeReport(
            class_learned=label,
            episodic_size=len(self.episodic),
            semantic_size=len(self.semantic),
            episodic_insertions=e_ins,
            semantic_insertions=s_ins,
            replayed_trajectories=replayed,
            imagined_samples=imagined,
        )

    def _replay(self, trajectories) -> tuple[int, int]:
        e_ins = s_ins = 0
        for tr in trajectories:
            self._notify("replay", tr.frames)
            a, b = self._mini_episode(tr.frames, tr.label)
            e_ins += a
            s_ins += b
        return e_ins, s_ins

    def replay(self, trajectories: Sequence[ReplayTrajectory]) -> int:
        trajectories = list(trajectories)
        if not trajectories:
            return 0
        if self.episodic is None:
            raise StateError("nothing to replay into: memory has not learned yet")
        for tr in trajectories:
            check_label(tr.label)
            frames = np.asarray(tr.frames, dtype=float)
            if frames.ndim != 2:
                raise DimensionError("trajectory frames must be a 2-d array")
            self._check_dim(frames)
        self._replay(trajectories)
        return len(trajectories)

    def _integrate(self, samples) -> tuple[int, int]:
        e_ins = s_ins = 0
        for x, label in samples:
            frame = np.asarray(x, dtype=float)[None, :]
            self._notify("imagine", frame)
            a, b = self._mini_episode(frame, label)
            e_ins += a
            s_ins += b
        return e_ins, s_ins

    def integrate_imagined(self, samples: Sequence[tuple[np.ndarray, str]]) -> int:
        samples = list(samples)
        for x, label in samples:
            check_label(label)
            v = np.asarray(x, dtype=float)
            if v.ndim != 1:
                raise DimensionError("imagined samples must be vectors")
            self._check_dim(v)
        if samples and self.episodic is None:
            raise StateError("imagined samples need an initialized memory")
        self._integrate(samples)
        return len(samples)

    # --------------------------------------------------------------- recall

    def classify(self, sequence) -> tuple[str, str]:
        if self.episodic is None or self.semantic is None:
            raise StateError("memory has not learned anything yet")
        return self.episodic.predict(sequence), self.semantic.predict(sequence)

    # ------------------------------------------------------------ snapshots

    def config_dict(self) -> dict:
        return {
            "episodic_params": self.episodic_params.to_dict(),
            "semantic_params": self.semantic_params.to_dict(),
            "replay_enabled": self.replay_enabled,
            "imagination_enabled": self.imagination_enabled,
            "trajectory_length": self.trajectory_length,
            "replay_period": self.replay_period,
            "n_imagined_per_class": self.n_imagined_per_class,
            "replay_before_imagination": self.replay_before_imagination,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        return {
            "kind": "dual_memory",
            "version": SNAPSHOT_VERSION,
            "config": self.config_dict(),
            "episodes_learned": self.episodes_learned,
            "episodic": None if self.episodic is None else self.episodic.to_dict(),
            "semantic": None if self.semantic is None else self.semantic.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DualMemory":
        if doc.get("kind") != "dual_memory":
            raise InputError(f"not a dual-memory snapshot: kind={doc.get('kind')!r}")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise InputError(f"unsupported dual-memory snapshot version {doc.get('version')!r}")
        cfg = dict(doc["config"])
        dm = cls(
            GwrParams.from_dict(cfg.pop("episodic_params")),
            GwrParams.from_dict(cfg.pop("semantic_params")),
            **cfg,
        )
        dm.episodes_learned = int(doc["episodes_learned"])
        dm.episodic = None if doc["episodic"] is None else GwrNetwork.from_dict(doc["episodic"])
        dm.semantic = None if doc["semantic"] is None else GwrNetwork.from_dict(doc["semantic"])
        return dm

    def to_json(self) -> str:
        return serial.dumps(self.to_dict())

    def save(self, path):
        return serial.write_doc(self.to_dict(), path)

    @classmethod
    def load(cls, path) -> "DualMemory":
        return cls.from_dict(serial.read_doc(path))
