"""Recurrent Growing-When-Required network with associative labels.

Storage is array-backed: neuron rows are kept sorted by id, so ``argmin``
over the distance vector already breaks ties towards the lowest id.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import serial
from .classes import CLASSES
from .errors import ConfigError, DimensionError, InputError, StateError, UnlabeledNetworkError

PLAIN = "plain"
MISCLASSIFY = "misclassify"
GATES = (PLAIN, MISCLASSIFY)

SNAPSHOT_VERSION = 1


def default_alphas(context_depth: int) -> tuple[float, ...]:
    """Half the mass on the input term, the rest split over the contexts."""
    if context_depth == 0:
        return (1.0,)
    return (0.5,) + (0.5 / context_depth,) * context_depth


@dataclass(frozen=True)
class GwrParams:
    insertion_threshold: float = 0.95
    habituation_threshold: float = 0.3
    eps_b: float = 0.5
    eps_n: float = 0.005
    tau_b: float = 0.3
    tau_n: float = 0.1
    kappa: float = 1.05
    max_edge_age: int = 100
    context_depth: int = 2
    beta: float = 0.7
    alphas: tuple[float, ...] | None = None
    prune_isolated: bool = True
    # Start each stream from the context a held first frame would converge
    # to, rather than from zero.
    primed_onset: bool = True

    def __post_init__(self):
        def open_unit(name):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")

        def half_open_unit(name):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")

        for name in ("insertion_threshold", "habituation_threshold", "beta"):
            open_unit(name)
        for name in ("eps_b", "eps_n", "tau_b", "tau_n"):
            half_open_unit(name)
        if self.eps_n > self.eps_b:
            raise ConfigError("eps_n must not exceed eps_b")
        if not self.kappa > 1.0:
            raise ConfigError(f"kappa must be > 1, got {self.kappa}")
        if isinstance(self.max_edge_age, bool) or int(self.max_edge_age) != self.max_edge_age or self.max_edge_age < 1:
            raise ConfigError(f"max_edge_age must be a positive integer, got {self.max_edge_age}")
        if isinstance(self.context_depth, bool) or int(self.context_depth) != self.context_depth or self.context_depth < 0:
            raise ConfigError(f"context_depth must be a non-negative integer, got {self.context_depth}")
        object.__setattr__(self, "max_edge_age", int(self.max_edge_age))
        object.__setattr__(self, "context_depth", int(self.context_depth))

        alphas = default_alphas(self.context_depth) if self.alphas is None else tuple(float(a) for a in self.alphas)
        if len(alphas) != self.context_depth + 1:
            raise ConfigError(f"need {self.context_depth + 1} alpha weights, got {len(alphas)}")
        if any(a < 0 for a in alphas) or abs(sum(alphas) - 1.0) > 1e-9:
            raise ConfigError(f"alpha weights must be non-negative and sum to 1, got {alphas}")
        object.__setattr__(self, "alphas", alphas)

    def replace(self, **changes) -> "GwrParams":
        if "context_depth" in changes and "alphas" not in changes:
            changes["alphas"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "alphas":
                out[f.name] = [serial.fhex(a) for a in v]
            elif isinstance(v, float):
                out[f.name] = serial.fhex(v)
            else:
                out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "GwrParams":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(doc) - set(known)
        if unknown:
            raise ConfigError(f"unknown GWR parameter(s): {', '.join(sorted(unknown))}")
        kw = {}
        for name, v in doc.items():
            if name == "alphas":
                kw[name] = None if v is None else tuple(serial.funhex(a) for a in v)
            elif name in ("max_edge_age", "context_depth"):
                kw[name] = int(v)
            elif name in ("prune_isolated", "primed_onset"):
                kw[name] = bool(v)
            else:
                kw[name] = serial.funhex(v)
        return cls(**kw)


def episodic_params(**overrides) -> GwrParams:
    """Fast, plastic preset: high insertion threshold and learning rate."""
    return GwrParams(insertion_threshold=0.95, eps_b=0.5, eps_n=0.005).replace(**overrides)


def semantic_params(**overrides) -> GwrParams:
    """Slow preset: lower insertion threshold, small learning rates."""
    return GwrParams(insertion_threshold=0.80, eps_b=0.1, eps_n=0.001).replace(**overrides)


def habituate(h: float, tau: float, kappa: float) -> float:
    return min(1.0, max(0.0, h + tau * (kappa * (1.0 - h) - 1.0)))


def _habituate_array(h: np.ndarray, tau: float, kappa: float) -> np.ndarray:
    return np.clip(h + tau * (kappa * (1.0 - h) - 1.0), 0.0, 1.0)


@dataclass(frozen=True)
class Neuron:
    id: int
    weight: np.ndarray
    contexts: np.ndarray
    h: float
    label_counts: dict


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    age: int


@dataclass(frozen=True)
class StepOutcome:
    bmu_id: int
    second_id: int
    distance: float
    activation: float
    inserted: bool
    new_neuron_id: int | None
    predicted_label: str | None


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class GwrNetwork:
    """A growing graph of prototypes. Build one with :func:`init_network`."""

    def __init__(self, params: GwrParams, dim: int, classes: Sequence[Hashable] = CLASSES, rng_seed: int = 0):
        if dim < 1:
            raise DimensionError("dimension must be >= 1")
        self.params = params
        self.dim = int(dim)
        self.classes = tuple(classes)
        self._class_index = {c: i for i, c in enumerate(self.classes)}
        self.rng_seed = int(rng_seed)
        K = params.context_depth
        self._alphas = np.array(params.alphas)
        cap = 16
        self.n = 0
        self._ids = np.zeros(cap, dtype=np.int64)
        self._w = np.zeros((cap, self.dim))
        self._c = np.zeros((cap, K, self.dim))
        self._h = np.zeros(cap)
        self._counts = np.zeros((cap, len(self.classes)), dtype=np.int64)
        self._row_of: dict[int, int] = {}
        self._next_id = 0
        self.edges: dict[tuple[int, int], int] = {}
        self._adj: dict[int, set[int]] = {}
        self._isolated: set[int] = set()
        self.temporal_counts: dict[tuple[int, int], int] = {}
        self.prev_bmu: int | None = None
        self.global_context = np.zeros((K, self.dim))

    # ------------------------------------------------------------------ storage

    def __len__(self):
        return self.n

    @property
    def ids(self) -> list[int]:
        return [int(i) for i in self._ids[: self.n]]

    @property
    def weights(self) -> np.ndarray:
        return self._w[: self.n]

    def _grow(self):
        cap = 2 * len(self._ids)
        for name in ("_ids", "_w", "_c", "_h", "_counts"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def _add_neuron(self, weight, contexts, label_idx=None, h=1.0) -> int:
        if self.n == len(self._ids):
            self._grow()
        nid = self._next_id
        self._next_id += 1
        row = self.n
        self._ids[row] = nid
        self._w[row] = weight
        self._c[row] = contexts
        self._h[row] = h
        self._counts[row] = 0
        if label_idx is not None:
            self._counts[row, label_idx] = 1
        self._row_of[nid] = row
        self._adj[nid] = set()
        self._isolated.add(nid)
        self.n += 1
        return nid

    def _remove_neuron(self, nid: int):
        row = self._row_of.pop(nid)
        n = self.n
        for name in ("_ids", "_w", "_c", "_h", "_counts"):
            arr = getattr(self, name)
            arr[row : n - 1] = arr[row + 1 : n]
        self.n -= 1
        for r in range(row, self.n):
            self._row_of[int(self._ids[r])] = r
        for other in self._adj.pop(nid):
            self._adj[other].discard(nid)
            del self.edges[_edge_key(nid, other)]
            if not self._adj[other]:
                self._isolated.add(other)
        self._isolated.discard(nid)
        self.temporal_counts = {k: v for k, v in self.temporal_counts.items() if nid not in k}
        if self.prev_bmu == nid:
            self.prev_bmu = None

    def _set_edge(self, a: int, b: int, age: int = 0):
        if a == b:
            return
        self.edges[_edge_key(a, b)] = age
        self._adj[a].add(b)
        self._adj[b].add(a)
        self._isolated.discard(a)
        self._isolated.discard(b)

    def _remove_edge(self, a: int, b: int):
        key = _edge_key(a, b)
        if key not in self.edges:
            return
        del self.edges[key]
        self._adj[a].discard(b)
        self._adj[b].discard(a)
        for v in (a, b):
            if not self._adj[v]:
                self._isolated.add(v)

    def row(self, nid: int) -> int:
        try:
            return self._row_of[nid]
        except KeyError:
            raise InputError(f"unknown neuron id {nid}") from None

    def neighbours(self, nid: int) -> list[int]:
        self.row(nid)
        return sorted(self._adj[nid])

    def neuron(self, nid: int) -> Neuron:
        r = self.row(nid)
        return Neuron(
            id=nid,
            weight=self._w[r].copy(),
            contexts=self._c[r].copy(),
            h=float(self._h[r]),
            label_counts=self.label_counts(nid),
        )

    def neurons(self) -> list[Neuron]:
        return [self.neuron(i) for i in self.ids]

    def edge_list(self) -> list[Edge]:
        return [Edge(a, b, age) for (a, b), age in sorted(self.edges.items())]

    def label_counts(self, nid: int) -> dict:
        r = self.row(nid)
        return {self.classes[i]: int(c) for i, c in enumerate(self._counts[r]) if c}

    def habituation(self, nid: int) -> float:
        return float(self._h[self.row(nid)])

    def set_habituation(self, nid: int, h: float):
        if not 0.0 <= h <= 1.0:
            raise InputError("habituation must lie in [0, 1]")
        self._h[self.row(nid)] = h

    def labels(self) -> set:
        """Labels recorded on at least one neuron."""
        present = self._counts[: self.n].any(axis=0)
        return {self.classes[i] for i in np.flatnonzero(present)}

    def _argmax_label_row(self, row: int) -> int | None:
        counts = self._counts[row]
        if not counts.any():
            return None
        return int(np.argmax(counts))

    def argmax_label(self, nid: int):
        idx = self._argmax_label_row(self.row(nid))
        return None if idx is None else self.classes[idx]

    def _label_index(self, label) -> int:
        try:
            return self._class_index[label]
        except KeyError:
            raise InputError(f"label {label!r} is not in this network's class set") from None

    # ----------------------------------------------------------------- distance

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x

    def _check_context(self, context) -> np.ndarray:
        if context is None:
            return self.global_context
        C = np.asarray(context, dtype=float).reshape(-1, self.dim) if np.size(context) else np.zeros((0, self.dim))
        if C.shape != (self.params.context_depth, self.dim):
            raise DimensionError(f"expected {self.params.context_depth} context vectors of dimension {self.dim}")
        return C

    def _distances(self, x: np.ndarray, C: np.ndarray, lo: int = 0, hi: int | None = None) -> np.ndarray:
        hi = self.n if hi is None else hi
        a = self._alphas
        diff = self._w[lo:hi] - x
        d = a[0] * np.einsum("ij,ij->i", diff, diff)
        for k in range(self.params.context_depth):
            dc = self._c[lo:hi, k] - C[k]
            d += a[k + 1] * np.einsum("ij,ij->i", dc, dc)
        return d

    def distance(self, nid: int, x, context=None) -> float:
        r = self.row(nid)
        return float(self._distances(self._check_input(x), self._check_context(context), r, r + 1)[0])

    def distances(self, x, context=None) -> np.ndarray:
        """Distance to every neuron, in id order."""
        return self._distances(self._check_input(x), self._check_context(context)).copy()

    @staticmethod
    def _two_smallest(d: np.ndarray) -> tuple[int, int]:
        b = int(np.argmin(d))
        saved = d[b]
        d[b] = np.inf
        s = int(np.argmin(d))
        d[b] = saved
        return b, s

    def find_bmu(self, x, context=None) -> tuple[int, int, float]:
        if self.n < 2:
            raise StateError("BMU search needs at least 2 neurons")
        d = self._distances(self._check_input(x), self._check_context(context))
        b, s = self._two_smallest(d)
        return int(self._ids[b]), int(self._ids[s]), float(d[b])

    def _next_context(self, w_b: np.ndarray, c_b: np.ndarray) -> np.ndarray:
        K = self.params.context_depth
        beta = self.params.beta
        C = np.empty((K, self.dim))
        if K:
            C[0] = beta * w_b + (1.0 - beta) * c_b[0]
            for k in range(1, K):
                C[k] = beta * c_b[k - 1] + (1.0 - beta) * c_b[k]
        return C

    def onset_context(self, first=None) -> np.ndarray:
        """Context for the first frame of a stream.

        Zero, unless ``primed_onset`` is set and the first frame is given: then
        every context slot holds that frame, the fixed point of the recursion
        under a constant input.
        """
        if first is None or not self.params.primed_onset:
            return np.zeros((self.params.context_depth, self.dim))
        v = np.asarray(first, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionError(f"expected a vector of dimension {self.dim}, got shape {v.shape}")
        return np.tile(v, (self.params.context_depth, 1))

    def reset_context(self, first=None):
        """Start a new input stream with no previous BMU."""
        self.global_context = self.onset_context(first)
        self.prev_bmu = None

    # -------------------------------------------------------------------- learn

    def adapt(self, x, label=None, gate: str = PLAIN) -> StepOutcome:
        if gate not in GATES:
            raise InputError(f"unknown insertion gate {gate!r}")
        if self.n < 2:
            raise StateError("network is not initialized")
        x = self._check_input(x)
        lab = None if label is None else self._label_index(label)
        p = self.params
        C = self.global_context

        d = self._distances(x, C)
        b_row, s_row = self._two_smallest(d)
        b, s = int(self._ids[b_row]), int(self._ids[s_row])
        d_b = float(d[b_row])
        activation = math.exp(-d_b)
        w_b = self._w[b_row].copy()
        c_b = self._c[b_row].copy()
        predicted = self._argmax_label_row(b_row)

        self._set_edge(b, s, 0)

        h_b = float(self._h[b_row])
        wants_insert = activation < p.insertion_threshold and h_b < p.habituation_threshold
        if wants_insert and gate == MISCLASSIFY:
            wants_insert = predicted != lab
        new_id = None
        if wants_insert:
            new_id = self._add_neuron(0.5 * (w_b + x), 0.5 * (c_b + C), lab)
            self._remove_edge(b, s)
            self._set_edge(new_id, b, 0)
            self._set_edge(new_id, s, 0)
            b_row = self._row_of[b]
        else:
            self._w[b_row] += p.eps_b * h_b * (x - w_b)
            self._c[b_row] += p.eps_b * h_b * (C - c_b)
            if lab is not None:
                self._counts[b_row, lab] += 1
            nb_rows = [self._row_of[n] for n in sorted(self._adj[b])]
            if nb_rows:
                nw = self._w[nb_rows]
                self._w[nb_rows] = nw + (p.eps_n * self._h[nb_rows])[:, None] * (x - nw)

        self._h[b_row] = habituate(h_b, p.tau_b, p.kappa)
        nb_rows = [self._row_of[n] for n in sorted(self._adj[b]) if n != new_id]
        if nb_rows:
            self._h[nb_rows] = _habituate_array(self._h[nb_rows], p.tau_n, p.kappa)

        for n in sorted(self._adj[b]):
            key = _edge_key(b, n)
            age = self.edges[key] + 1
            if age > p.max_edge_age:
                self._remove_edge(b, n)
            else:
                self.edges[key] = age
        if p.prune_isolated:
            self._prune()

        if self.prev_bmu is not None and self.prev_bmu in self._row_of:
            key = (self.prev_bmu, b)
            self.temporal_counts[key] = self.temporal_counts.get(key, 0) + 1
        self.prev_bmu = b
        self.global_context = self._next_context(w_b, c_b)

        return StepOutcome(
            bmu_id=b,
            second_id=s,
            distance=d_b,
            activation=activation,
            inserted=new_id is not None,
            new_neuron_id=new_id,
            predicted_label=None if predicted is None else self.classes[predicted],
        )

    def _prune(self):
        for nid in sorted(self._isolated):
            if self.n <= 2:
                break
            self._remove_neuron(nid)

    # ------------------------------------------------------------------ recall

    def predict(self, sequence) -> Hashable:
        """Label of the last frame's BMU, streaming a fresh local context from onset.

        Read-only. If that BMU carries no label, the nearest labelled neuron
        (under the same context) answers instead.
        """
        frames = np.asarray(sequence, dtype=float)
        if frames.ndim == 1 and frames.size:
            frames = frames[None, :]
        if frames.ndim != 2 or frames.shape[0] == 0:
            raise InputError("cannot classify an empty frame list")
        if frames.shape[1] != self.dim:
            raise DimensionError(f"expected frames of dimension {self.dim}, got {frames.shape[1]}")
        if self.n < 2:
            raise StateError("network is not initialized")
        counts = self._counts[: self.n]
        labelled = counts.any(axis=1)
        if not labelled.any():
            raise UnlabeledNetworkError("network has no labelled neuron")
        C = self.onset_context(frames[0])
        last = len(frames) - 1
        for t, x in enumerate(frames):
            d = self._distances(x, C)
            b = int(np.argmin(d))
            if t < last:
                C = self._next_context(self._w[b], self._c[b])
        if not labelled[b]:
            d = np.where(labelled, d, np.inf)
            b = int(np.argmin(d))
        return self.classes[int(np.argmax(counts[b]))]

    def prototypes_of(self, label) -> list[tuple[np.ndarray, np.ndarray]]:
        idx = self._label_index(label)
        out = []
        for r in range(self.n):
            if self._argmax_label_row(r) == idx:
                out.append((self._w[r].copy(), self._c[r].copy()))
        return out

    # --------------------------------------------------------------- snapshots

    def to_dict(self) -> dict:
        neurons = []
        for r in range(self.n):
            nid = int(self._ids[r])
            neurons.append(
                {
                    "id": nid,
                    "weight": serial.array_hex(self._w[r]),
                    "contexts": serial.array_hex(self._c[r]),
                    "h": serial.fhex(self._h[r]),
                    "label_counts": self.label_counts(nid),
                }
            )
        return {
            "kind": "gwr_network",
            "version": SNAPSHOT_VERSION,
            "params": self.params.to_dict(),
            "dim": self.dim,
            "classes": list(self.classes),
            "neurons": neurons,
            "edges": [{"a": a, "b": b, "age": age} for (a, b), age in sorted(self.edges.items())],
            "temporal_counts": [{"from": a, "to": b, "n": n} for (a, b), n in sorted(self.temporal_counts.items())],
            "prev_bmu": self.prev_bmu,
            "global_context": serial.array_hex(self.global_context),
            "rng_seed": self.rng_seed,
            "next_id": self._next_id,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GwrNetwork":
        if doc.get("kind", "gwr_network") != "gwr_network":
            raise InputError(f"not a network snapshot: kind={doc.get('kind')!r}")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise InputError(f"unsupported network snapshot version {doc.get('version')!r}")
        params = GwrParams.from_dict(doc["params"])
        net = cls(params, int(doc["dim"]), doc.get("classes", CLASSES), doc.get("rng_seed", 0))
        K, dim = params.context_depth, net.dim
        for nd in doc["neurons"]:
            w = serial.array_unhex(nd["weight"])
            c = serial.array_unhex(nd["contexts"]).reshape(K, dim)
            if w.shape != (dim,):
                raise DimensionError(f"neuron {nd['id']}: weight has wrong dimension")
            net._next_id = int(nd["id"])
            net._add_neuron(w, c, None, serial.funhex(nd["h"]))
            r = net._row_of[int(nd["id"])]
            for label, count in nd["label_counts"].items():
                net._counts[r, net._label_index(label)] = int(count)
        for e in doc["edges"]:
            net._set_edge(int(e["a"]), int(e["b"]), int(e["age"]))
        net.temporal_counts = {(int(t["from"]), int(t["to"])): int(t["n"]) for t in doc["temporal_counts"]}
        net.prev_bmu = doc["prev_bmu"]
        net.global_context = serial.array_unhex(doc["global_context"]).reshape(K, dim)
        net._next_id = int(doc["next_id"])
        return net

    def to_json(self) -> str:
        return serial.dumps(self.to_dict())

    def copy(self) -> "GwrNetwork":
        return copy.deepcopy(self)


def init_network(
    params: GwrParams,
    first,
    second,
    labels: tuple | None = None,
    *,
    classes: Sequence[Hashable] = CLASSES,
    rng_seed: int = 0,
) -> GwrNetwork:
    """Two-neuron bootstrap joined by one fresh edge."""
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape or a.size < 1:
        raise DimensionError(f"bootstrap vectors must share one dimension, got {a.shape} and {b.shape}")
    net = GwrNetwork(params, a.size, classes, rng_seed)
    zeros = np.zeros((params.context_depth, a.size))
    la, lb = labels if labels is not None else (None, None)
    ia = None if la is None else net._label_index(la)
    ib = None if lb is None else net._label_index(lb)
    first_id = net._add_neuron(a, zeros, ia)
    second_id = net._add_neuron(b, zeros, ib)
    net._set_edge(first_id, second_id, 0)
    return net
