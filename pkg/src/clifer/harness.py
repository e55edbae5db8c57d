"""Class-incremental experiment protocol.

A grid cell is (variant, subject, order, seed). Each cell trains a fresh model
one class per episode and scores it after every episode, either on the classes
seen so far (experiment 1) or on all six (experiment 2).
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import serial
from .baseline import BaselineModel, run_baseline_episode
from .classes import CLASSES, check_label, check_order
from .datasets import SubjectDataset, SynthConfig, generate_synthetic, load_csv, split
from .errors import ConfigError, DataError, SplitError
from .gwr import GwrParams, episodic_params, semantic_params
from .imagination import OracleGenerator, SourceLeakGenerator, fit_translation
from .memory import DualMemory
from .stats import ConfusionMatrix, KwResult, kruskal_wallis, macro_f1, per_class_f1

log = logging.getLogger(__name__)

VARIANTS = ("gdm", "gdm_replay", "clifer", "baseline")
EXPERIMENTS = ("exp1", "exp2", "order_sensitivity")


@dataclass(frozen=True)
class ImaginationConfig:
    generator: str = "translation"  # or "oracle"
    n_per_class: int = 4
    jitter_sigma: float = 0.05
    oracle_sigma: float = 0.0
    # Fraction of the source prototype retained per source class; non-empty
    # only for constructed order-effect controls.
    source_leak: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in ("translation", "oracle"):
            raise ConfigError(f"unknown imagination generator {self.generator!r}")
        for c, w in self.source_leak.items():
            check_label(c)
            if not 0.0 <= w <= 1.0:
                raise ConfigError("source_leak weights must lie in [0, 1]")


@dataclass(frozen=True)
class BaselineConfig:
    hidden: int = 32
    epochs: int = 3
    lr: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "exp2"
    variants: tuple = VARIANTS
    class_order: tuple = CLASSES
    orders_mode: str = "fixed"
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    data_path: str | None = None
    seeds: tuple = (0,)
    test_fraction: float = 0.2
    episodic: GwrParams = field(default_factory=episodic_params)
    semantic: GwrParams = field(default_factory=semantic_params)
    imagination: ImaginationConfig = field(default_factory=ImaginationConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    trajectory_length: int = 3
    replay_period: int = 1
    # Stop after this many episodes; 6 runs the whole order.
    episodes: int = len(CLASSES)
    subjects: tuple | None = None
    output_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.orders_mode not in ("fixed", "six_starts"):
            raise ConfigError(f"unknown orders_mode {self.orders_mode!r}")
        variants = tuple(self.variants)
        if not variants or any(v not in VARIANTS for v in variants):
            raise ConfigError(f"variants must be drawn from {VARIANTS}, got {variants}")
        object.__setattr__(self, "variants", variants)
        object.__setattr__(self, "class_order", check_order(self.class_order))
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", seeds)
        if (self.synth is None) == (self.data_path is None):
            raise ConfigError("give exactly one data source: synthetic config or CSV path")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if not 1 <= self.episodes <= len(CLASSES):
            raise ConfigError(f"episodes must lie in 1..{len(CLASSES)}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "variants": list(self.variants),
            "class_order": list(self.class_order),
            "orders_mode": self.orders_mode,
            "synth": None if self.synth is None else {k: _plain(v) for k, v in dataclasses.asdict(self.synth).items()},
            "data_path": self.data_path,
            "seeds": list(self.seeds),
            "test_fraction": serial.fhex(self.test_fraction),
            "episodic": self.episodic.to_dict(),
            "semantic": self.semantic.to_dict(),
            "imagination": {k: _plain(v) for k, v in dataclasses.asdict(self.imagination).items()},
            "baseline": {k: _plain(v) for k, v in dataclasses.asdict(self.baseline).items()},
            "trajectory_length": self.trajectory_length,
            "replay_period": self.replay_period,
            "episodes": self.episodes,
            "subjects": None if self.subjects is None else list(self.subjects),
        }
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        """Inverse of :meth:`to_dict`; every key is optional."""
        doc = dict(doc)
        kw = {}
        for key in ("experiment", "orders_mode", "data_path", "trajectory_length", "replay_period", "episodes", "output_dir", "jobs"):
            if key in doc:
                kw[key] = doc.pop(key)
        for key in ("variants", "class_order", "seeds"):
            if key in doc:
                kw[key] = tuple(doc.pop(key))
        if "subjects" in doc:
            s = doc.pop("subjects")
            kw["subjects"] = None if s is None else tuple(s)
        if "test_fraction" in doc:
            kw["test_fraction"] = serial.funhex(doc.pop("test_fraction"))
        if "synth" in doc:
            s = doc.pop("synth")
            kw["synth"] = None if s is None else SynthConfig(**_unplain(SynthConfig, s))
        for key, fn in (("episodic", episodic_params), ("semantic", semantic_params)):
            if key in doc:
                kw[key] = _params_from(fn, doc.pop(key))
        if "imagination" in doc:
            kw["imagination"] = ImaginationConfig(**_unplain(ImaginationConfig, doc.pop("imagination")))
        if "baseline" in doc:
            kw["baseline"] = BaselineConfig(**_unplain(BaselineConfig, doc.pop("baseline")))
        if doc:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(doc))}")
        if kw.get("data_path") is not None and "synth" not in kw:
            kw["synth"] = None
        return cls(**kw)


def _params_from(preset, doc: dict) -> GwrParams:
    """Overlay a partial parameter dict onto a preset."""
    base = preset().to_dict()
    base.update(doc)
    if "context_depth" in doc and "alphas" not in doc:
        base["alphas"] = None
    return GwrParams.from_dict(base)


def _plain(v):
    if isinstance(v, float):
        return serial.fhex(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _unplain(klass, doc: dict) -> dict:
    fields = {f.name: f for f in dataclasses.fields(klass)}
    unknown = set(doc) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {klass.__name__} key(s): {', '.join(sorted(unknown))}")
    out = {}
    for k, v in doc.items():
        default = fields[k].default
        if isinstance(default, float):
            out[k] = serial.funhex(v)
        elif isinstance(v, dict):
            out[k] = {kk: serial.funhex(vv) for kk, vv in v.items()}
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    variant: str
    subject_id: str
    order: tuple
    seed: int
    episode: int
    class_learned: str
    episodic_f1: float | None
    semantic_f1: float | None
    f1: float | None
    first_class_semantic_f1: float | None
    episodic_size: int
    semantic_size: int
    replayed: int
    imagined: int
    wall_ms: float = field(default=0.0, compare=False)

    def sort_key(self):
        return (self.experiment, VARIANTS.index(self.variant), str(self.subject_id), self.order, self.seed, self.episode)

    def score(self, head: str) -> float | None:
        """Semantic/episodic head score; the baseline answers for any head."""
        if self.variant == "baseline":
            return self.f1
        return self.semantic_f1 if head == "semantic" else self.episodic_f1


# ----------------------------------------------------------------- auditing


class Audit:
    """Counts inputs reaching learning operations and flags test leakage.

    Leakage is tracked by array identity: on noise-free data a test frame can
    equal a training frame value for value without being the same sample.
    """

    def __init__(self, test_frames: Sequence[np.ndarray] = ()):
        self.counts = {"learn": 0, "replay": 0, "imagine": 0}
        self._test = list(test_frames)
        self._test_ids = {id(f) for f in self._test}
        self.leaks = 0

    def __call__(self, kind: str, frames: np.ndarray):
        self.counts[kind] += 1
        if id(frames) in self._test_ids or any(np.shares_memory(frames, f) for f in self._test):
            self.leaks += len(np.atleast_2d(frames))


# ---------------------------------------------------------------- data prep


@dataclass
class SubjectSplit:
    subject_id: str
    train: SubjectDataset
    test: SubjectDataset


def load_subjects(cfg: ExperimentConfig, seed: int) -> tuple[list[SubjectSplit], OracleGenerator | None]:
    """Load or synthesise data for ``seed`` and split each subject."""
    oracle = None
    if cfg.synth is not None:
        data, truth = generate_synthetic(cfg.synth.replace(seed=seed), return_truth=True)
        oracle = OracleGenerator(truth.subject_means)
    else:
        data = load_csv(cfg.data_path)
    if cfg.subjects is not None:
        wanted = [str(s) for s in cfg.subjects]
        data = [d for d in data if str(d.subject_id) in wanted]
    out = []
    for ds in data:
        missing = [c for c in CLASSES if c not in ds.classes()]
        if missing:
            log.warning("skipping subject %s: no data for %s", ds.subject_id, ", ".join(missing))
            continue
        try:
            train, test = split(ds, cfg.test_fraction, seed)
        except SplitError as exc:
            log.warning("skipping subject %s: %s", ds.subject_id, exc)
            continue
        out.append(SubjectSplit(str(ds.subject_id), train, test))
    if not out:
        raise DataError("no subject provides data for all six classes")
    return out, oracle


def _support(subjects: Sequence[SubjectSplit], exclude: str):
    return [s for sub in subjects if sub.subject_id != exclude for s in sub.train.sequences]


# ------------------------------------------------------------------ one cell


@dataclass
class CellResult:
    exp1: list
    exp2: list
    audit: Audit
    model: object


def make_memory(cfg: ExperimentConfig, variant: str, seed: int) -> DualMemory:
    return DualMemory(
        cfg.episodic,
        cfg.semantic,
        replay_enabled=variant in ("gdm_replay", "clifer"),
        imagination_enabled=variant == "clifer",
        trajectory_length=cfg.trajectory_length,
        replay_period=cfg.replay_period,
        n_imagined_per_class=cfg.imagination.n_per_class,
        seed=seed,
    )


def make_generator(cfg: ExperimentConfig, subjects, subject: SubjectSplit, oracle: OracleGenerator | None):
    im = cfg.imagination
    if im.generator == "oracle":
        if oracle is None:
            raise ConfigError("the oracle generator needs synthetic data")
        gen = oracle.for_subject(subject.subject_id, im.oracle_sigma)
    else:
        support = _support(subjects, subject.subject_id)
        if not support:
            # a lone subject has no disjoint support corpus
            raise ConfigError("translation imagination needs at least two subjects")
        gen = fit_translation(support, im.jitter_sigma)
    if im.source_leak:
        gen = SourceLeakGenerator(gen, dict(im.source_leak))
    return gen


def _evaluate(predict, test: SubjectDataset, allowed: set):
    seqs = [s for s in test.sequences if s.label in allowed]
    truth = [s.label for s in seqs]
    preds = [predict(s.frames) for s in seqs]
    return truth, preds


def _f1(truth, preds) -> float:
    return macro_f1(ConfusionMatrix.from_predictions(truth, preds))


def _class_f1(truth, preds, label) -> float:
    f = per_class_f1(ConfusionMatrix.from_predictions(truth, preds))[label]
    return 0.0 if f is None else float(f)


def run_cell(cfg: ExperimentConfig, variant: str, subjects, subject: SubjectSplit, seed: int, order, oracle=None) -> CellResult:
    order = check_order(order)
    audit = Audit([s.frames for s in subject.test.sequences])
    exp1, exp2 = [], []
    if variant == "baseline":
        model = BaselineModel.create(subject.train.dim, cfg.baseline.hidden, seed)
        generator = None
    else:
        model = make_memory(cfg, variant, seed)
        model.observer = audit
        generator = make_generator(cfg, subjects, subject, oracle) if variant == "clifer" else None

    for episode, label in enumerate(order[: cfg.episodes], start=1):
        t0 = time.perf_counter()
        batch = subject.train.of_class(label)
        if variant == "baseline":
            for s in batch:
                audit("learn", s.frames)
            run_baseline_episode(model, batch, cfg.baseline.epochs, cfg.baseline.lr)
            sizes = (0, 0)
            replayed = imagined = 0
        else:
            rep = model.learn_episode(batch, generator)
            sizes = (rep.episodic_size, rep.semantic_size)
            replayed, imagined = rep.replayed_trajectories, rep.imagined_samples
        train_ms = (time.perf_counter() - t0) * 1000.0

        seen = set(order[:episode])
        for name, allowed, sink in (("exp1", seen, exp1), ("exp2", set(CLASSES), exp2)):
            t1 = time.perf_counter()
            if variant == "baseline":
                truth, preds = _evaluate(model.predict, subject.test, allowed)
                scores = dict(episodic_f1=None, semantic_f1=None, f1=_f1(truth, preds))
                first = _class_f1(truth, preds, order[0])
            else:
                truth, both = _evaluate(model.classify, subject.test, allowed)
                e_pred = [p[0] for p in both]
                s_pred = [p[1] for p in both]
                scores = dict(episodic_f1=_f1(truth, e_pred), semantic_f1=_f1(truth, s_pred), f1=None)
                first = _class_f1(truth, s_pred, order[0])
            sink.append(
                RunRecord(
                    experiment=name,
                    variant=variant,
                    subject_id=subject.subject_id,
                    order=order,
                    seed=seed,
                    episode=episode,
                    class_learned=label,
                    first_class_semantic_f1=first,
                    episodic_size=sizes[0],
                    semantic_size=sizes[1],
                    replayed=replayed,
                    imagined=imagined,
                    wall_ms=train_ms + (time.perf_counter() - t1) * 1000.0,
                    **scores,
                )
            )
    return CellResult(exp1, exp2, audit, model)


# --------------------------------------------------------------------- grid


def six_start_orders(seed: int) -> list[tuple]:
    """Six class orders, each class leading once; the tail is shuffled by seed."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 606])
    orders = []
    for c in CLASSES:
        rest = [x for x in CLASSES if x != c]
        orders.append((c,) + tuple(rest[i] for i in rng.permutation(len(rest))))
    return orders


def _cell_job(args):
    cfg, variant, subjects, subject, seed, order, oracle, which = args
    res = run_cell(cfg, variant, subjects, subject, seed, order, oracle)
    if res.audit.leaks:
        raise AssertionError(f"test data reached a learning operation ({res.audit.leaks} frames)")
    return res.exp1 if which == "exp1" else res.exp2


def _grid(cfg: ExperimentConfig, which: str, orders: Sequence[tuple]) -> list[RunRecord]:
    jobs = []
    for seed in cfg.seeds:
        subjects, oracle = load_subjects(cfg, seed)
        for order in orders:
            for variant in cfg.variants:
                for subject in subjects:
                    jobs.append((cfg, variant, subjects, subject, seed, tuple(order), oracle, which))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            chunks = list(pool.map(_cell_job, jobs))
    else:
        chunks = [_cell_job(j) for j in jobs]
    records = [r for chunk in chunks for r in chunk]
    return sorted(records, key=RunRecord.sort_key)


def run_experiment1(cfg: ExperimentConfig) -> list[RunRecord]:
    """Score after each episode on the classes learned so far."""
    return _grid(cfg, "exp1", [cfg.class_order])


def run_experiment2(cfg: ExperimentConfig) -> list[RunRecord]:
    """Score after each episode on all six classes, unseen ones included."""
    return _grid(cfg, "exp2", [cfg.class_order])


@dataclass(frozen=True)
class OrderSensitivity:
    orders: tuple
    groups: tuple
    means: dict
    kw: KwResult


def order_groups(records: Sequence[RunRecord], orders: Sequence[tuple], head: str = "semantic") -> list[list[float]]:
    final = max(len(o) for o in orders)
    groups = []
    for order in orders:
        vals = [r.score(head) for r in records if r.order == tuple(order) and r.episode == final]
        groups.append([v for v in vals if v is not None])
    return groups


def run_order_sensitivity(cfg: ExperimentConfig) -> tuple[list[RunRecord], OrderSensitivity]:
    """Experiment 2 under six class orders, compared with Kruskal-Wallis."""
    if cfg.orders_mode != "six_starts":
        raise ConfigError("order sensitivity needs orders_mode='six_starts'")
    if len(cfg.variants) != 1:
        raise ConfigError("order sensitivity compares orders for exactly one variant")
    orders = six_start_orders(cfg.seeds[0])
    records = _grid(cfg, "exp2", orders)
    groups = order_groups(records, orders)
    kw = kruskal_wallis(groups)
    means = {o[0]: float(np.mean(g)) for o, g in zip(orders, groups)}
    return records, OrderSensitivity(tuple(orders), tuple(tuple(g) for g in groups), means, kw)
