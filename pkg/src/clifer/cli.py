"""Command line entry point: ``clifer synth|run|report|snapshot``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import serial
from .classes import CLASSES
from .datasets import SynthConfig, generate_synthetic, save_csv
from .errors import CliferError, ConfigError, DataError, InputError, ProtocolError
from .harness import (
    ExperimentConfig,
    make_generator,
    make_memory,
    load_subjects,
    run_experiment1,
    run_experiment2,
    run_order_sensitivity,
)
from .memory import DualMemory
from .report import read_records, write_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("clifer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    """Parse ``0,3,5`` or ``0-9`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-", 1))
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return tuple(out)


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _add_synth_flags(p):
    d = SynthConfig()
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--subjects", type=int, default=d.subjects)
    p.add_argument("--sequences-per-class", type=int, default=d.sequences_per_class)
    p.add_argument("--frames", type=int, default=d.frames_per_sequence, help="frames per sequence")
    p.add_argument("--separation", type=float, default=d.class_separation)
    p.add_argument("--sigma", type=float, default=d.within_class_sigma, help="within-class noise")
    p.add_argument("--rho", type=float, default=d.ar_coefficient, help="frame-to-frame AR(1) coefficient")
    p.add_argument("--offset-sigma", type=float, default=d.subject_offset_sigma)
    p.add_argument("--expression-sigma", type=float, default=d.expression_sigma)
    p.add_argument("--seed", type=int, default=d.seed)


def _synth_from(args) -> SynthConfig:
    return SynthConfig(
        dim=args.dim,
        subjects=args.subjects,
        sequences_per_class=args.sequences_per_class,
        frames_per_sequence=args.frames,
        class_separation=args.separation,
        within_class_sigma=args.sigma,
        ar_coefficient=args.rho,
        subject_offset_sigma=args.offset_sigma,
        expression_sigma=args.expression_sigma,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clifer", description="Dual-memory class-incremental expression learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic feature CSV")
    _add_synth_flags(p)
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("run", help="run an experiment grid and write reports")
    p.add_argument("--experiment", choices=("exp1", "exp2", "orders"), default=None)
    p.add_argument("--variants", type=_name_list, default=None, help="comma list of gdm,gdm_replay,clifer,baseline")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV of pre-encoded features")
    src.add_argument("--synthetic", action="store_true", help="generate data (default when --data is absent)")
    p.add_argument("--seeds", type=_int_list, default=None, help="e.g. 0-9 or 0,4,7")
    p.add_argument("--order", type=_name_list, default=None, help="comma list of the six classes")
    p.add_argument("--subjects", type=_name_list, default=None, help="restrict to these subject ids")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--params", help="JSON config file; flags override it")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")

    p = sub.add_parser("report", help="rebuild summary files from a records.csv")
    p.add_argument("records")
    p.add_argument("--out", required=True)

    p = sub.add_parser("snapshot", help="save or inspect dual-memory snapshots")
    snap = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = snap.add_parser("save", help="train one subject and save the memory")
    s.add_argument("--data", help="CSV of pre-encoded features (default: synthetic)")
    s.add_argument("--params", help="JSON config file")
    s.add_argument("--subject", default=None, help="subject id (default: first)")
    s.add_argument("--variant", choices=("gdm", "gdm_replay", "clifer"), default="clifer")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--episodes", type=int, default=len(CLASSES))
    s.add_argument("--out", required=True)
    s = snap.add_parser("show", help="load a snapshot, verify the round trip and print a summary")
    s.add_argument("path")
    return parser


def _load_params(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read params file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"params file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("params file must hold a JSON object")
    return doc


def config_from_args(args) -> ExperimentConfig:
    doc = _load_params(args.params) if getattr(args, "params", None) else {}
    if getattr(args, "experiment", None):
        if args.experiment == "orders":
            doc["experiment"] = "order_sensitivity"
            doc["orders_mode"] = "six_starts"
        else:
            doc["experiment"] = args.experiment
    if getattr(args, "variants", None):
        doc["variants"] = list(args.variants)
    if getattr(args, "seeds", None):
        doc["seeds"] = list(args.seeds)
    if getattr(args, "order", None):
        doc["class_order"] = list(args.order)
    if getattr(args, "subjects", None):
        doc["subjects"] = list(args.subjects)
    if getattr(args, "jobs", None):
        doc["jobs"] = args.jobs
    if getattr(args, "data", None):
        doc["data_path"] = args.data
        doc["synth"] = None
    elif getattr(args, "synthetic", False):
        doc.pop("data_path", None)
        doc.setdefault("synth", {})
        if doc["synth"] is None:
            doc["synth"] = {}
    return ExperimentConfig.from_dict(doc)


def cmd_synth(args) -> int:
    cfg = _synth_from(args)
    path = save_csv(generate_synthetic(cfg), args.out)
    print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    order_result = None
    if cfg.experiment == "exp1":
        records = run_experiment1(cfg)
    elif cfg.experiment == "exp2":
        records = run_experiment2(cfg)
    else:
        records, order_result = run_order_sensitivity(cfg)
    paths = write_report(records, args.out, cfg.to_dict(), order_result)
    for p in paths.values():
        print(p)
    if order_result is not None:
        kw = order_result.kw
        print(f"Kruskal-Wallis H={kw.H:.6g} df={kw.degrees_of_freedom} p={kw.p_value:.6g}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = read_records(args.records)
    except OSError as exc:
        raise DataError(f"cannot read records: {exc}") from None
    meta_path = Path(args.records).with_name("run_meta.json")
    config = None
    if meta_path.exists():
        config = json.loads(meta_path.read_text()).get("config")
    for p in write_report(records, args.out, config).values():
        print(p)
    return EXIT_OK


def cmd_snapshot_save(args) -> int:
    doc = _load_params(args.params) if args.params else {}
    if args.data:
        doc["data_path"] = args.data
        doc["synth"] = None
    doc["seeds"] = [args.seed]
    cfg = ExperimentConfig.from_dict(doc)
    subjects, oracle = load_subjects(cfg, args.seed)
    ids = [s.subject_id for s in subjects]
    wanted = args.subject or ids[0]
    if wanted not in ids:
        raise DataError(f"unknown or skipped subject {wanted!r}")
    subject = subjects[ids.index(wanted)]
    if not 1 <= args.episodes <= len(CLASSES):
        raise UsageError("--episodes must lie in 1..6")
    dm = make_memory(cfg, args.variant, args.seed)
    gen = make_generator(cfg, subjects, subject, oracle) if args.variant == "clifer" else None
    for label in cfg.class_order[: args.episodes]:
        dm.learn_episode(subject.train.of_class(label), gen)
    print(dm.save(args.out))
    return EXIT_OK


def cmd_snapshot_show(args) -> int:
    try:
        doc = serial.read_doc(args.path)
    except OSError as exc:
        raise DataError(f"cannot read snapshot: {exc}") from None
    except ValueError as exc:
        raise DataError(f"snapshot is not valid JSON: {exc}") from None
    try:
        dm = DualMemory.from_dict(doc)
    except (KeyError, TypeError, InputError) as exc:
        raise DataError(f"malformed snapshot: {exc}") from None
    if dm.to_dict() != doc:
        raise DataError("snapshot does not round-trip exactly")
    info = {
        "kind": doc["kind"],
        "version": doc["version"],
        "episodes_learned": dm.episodes_learned,
        "episodic_neurons": 0 if dm.episodic is None else len(dm.episodic),
        "semantic_neurons": 0 if dm.semantic is None else len(dm.semantic),
        "episodic_labels": [] if dm.episodic is None else list(dm.episodic.labels()),
        "semantic_labels": [] if dm.semantic is None else list(dm.semantic.labels()),
        "replay_enabled": dm.replay_enabled,
        "imagination_enabled": dm.imagination_enabled,
    }
    print(json.dumps(info, indent=1))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"synth": cmd_synth, "run": cmd_run, "report": cmd_report}
    try:
        if args.command == "snapshot":
            return cmd_snapshot_save(args) if args.action == "save" else cmd_snapshot_show(args)
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ProtocolError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CliferError, OSError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
