"""Report files for a list of run records.

Everything except ``timings.csv`` is a pure function of the records and the
config, so re-running the report reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .classes import check_order
from .errors import InputError, ParseError, SchemaError
from .harness import VARIANTS, OrderSensitivity, RunRecord
from .stats import mean_ci95

RECORD_FIELDS = (
    "experiment",
    "variant",
    "subject_id",
    "order",
    "seed",
    "episode",
    "class_learned",
    "episodic_f1",
    "semantic_f1",
    "f1",
    "first_class_semantic_f1",
    "episodic_size",
    "semantic_size",
    "replayed",
    "imagined",
)
FLOAT_FIELDS = ("episodic_f1", "semantic_f1", "f1", "first_class_semantic_f1")
INT_FIELDS = ("seed", "episode", "episodic_size", "semantic_size", "replayed", "imagined")

INTERPRETATIONS = {
    "ci95": "normal approximation, mean +/- 1.96 * s / sqrt(n); null when n < 2",
    "f1": "macro F1 over classes present in truth or predictions",
    "baseline": "trained sequentially, one episode per class, no replay",
    "exp1_curve": "experiment 1 scores each episode on the classes seen so far",
    "exp2_curve": "experiment 2 scores each episode on all six classes",
    "order_groups": "one value per subject: final-episode semantic F1",
}


def fmt(x) -> str:
    """Fixed 9-significant-digit rendering; empty for missing values."""
    if x is None:
        return ""
    return format(float(x), ".9g")


def _num(x):
    return None if x is None else float(fmt(x))


def records_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in sorted(records, key=RunRecord.sort_key):
        row = []
        for name in RECORD_FIELDS:
            v = getattr(r, name)
            if name == "order":
                v = "|".join(v)
            elif name in FLOAT_FIELDS:
                v = fmt(v)
            row.append(v)
        w.writerow(row)
    return buf.getvalue()


def read_records(path) -> list[RunRecord]:
    """Parse a records.csv written by :func:`write_report`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty records file", line=1)
        if tuple(header) != RECORD_FIELDS:
            raise SchemaError(f"unexpected records header {header}", line=1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(RECORD_FIELDS):
                raise SchemaError(f"expected {len(RECORD_FIELDS)} fields, got {len(row)}", line=lineno)
            kw = dict(zip(RECORD_FIELDS, row))
            try:
                for name in FLOAT_FIELDS:
                    kw[name] = None if kw[name] == "" else float(kw[name])
                for name in INT_FIELDS:
                    kw[name] = int(kw[name])
                kw["order"] = check_order(kw["order"].split("|"))
            except Exception as exc:
                raise ParseError(str(exc), line=lineno) from None
            if kw["variant"] not in VARIANTS:
                raise SchemaError(f"unknown variant {kw['variant']!r}", line=lineno)
            out.append(RunRecord(**kw))
    return out


def _heads(variant: str) -> tuple[str, ...]:
    return ("f1",) if variant == "baseline" else ("episodic", "semantic")


def _value(r: RunRecord, head: str):
    return {"f1": r.f1, "episodic": r.episodic_f1, "semantic": r.semantic_f1}[head]


def summarize(records: Sequence[RunRecord]) -> dict:
    """Mean and CI95 half-width per (experiment, variant, episode, head).

    Scores are rounded as in records.csv first, so a summary rebuilt from that
    file is identical to the original.
    """
    if not records:
        raise InputError("no records to summarize")
    groups = defaultdict(list)
    for r in records:
        for head in _heads(r.variant):
            v = _value(r, head)
            if v is not None:
                groups[(r.experiment, r.variant, r.episode, head)].append(_num(v))
    out: dict = {}
    for (exp, variant, episode, head), vals in sorted(
        groups.items(), key=lambda kv: (kv[0][0], VARIANTS.index(kv[0][1]), kv[0][2], kv[0][3])
    ):
        vals = sorted(vals)  # summation order must not depend on record order
        if len(vals) >= 2:
            mean, half = mean_ci95(vals)
        else:
            mean, half = math.fsum(vals) / len(vals), None
        cell = out.setdefault(exp, {}).setdefault(variant, {}).setdefault(str(episode), {})
        cell[head] = {"n": len(vals), "mean": _num(mean), "ci95_half_width": _num(half)}
    return out


def plot_rows(summary: dict) -> list[tuple]:
    rows = []
    for exp, by_variant in summary.items():
        for variant, by_episode in by_variant.items():
            for episode, by_head in by_episode.items():
                for head, s in by_head.items():
                    half = s["ci95_half_width"]
                    lo = None if half is None else s["mean"] - half
                    hi = None if half is None else s["mean"] + half
                    rows.append((exp, int(episode), variant, head, s["mean"], lo, hi))
    return sorted(rows, key=lambda r: (r[0], r[1], VARIANTS.index(r[2]), r[3]))


def plot_csv(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("experiment", "episode", "variant", "head", "mean", "ci_low", "ci_high"))
    for exp, ep, variant, head, mean, lo, hi in plot_rows(summary):
        w.writerow((exp, ep, variant, head, fmt(mean), fmt(lo), fmt(hi)))
    return buf.getvalue()


def timings_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("experiment", "variant", "subject_id", "order", "seed", "episode", "wall_ms"))
    for r in sorted(records, key=RunRecord.sort_key):
        w.writerow((r.experiment, r.variant, r.subject_id, "|".join(r.order), r.seed, r.episode, f"{r.wall_ms:.3f}"))
    return buf.getvalue()


def order_doc(result: OrderSensitivity) -> dict:
    kw = result.kw
    return {
        "orders": [list(o) for o in result.orders],
        "group_sizes": [len(g) for g in result.groups],
        "means_by_first_class": {k: _num(v) for k, v in result.means.items()},
        "kruskal_wallis": {
            "H": _num(kw.H),
            "degrees_of_freedom": kw.degrees_of_freedom,
            "p_value": _num(kw.p_value),
            "tie_corrected": kw.tie_corrected,
        },
    }


def _json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_report(
    records: Sequence[RunRecord],
    out_dir,
    config: dict | None = None,
    order_result: OrderSensitivity | None = None,
) -> dict[str, Path]:
    """Write records, summary, plot data and metadata; return the paths."""
    if not records:
        raise InputError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(records)
    files = {
        "records.csv": records_csv(records),
        "summary.json": _json(summary),
        "plot_data.csv": plot_csv(summary),
        "timings.csv": timings_csv(records),
    }
    meta = {
        "config": config,
        "seeds": sorted({r.seed for r in records}),
        "variants": [v for v in VARIANTS if any(r.variant == v for r in records)],
        "experiments": sorted({r.experiment for r in records}),
        "n_records": len(records),
        "interpretations": INTERPRETATIONS,
    }
    files["run_meta.json"] = _json(meta)
    if order_result is not None:
        files["order_sensitivity.json"] = _json(order_doc(order_result))
    paths = {}
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths[name] = p
    return paths
