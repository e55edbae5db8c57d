"""Bit-exact text encoding shared by every snapshot format.

Floats are written as hex strings (``float.hex``), which round-trip every
IEEE double exactly, including signed zero. Readers also accept plain JSON
numbers so hand-written config files can use decimals.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError


def fhex(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"cannot serialize non-finite value {x!r}")
    return x.hex()


def funhex(v) -> float:
    if isinstance(v, str):
        try:
            return float.fromhex(v)
        except ValueError:
            return float(v)
    if isinstance(v, bool):
        raise InputError(f"expected a number, got {v!r}")
    return float(v)


def array_hex(a: np.ndarray):
    """Nested lists of hex strings with the same shape as ``a``."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return fhex(a)
    return [array_hex(row) for row in a] if a.ndim > 1 else [fhex(v) for v in a]


def array_unhex(v, ndim: int | None = None) -> np.ndarray:
    def walk(item):
        if isinstance(item, list):
            return [walk(i) for i in item]
        return funhex(item)

    out = np.array(walk(v), dtype=float)
    if ndim is not None and out.ndim != ndim and out.size:
        raise InputError(f"expected a {ndim}-d array, got shape {out.shape}")
    return out


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_doc(doc: dict, path) -> Path:
    path = Path(path)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_doc(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
