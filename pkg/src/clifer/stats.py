"""Evaluation metrics and the rank statistics used for order sensitivity.

All functions here are pure. The chi-square tail is computed from the
regularized incomplete gamma function, so there is no scipy dependency at
runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classes import CLASSES
from .errors import DegenerateDataError, InputError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are the true class, columns the predicted class."""

    classes: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise InputError(f"confusion matrix must be {k}x{k}, got {counts.shape}")
        if (counts < 0).any():
            raise InputError("confusion counts must be non-negative")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_predictions(cls, truth: Sequence, predicted: Sequence, classes=CLASSES) -> "ConfusionMatrix":
        if len(truth) != len(predicted):
            raise InputError("truth and predictions differ in length")
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(truth, predicted):
            try:
                counts[index[t], index[p]] += 1
            except KeyError as exc:
                raise InputError(f"label {exc.args[0]!r} not in class list") from None
        return cls(tuple(classes), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def per_class_f1(cm: ConfusionMatrix) -> dict:
    """F1 per class; classes never seen nor predicted map to ``None``."""
    out = {}
    tp = np.diag(cm.counts)
    pred = cm.counts.sum(axis=0)
    truth = cm.counts.sum(axis=1)
    for i, c in enumerate(cm.classes):
        if truth[i] == 0 and pred[i] == 0:
            out[c] = None
            continue
        precision = tp[i] / pred[i] if pred[i] else 0.0
        recall = tp[i] / truth[i] if truth[i] else 0.0
        out[c] = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return out


def macro_f1(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise InputError("cannot score an empty confusion matrix")
    scores = [f for f in per_class_f1(cm).values() if f is not None]
    return float(sum(scores) / len(scores))


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width (1.96 standard errors)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InputError("a confidence interval needs at least 2 values")
    if np.all(x == x[0]):
        return float(x[0]), 0.0
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------- gamma / chi2


def _lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x), modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise InputError("shape must be positive")
    if x < 0:
        raise InputError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_fraction(a, x))


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if x < 0 or math.isnan(x):
        raise InputError(f"chi-square statistic must be non-negative, got {x}")
    if df < 1 or int(df) != df:
        raise InputError(f"degrees of freedom must be a positive integer, got {df}")
    if math.isinf(x):
        return 0.0
    return gamma_q(df / 2.0, x / 2.0)


# --------------------------------------------------------------- rank tests


@dataclass(frozen=True)
class KwResult:
    H: float
    degrees_of_freedom: int
    p_value: float
    tie_corrected: bool


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KwResult:
    if len(groups) < 2:
        raise InputError("need at least 2 groups")
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if any(a.size == 0 for a in arrays):
        raise InputError("every group needs at least one value")
    pooled = np.concatenate(arrays)
    if np.isnan(pooled).any():
        raise InputError("NaN in Kruskal-Wallis input")
    n = pooled.size
    if np.all(pooled == pooled[0]):
        raise DegenerateDataError("all values are identical; the H statistic is undefined")
    ranks = midranks(pooled)
    centre = (n + 1) / 2.0
    h = 0.0
    start = 0
    for a in arrays:
        r = ranks[start : start + a.size]
        start += a.size
        h += a.size * (r.mean() - centre) ** 2
    h *= 12.0 / (n * (n + 1))

    _, tie_sizes = np.unique(pooled, return_counts=True)
    ties = float(np.sum(tie_sizes.astype(float) ** 3 - tie_sizes))
    corrected = ties > 0
    if corrected:
        h /= 1.0 - ties / (float(n) ** 3 - n)
    h = max(h, 0.0)
    df = len(arrays) - 1
    return KwResult(H=float(h), degrees_of_freedom=df, p_value=chi_square_sf(h, df), tie_corrected=corrected)


@dataclass(frozen=True)
class SignTestResult:
    positive: int
    negative: int
    ties: int
    p_value: float


def sign_test(differences: Sequence[float]) -> SignTestResult:
    """One-sided exact sign test of H1: median difference > 0. Zeros are dropped."""
    d = np.asarray(differences, dtype=float)
    pos = int((d > 0).sum())
    neg = int((d < 0).sum())
    n = pos + neg
    if n == 0:
        p = 1.0
    else:
        p = sum(math.comb(n, k) for k in range(pos, n + 1)) / 2.0**n
    return SignTestResult(pos, neg, int(d.size - n), float(p))
