"""One-hidden-layer perceptron baseline trained episode by episode (no replay)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classes import CLASS_INDEX, CLASSES, LabeledSequence
from .errors import DimensionError, InputError, ProtocolError, TrainingError


@dataclass
class BaselineModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    seed: int = 0
    steps: int = field(default=0)

    @classmethod
    def create(cls, dim: int, hidden: int = 32, seed: int = 0) -> "BaselineModel":
        if dim < 1 or hidden < 1:
            raise InputError("dim and hidden must be >= 1")
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 7])
        return cls(
            W1=rng.normal(0.0, np.sqrt(2.0 / dim), (dim, hidden)),
            b1=np.zeros(hidden),
            W2=rng.normal(0.0, np.sqrt(2.0 / hidden), (hidden, len(CLASSES))),
            b2=np.zeros(len(CLASSES)),
            seed=int(seed),
        )

    @property
    def dim(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "BaselineModel":
        return BaselineModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(), self.seed, self.steps)

    def probabilities(self, frames) -> np.ndarray:
        X = np.atleast_2d(np.asarray(frames, dtype=float))
        hidden = np.maximum(0.0, X @ self.W1 + self.b1)
        logits = hidden @ self.W2 + self.b2
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, sequence) -> str:
        """Class with the highest mean probability over the sequence's frames."""
        frames = np.asarray(sequence, dtype=float)
        if frames.size == 0:
            raise InputError("cannot classify an empty frame list")
        return CLASSES[int(np.argmax(self.probabilities(frames).mean(axis=0)))]


def loss_and_grads(model: BaselineModel, X: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Summed cross-entropy over the rows of X and its analytic gradient."""
    X = np.atleast_2d(X)
    pre = X @ model.W1 + model.b1
    hidden = np.maximum(0.0, pre)
    logits = hidden @ model.W2 + model.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.sum(log_norm - shifted[np.arange(len(y)), y]))

    probs = np.exp(shifted - log_norm[:, None])
    d_logits = probs
    d_logits[np.arange(len(y)), y] -= 1.0
    d_hidden = d_logits @ model.W2.T
    d_pre = d_hidden * (pre > 0)
    grads = {
        "W2": hidden.T @ d_logits,
        "b2": d_logits.sum(axis=0),
        "W1": X.T @ d_pre,
        "b1": d_pre.sum(axis=0),
    }
    return loss, grads


def run_baseline_episode(model: BaselineModel, batch: Sequence[LabeledSequence], epochs: int, lr: float) -> BaselineModel:
    """Plain SGD, one step per frame, on this episode's class only. Mutates and returns ``model``."""
    batch = list(batch)
    if not batch:
        raise ProtocolError("an episode needs at least one sequence")
    labels = {s.label for s in batch}
    if len(labels) != 1:
        raise ProtocolError(f"an episode must contain one class, got {sorted(labels)}")
    frames = np.concatenate([s.frames for s in batch])
    if frames.shape[1] != model.dim:
        raise DimensionError(f"expected dimension {model.dim}, got {frames.shape[1]}")
    target = np.array([CLASS_INDEX[labels.pop()]])
    rng = np.random.default_rng([model.seed & 0xFFFFFFFF, model.steps])
    for _ in range(epochs):
        for i in rng.permutation(len(frames)):
            with np.errstate(all="ignore"):
                loss, grads = loss_and_grads(model, frames[i][None, :], target)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at step {model.steps}")
            if lr:
                model.W1 -= lr * grads["W1"]
                model.b1 -= lr * grads["b1"]
                model.W2 -= lr * grads["W2"]
                model.b2 -= lr * grads["b2"]
            model.steps += 1
    for name, p in model.params().items():
        if not np.all(np.isfinite(p)):
            raise TrainingError(f"non-finite weights in {name}")
    return model
