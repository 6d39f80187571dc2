"""Mini-batch SGD on the joint loss."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .._validation import check_positive
from .network import JointModel, backward, batch_losses, forward_batch

DEFAULT_LR = 1e-2
DEFAULT_BATCH = 8


@dataclass(frozen=True)
class TrainingPair:
    """One mel segment with its pipe label and, for pipe samples, the depth in meters."""

    input: np.ndarray
    pipe_label: int
    depth_label: float | None = None

    def __post_init__(self):
        values = np.asarray(getattr(self.input, "values", self.input), dtype=float)
        object.__setattr__(self, "input", values)
        if self.pipe_label not in (0, 1):
            raise ValueError(f"pipe_label must be 0 or 1, got {self.pipe_label!r}")
        if self.depth_label is not None and not np.isfinite(self.depth_label):
            raise ValueError("depth_label must be finite when present")


def stack_pairs(pairs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.stack([p.input for p in pairs])
    y = np.array([p.pipe_label for p in pairs], dtype=int)
    d = np.array([np.nan if p.depth_label is None else p.depth_label for p in pairs], dtype=float)
    return X, y, d


def depth_mask(labels, depths, supervision: str = "pipe") -> np.ndarray:
    """Which samples contribute to the depth loss.

    ``"pipe"`` supervises pipe samples that carry a depth; ``"all"`` any sample
    with a finite depth.
    """
    finite = np.isfinite(np.asarray(depths, dtype=float))
    if supervision == "all":
        return finite
    if supervision == "pipe":
        return finite & (np.asarray(labels) == 1)
    raise ValueError(f"unknown depth supervision {supervision!r}")


def train(model: JointModel, X, y, depths=None, epochs: int = 10, learning_rate: float = DEFAULT_LR,
          seed: int = 0, batch_size: int = DEFAULT_BATCH, w0: float = 1.0, w1: float = 1.0,
          supervision: str = "pipe", dtype=np.float32, callback=None) -> tuple[JointModel, list[float]]:
    """Train a copy of ``model``; returns it with the mean joint loss of every epoch.

    Each step moves along the mean gradient of one shuffled batch. The epoch
    loss is the mean per-sample loss seen during that epoch's passes.
    """
    learning_rate = check_positive(learning_rate, "learning_rate", allow_zero=True)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise ValueError("training set is empty")
    depths = np.full(len(y), np.nan) if depths is None else np.asarray(depths, dtype=float)
    if np.unique(y).size < 2:
        warnings.warn(f"every training sample has pipe label {y[0]}; the pipe head sees one class", stacklevel=2)
    mask = depth_mask(y, depths, supervision)
    model = model.copy()
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(int(epochs)):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(order), batch_size):
            b = order[start : start + batch_size]
            cache = forward_batch(model, X[b], dtype)
            total += float(batch_losses(cache, y[b], depths[b], mask[b], w0, w1).sum())
            grads = backward(model, cache, y[b], depths[b], mask[b], w0, w1)
            step = learning_rate / len(b)
            for k, g in grads.items():
                model.params[k] -= step * g
        history.append(total / len(X))
        if callback is not None:
            callback(epoch, history[-1], model)
    return model, history


def predict_batches(model: JointModel, X, batch_size: int = 32, dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    probs, depth = [], []
    for start in range(0, len(X), batch_size):
        cache = forward_batch(model, X[start : start + batch_size], dtype)
        probs.append(cache.probs)
        depth.append(cache.depth)
    if not probs:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(probs), np.concatenate(depth)


def aggregate_segments(probs, depth, source, mode: str = "mean") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse per-segment outputs to one prediction per source SOI.

    ``mean`` averages the pipe probabilities and depths. ``vote`` takes the
    majority segment label as a one-hot probability (ties go to the pipe
    class) and still averages the depth. Returns the sorted source ids with
    their probabilities and depths.
    """
    probs = np.asarray(probs, dtype=float).reshape(-1, 2)
    depth = np.asarray(depth, dtype=float).reshape(-1)
    source = np.asarray(source).reshape(-1)
    if mode not in ("mean", "vote"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    ids = np.unique(source)
    out_p, out_d = np.zeros((len(ids), 2)), np.zeros(len(ids))
    for k, s in enumerate(ids):
        sel = source == s
        if mode == "mean":
            out_p[k] = probs[sel].mean(axis=0)
        else:
            votes = np.argmax(probs[sel], axis=1)
            out_p[k, int(2 * votes.sum() >= votes.size)] = 1.0
        out_d[k] = depth[sel].mean()
    return ids, out_p, out_d
