"""Image-text InfoNCE losses and the per-class text-gradient ledger.

Both losses are mean softmax cross-entropy over cosine/temperature logits
between a batch of image features and a set of class text features. They
differ only in which classes form the denominator:

* ``sit_loss``: the classes present in the batch (symmetric).
* ``ait_loss``: every class seen so far (asymmetric).

Gradients are computed analytically, w.r.t. the features and then chained
through both encoders into the trainable PET factors.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import MissingPositive, ParseError, ShapeMismatch
from .model import ModelParams, path_backward, path_forward
from .numerics import log_softmax, softmax

BUCKETS = ("positive", "symmetric", "asymmetric")


@dataclass
class LossOutput:
    loss: float
    class_ids: np.ndarray      # denominator classes, column order of the logits
    labels: np.ndarray
    V: np.ndarray              # image features (n, d_embed)
    T: np.ndarray              # text features (K, d_embed)
    probs: np.ndarray          # (n, K)
    logit_grad: np.ndarray     # dL/dlogits (n, K)
    grad_V: np.ndarray
    grad_T: np.ndarray
    grad_T_positive: np.ndarray  # part of grad_T from samples where the class is the target
    grad_T_negative: np.ndarray  # part from samples where it is a negative
    grads: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def batch_classes(self) -> np.ndarray:
        return np.unique(self.labels)


def infonce(params: ModelParams, X, labels, class_ids, descriptors) -> LossOutput:
    """Mean InfoNCE of image rows ``X`` against the classes ``class_ids``.

    ``descriptors`` holds one row per entry of ``class_ids``.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    class_ids = np.asarray(class_ids, dtype=np.int64)
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0 or len(labels) != len(X):
        raise ShapeMismatch("X must be a non-empty (n, d_in) batch with one label per row")
    if len(descriptors) != len(class_ids):
        raise ShapeMismatch("one descriptor row per class id required")
    col = {int(c): j for j, c in enumerate(class_ids)}
    if len(col) != len(class_ids):
        raise ValueError("duplicate class ids in denominator set")
    missing = sorted({int(y) for y in labels} - col.keys())
    if missing:
        raise MissingPositive(f"no descriptor for batch classes {missing}")
    target = np.array([col[int(y)] for y in labels])

    tau = params.config.temperature
    img = path_forward(params, "image", X)
    txt = path_forward(params, "text", descriptors)
    V, T = img.V, txt.V
    n, K = len(X), len(class_ids)
    Z = V @ T.T / tau
    logp = log_softmax(Z, axis=1)
    rows = np.arange(n)
    loss = float(-logp[rows, target].mean())

    P = softmax(Z, axis=1)
    onehot = np.zeros((n, K))
    onehot[rows, target] = 1.0
    dZ = (P - onehot) / n
    grad_V = dZ @ T / tau
    grad_T = dZ.T @ V / tau
    grad_T_pos = (dZ * onehot).T @ V / tau
    grad_T_neg = (dZ * (1.0 - onehot)).T @ V / tau

    grads = path_backward(params, img, grad_V)
    grads.update(path_backward(params, txt, grad_T))
    return LossOutput(loss, class_ids, labels, V, T, P, dZ, grad_V, grad_T,
                      grad_T_pos, grad_T_neg, grads)


def _select(descriptors: Mapping[int, np.ndarray], ids) -> tuple[np.ndarray, np.ndarray]:
    missing = [c for c in ids if c not in descriptors]
    if missing:
        raise MissingPositive(f"no descriptor for classes {missing}")
    return np.array(ids, dtype=np.int64), np.array([descriptors[c] for c in ids])


def sit_loss(params: ModelParams, X, labels, descriptors: Mapping[int, np.ndarray]) -> LossOutput:
    """Symmetric loss: the denominator holds only the classes present in the batch.

    ``descriptors`` may contain more classes than the batch; extras are ignored.
    """
    batch = sorted({int(y) for y in np.asarray(labels)})
    ids, E = _select(descriptors, batch)
    return infonce(params, X, labels, ids, E)


def ait_loss(params: ModelParams, X, labels, seen_descriptors: Mapping[int, np.ndarray]) -> LossOutput:
    """Asymmetric loss: the denominator holds every class in ``seen_descriptors``.

    Columns are ordered by class id, as in :func:`sit_loss`, so the result
    depends only on the set of seen classes.
    """
    ids, E = _select(seen_descriptors, sorted(int(c) for c in seen_descriptors))
    return infonce(params, X, labels, ids, E)


@dataclass
class GradientLedger:
    """Per-step, per-class norms of the text-feature gradient, split by role.

    A class's contribution is ``positive`` when it is the target of a sample,
    ``symmetric`` when it is a negative and present in the batch, and
    ``asymmetric`` when it is a negative absent from the batch (AIT only).
    """

    # step -> class id -> [positive, symmetric, asymmetric]
    steps: dict[int, dict[int, list[float]]] = field(default_factory=lambda: defaultdict(dict))
    occurrence: dict[int, int] = field(default_factory=dict)  # class id -> order of first appearance

    def add(self, step: int, class_id: int, bucket: str, value: float) -> None:
        row = self.steps[step].setdefault(class_id, [0.0, 0.0, 0.0])
        row[BUCKETS.index(bucket)] += float(value)
        self.occurrence.setdefault(class_id, len(self.occurrence))

    def class_ids(self) -> list[int]:
        return sorted(self.occurrence, key=self.occurrence.__getitem__)

    def totals(self, class_id: int) -> dict[str, float]:
        acc = np.zeros(3)
        for per_class in self.steps.values():
            if class_id in per_class:
                acc += per_class[class_id]
        return dict(zip(BUCKETS, acc.tolist()))

    def bucket_total(self, bucket: str) -> float:
        j = BUCKETS.index(bucket)
        return float(sum(r[j] for per in self.steps.values() for r in per.values()))

    def cumulative(self, class_id: int) -> tuple[list[int], np.ndarray]:
        """Steps and running totals (shape (steps, 3)) for one class."""
        steps = sorted(self.steps)
        vals = np.array([self.steps[s].get(class_id, [0.0, 0.0, 0.0]) for s in steps]).reshape(-1, 3)
        return steps, np.cumsum(vals, axis=0)

    def rows(self):
        for s in sorted(self.steps):
            for c in sorted(self.steps[s], key=self.occurrence.__getitem__):
                for b, v in zip(BUCKETS, self.steps[s][c]):
                    yield s, c, b, v

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "class_id", "bucket", "norm"])
            for s, c, b, v in self.rows():
                w.writerow([s, c, b, repr(v)])

    @classmethod
    def load_csv(cls, path) -> "GradientLedger":
        led = cls()
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header != ["step", "class_id", "bucket", "norm"]:
                raise ParseError(f"unexpected ledger header {header}", line=1)
            for lineno, row in enumerate(r, start=2):
                try:
                    s, c, b, v = int(row[0]), int(row[1]), row[2], float(row[3])
                except (ValueError, IndexError):
                    raise ParseError(f"bad ledger row {row}", line=lineno) from None
                if b not in BUCKETS:
                    raise ParseError(f"unknown bucket {b!r}", line=lineno)
                led.add(s, c, b, v)
        return led


def record_ledger(out: LossOutput, step: int, ledger: GradientLedger,
                  batch_classes=None, seen_classes=None) -> GradientLedger:
    """Add one optimization step's per-class gradient norms to ``ledger``.

    ``batch_classes`` defaults to the labels of ``out``; ``seen_classes`` to its
    denominator classes.
    """
    batch = set(int(c) for c in (out.batch_classes if batch_classes is None else batch_classes))
    seen = [int(c) for c in (out.class_ids if seen_classes is None else seen_classes)]
    col = {int(c): j for j, c in enumerate(out.class_ids)}
    for c in seen:
        if c not in col:
            continue
        j = col[c]
        pos = float(np.linalg.norm(out.grad_T_positive[j]))
        neg = float(np.linalg.norm(out.grad_T_negative[j]))
        if c in batch:
            ledger.add(step, c, "positive", pos)
            ledger.add(step, c, "symmetric", neg)
        else:
            ledger.add(step, c, "asymmetric", neg)
    return ledger
