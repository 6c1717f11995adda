"""Synthetic classification world: Gaussian clusters plus frozen class descriptors.

Class ids ``0 .. num_classes-1`` are streamed; the next ``held_out_count`` ids
are held out for zero-shot evaluation and never scheduled.

File layout written by :func:`export_dataset`::

    # {"format": "sitlab-dataset", "n_train": ..., "n_test": ..., "classes": [...], ...}
    <class id>,<x_0>,...,<x_{d_in-1}>      one row per sample, train rows first

The first line is ``#`` followed by a single-line JSON header carrying the
class specs (means, descriptors), held-out ids and split sizes. Floats are
written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, ParseError
from .model import ModelParams, encode_image
from .numerics import l2_normalize, make_rng

# class means sit on a sphere of radius SEPARATION_FACTOR * cluster_sigma
SEPARATION_FACTOR = 6.0


@dataclass(frozen=True)
class ClassSpec:
    id: int
    mean: np.ndarray
    descriptor: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, ClassSpec):
            return NotImplemented
        if self.id != other.id or not np.array_equal(self.mean, other.mean):
            return False
        if self.descriptor is None or other.descriptor is None:
            return self.descriptor is None and other.descriptor is None
        return np.array_equal(self.descriptor, other.descriptor)


@dataclass(frozen=True)
class Dataset:
    classes: tuple[ClassSpec, ...]
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    held_out: tuple[int, ...] = ()

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def d_in(self) -> int:
        return self.train_x.shape[1]

    @property
    def stream_classes(self) -> tuple[int, ...]:
        held = set(self.held_out)
        return tuple(c.id for c in self.classes if c.id not in held)

    def train_ids(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.train_y == class_id)

    def descriptor_matrix(self, class_ids) -> np.ndarray:
        rows = []
        for c in class_ids:
            d = self.classes[int(c)].descriptor
            if d is None:
                raise InvalidConfig(f"class {c} has no descriptor; call make_descriptors first")
            rows.append(d)
        return np.array(rows, dtype=np.float64).reshape(len(rows), -1)

    def has_descriptors(self) -> bool:
        return all(c.descriptor is not None for c in self.classes)

    def test_subset(self, class_ids) -> tuple[np.ndarray, np.ndarray]:
        mask = np.isin(self.test_y, np.asarray(list(class_ids), dtype=np.int64))
        return self.test_x[mask], self.test_y[mask]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.classes == other.classes and self.held_out == other.held_out
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("train_x", "train_y", "test_x", "test_y")))


def generate_dataset(num_classes: int, held_out_count: int, per_class_train: int,
                     per_class_test: int, d_in: int, cluster_sigma: float, seed: int,
                     separation: float | None = None) -> Dataset:
    """Gaussian clusters around random points on a sphere.

    ``separation`` is the radius of that sphere; it defaults to
    ``SEPARATION_FACTOR * cluster_sigma`` (or 1.0 when ``cluster_sigma`` is 0,
    where any radius gives the same cosine geometry).
    """
    if num_classes < 2:
        raise InvalidConfig("num_classes must be >= 2")
    if held_out_count < 0:
        raise InvalidConfig("held_out_count must be >= 0")
    if per_class_train < 1 or per_class_test < 1:
        raise InvalidConfig("per-class sample counts must be >= 1")
    if d_in < 1:
        raise InvalidConfig("d_in must be positive")
    if not cluster_sigma >= 0:
        raise InvalidConfig("cluster_sigma must be >= 0")
    if separation is None:
        separation = SEPARATION_FACTOR * cluster_sigma if cluster_sigma > 0 else 1.0
    if not separation > 0:
        raise InvalidConfig("separation must be positive")

    total = num_classes + held_out_count
    rng_means = make_rng(seed, 1)
    rng_train = make_rng(seed, 2)
    rng_test = make_rng(seed, 3)
    classes = []
    for c in range(total):
        u = rng_means.standard_normal(d_in)
        classes.append(ClassSpec(c, separation * l2_normalize(u)))

    def draw(rng, per_class):
        xs = [c.mean + cluster_sigma * rng.standard_normal((per_class, d_in)) for c in classes]
        ys = np.repeat(np.arange(total, dtype=np.int64), per_class)
        return np.concatenate(xs), ys

    train_x, train_y = draw(rng_train, per_class_train)
    test_x, test_y = draw(rng_test, per_class_test)
    held = tuple(range(num_classes, total))
    return Dataset(tuple(classes), train_x, train_y, test_x, test_y, held)


def make_descriptors(dataset: Dataset, params: ModelParams, eta: float, seed: int) -> Dataset:
    """Attach frozen descriptors whose encoded text feature matches the class mean's
    image feature up to Gaussian noise of scale ``eta`` in the embedding space.

    With ``eta = 0`` the frozen text feature of class c equals the frozen image
    feature of its mean exactly; growing ``eta`` degrades the zero-shot baseline.
    """
    if not eta >= 0:
        raise InvalidConfig("eta must be >= 0")
    cfg = params.config
    if dataset.d_in != cfg.d_in:
        raise InvalidConfig(f"dataset d_in {dataset.d_in} != model d_in {cfg.d_in}")
    rng = make_rng(seed, 4)
    # pseudo-inverse lifts an embedding-space target back to descriptor space;
    # with orthonormal rows this is W_txt.T and W_txt @ lift == I
    lift = np.linalg.pinv(params.W_txt)
    frozen = ModelParams(cfg, params.W_img, params.W_txt, {})
    out = []
    for c in dataset.classes:
        target = encode_image(frozen, c.mean) + eta * rng.standard_normal(cfg.d_embed)
        out.append(replace(c, descriptor=l2_normalize(lift @ target)))
    return replace(dataset, classes=tuple(out))


def _dump_array(a) -> list | None:
    return None if a is None else [float(x) for x in a]


def export_dataset(dataset: Dataset, path) -> None:
    header = {
        "format": "sitlab-dataset",
        "version": 1,
        "d_in": dataset.d_in,
        "n_train": int(len(dataset.train_y)),
        "n_test": int(len(dataset.test_y)),
        "held_out": list(dataset.held_out),
        "classes": [{"id": c.id, "mean": _dump_array(c.mean),
                     "descriptor": _dump_array(c.descriptor)} for c in dataset.classes],
    }
    lines = ["# " + json.dumps(header, separators=(",", ":"))]
    for X, Y in ((dataset.train_x, dataset.train_y), (dataset.test_x, dataset.test_y)):
        for x, y in zip(X, Y):
            lines.append(",".join([str(int(y))] + [repr(float(v)) for v in x]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty dataset file", line=1)
    if not lines[0].startswith("#"):
        raise ParseError("missing '#' JSON header", line=1)
    try:
        header = json.loads(lines[0][1:])
        d_in, n_train, n_test = int(header["d_in"]), int(header["n_train"]), int(header["n_test"])
        classes = tuple(
            ClassSpec(int(c["id"]), np.array(c["mean"], dtype=np.float64),
                      None if c["descriptor"] is None else np.array(c["descriptor"], dtype=np.float64))
            for c in header["classes"])
        held = tuple(int(h) for h in header["held_out"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad header: {exc}", line=1) from None

    rows = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(rows) != n_train + n_test:
        raise ParseError(f"expected {n_train + n_test} sample rows, found {len(rows)}",
                         line=len(lines))
    X = np.empty((len(rows), d_in))
    Y = np.empty(len(rows), dtype=np.int64)
    for k, (lineno, ln) in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != d_in + 1:
            raise ParseError(f"expected {d_in + 1} columns, got {len(parts)}", line=lineno)
        try:
            Y[k] = int(parts[0])
            X[k] = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not 0 <= Y[k] < len(classes):
            raise ParseError(f"class id {Y[k]} out of range", line=lineno)
    return Dataset(classes, X[:n_train], Y[:n_train], X[n_train:], Y[n_train:], held)
