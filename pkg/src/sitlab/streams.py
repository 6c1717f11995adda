"""Task schedules (CIL, i-Blurry, Si-Blurry) and the single-pass batch stream.

A schedule is a list of tasks, each an ordered array of training-sample ids
(row indices into ``Dataset.train_x``). Every class has a home task and a role:
``disjoint`` classes keep all their samples at home, ``blurry`` classes leak
``n_c - ceil((1 - M/100) n_c)`` samples uniformly at random to the other tasks.

Task boundaries stay on the harness side: :func:`iter_batches` yields plain
batches, and :func:`task_end_steps` tells the evaluator where tasks finish.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .datagen import Dataset
from .errors import InvalidConfig
from .numerics import make_rng

DISJOINT = "disjoint"
BLURRY = "blurry"
REGIMES = ("cil", "iblurry", "siblurry")


@dataclass(frozen=True)
class StreamSchedule:
    regime: str
    tasks: tuple[np.ndarray, ...]
    sample_class: np.ndarray  # train_y, kept so batches can be labeled without the dataset
    role: dict[int, str]
    home_task: dict[int, int]
    params: dict = field(default_factory=dict)

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def num_samples(self) -> int:
        return int(sum(len(t) for t in self.tasks))

    def order(self) -> np.ndarray:
        return np.concatenate(self.tasks) if self.tasks else np.empty(0, dtype=np.int64)

    def task_classes(self, t: int) -> set[int]:
        return set(int(c) for c in np.unique(self.sample_class[self.tasks[t]]))

    def home_classes(self, t: int) -> list[int]:
        return sorted(c for c, h in self.home_task.items() if h == t)


@dataclass(frozen=True)
class StreamBatch:
    sample_ids: np.ndarray
    labels: np.ndarray
    step: int
    samples_seen: int  # cumulative, including this batch


def home_count(n: int, blurry_level: float) -> int:
    """Samples a blurry class keeps in its home task: ceil((1 - M/100) * n)."""
    m = Fraction(str(blurry_level))
    return n - math.floor(m * n / 100)


def _check_common(dataset: Dataset, T: int) -> list[int]:
    classes = list(dataset.stream_classes)
    if T < 1:
        raise InvalidConfig("T must be >= 1")
    if not classes:
        raise InvalidConfig("dataset has no streamable classes")
    return classes


def _split_sizes(n: int, parts: int) -> list[int]:
    base, rem = divmod(n, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def _build(dataset, regime, T, role, home, blurry_level, rng, params) -> StreamSchedule:
    buckets: list[list[int]] = [[] for _ in range(T)]
    for c in sorted(role):
        ids = dataset.train_ids(c)
        if role[c] == BLURRY and blurry_level > 0 and T > 1:
            ids = rng.permutation(ids)
            keep = home_count(len(ids), blurry_level)
            buckets[home[c]].extend(ids[:keep].tolist())
            others = [t for t in range(T) if t != home[c]]
            dest = rng.integers(0, len(others), size=len(ids) - keep)
            for sid, d in zip(ids[keep:], dest):
                buckets[others[d]].append(int(sid))
        else:
            buckets[home[c]].extend(ids.tolist())
    tasks = tuple(rng.permutation(np.array(b, dtype=np.int64)) for b in buckets)
    return StreamSchedule(regime, tasks, dataset.train_y.copy(), dict(role), dict(home), params)


def make_cil_schedule(dataset: Dataset, T: int, seed: int) -> StreamSchedule:
    classes = _check_common(dataset, T)
    if T > len(classes):
        raise InvalidConfig(f"T={T} exceeds class count {len(classes)}")
    rng = make_rng(seed, 10)
    order = [classes[i] for i in rng.permutation(len(classes))]
    home, start = {}, 0
    for t, size in enumerate(_split_sizes(len(order), T)):
        for c in order[start:start + size]:
            home[c] = t
        start += size
    role = {c: DISJOINT for c in classes}
    params = {"T": T, "disjoint_fraction": 1.0, "blurry_level": 0, "seed": seed}
    return _build(dataset, "cil", T, role, home, 0, rng, params)


def _check_blurry(dataset, T, disjoint_fraction, blurry_level):
    classes = _check_common(dataset, T)
    if T < 2:
        raise InvalidConfig("blurry regimes need T >= 2")
    if not 0.0 <= disjoint_fraction <= 1.0:
        raise InvalidConfig("disjoint_fraction must be in [0, 1]")
    if not 0 <= blurry_level < 100:
        raise InvalidConfig("blurry_level M must be in [0, 100)")
    return classes


def _pick_roles(classes, disjoint_fraction, rng) -> dict[int, str]:
    n_disjoint = int(math.floor(disjoint_fraction * len(classes) + 1e-9))
    perm = rng.permutation(len(classes))
    chosen = {classes[i] for i in perm[:n_disjoint]}
    return {c: DISJOINT if c in chosen else BLURRY for c in classes}


def make_si_blurry_schedule(dataset: Dataset, T: int, disjoint_fraction: float,
                            blurry_level: float, seed: int) -> StreamSchedule:
    """Random roles and random home tasks; tasks differ in size and mix."""
    classes = _check_blurry(dataset, T, disjoint_fraction, blurry_level)
    rng = make_rng(seed, 20)
    role = _pick_roles(classes, disjoint_fraction, rng)
    need_all = len(classes) >= T
    while True:
        draw = rng.integers(0, T, size=len(classes))
        if not need_all or len(np.unique(draw)) == T:
            break
    home = {c: int(t) for c, t in zip(classes, draw)}
    params = {"T": T, "disjoint_fraction": disjoint_fraction,
              "blurry_level": blurry_level, "seed": seed}
    return _build(dataset, "siblurry", T, role, home, blurry_level, rng, params)


def make_i_blurry_schedule(dataset: Dataset, T: int, disjoint_fraction: float,
                           blurry_level: float, seed: int) -> StreamSchedule:
    """Same disjoint/blurry class split, but spread evenly: every task is home to
    the same number of each kind (remainders to the earliest tasks)."""
    classes = _check_blurry(dataset, T, disjoint_fraction, blurry_level)
    rng = make_rng(seed, 30)
    role = _pick_roles(classes, disjoint_fraction, rng)
    home = {}
    for kind in (DISJOINT, BLURRY):
        group = [c for c in classes if role[c] == kind]
        group = [group[i] for i in rng.permutation(len(group))]
        start = 0
        for t, size in enumerate(_split_sizes(len(group), T)):
            for c in group[start:start + size]:
                home[c] = t
            start += size
    params = {"T": T, "disjoint_fraction": disjoint_fraction,
              "blurry_level": blurry_level, "seed": seed}
    return _build(dataset, "iblurry", T, role, home, blurry_level, rng, params)


def make_schedule(dataset: Dataset, regime: str, T: int, disjoint_fraction: float = 0.5,
                  blurry_level: float = 10, seed: int = 0) -> StreamSchedule:
    if regime == "cil":
        return make_cil_schedule(dataset, T, seed)
    if regime == "siblurry":
        return make_si_blurry_schedule(dataset, T, disjoint_fraction, blurry_level, seed)
    if regime == "iblurry":
        return make_i_blurry_schedule(dataset, T, disjoint_fraction, blurry_level, seed)
    raise InvalidConfig(f"unknown regime {regime!r}; expected one of {REGIMES}")


def _stream_order(schedule: StreamSchedule, seed: int | None) -> np.ndarray:
    if seed is None:
        return schedule.order()
    rng = make_rng(seed, 40)
    return np.concatenate([rng.permutation(t) for t in schedule.tasks])


def iter_batches(schedule: StreamSchedule, batch_size: int,
                 seed: int | None = None) -> Iterator[StreamBatch]:
    """Fixed-size batches over the task-concatenated stream.

    A task's leftover samples are merged into the next task's first batch, so
    only the very last batch can be short. ``seed`` optionally reshuffles
    samples within each task (never across tasks).
    """
    if batch_size < 1:
        raise InvalidConfig("batch_size must be >= 1")
    order = _stream_order(schedule, seed)
    for step, start in enumerate(range(0, len(order), batch_size)):
        ids = order[start:start + batch_size]
        yield StreamBatch(ids, schedule.sample_class[ids], step, start + len(ids))


def task_end_steps(schedule: StreamSchedule, batch_size: int) -> list[int]:
    """Index of the batch holding each task's last sample (harness use only).

    Empty tasks reuse the previous task's end step.
    """
    ends, seen = [], 0
    for t in schedule.tasks:
        seen += len(t)
        ends.append(max(seen - 1, 0) // batch_size)
    return ends


def export_schedule(schedule: StreamSchedule, path) -> None:
    """CSV with one row per streamed sample: step, sample_id, class_id, role, home_task, task."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "sample_id", "class_id", "role", "home_task", "task"])
        step = 0
        for t, ids in enumerate(schedule.tasks):
            for sid in ids:
                c = int(schedule.sample_class[sid])
                w.writerow([step, int(sid), c, schedule.role[c], schedule.home_task[c], t])
                step += 1
