"""Online training loop, optimizers, anytime evaluation and run artifacts."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .errors import ConfigMismatch, EmptyClassSet, InvalidConfig, ShapeMismatch
from .metrics import a_auc, a_avg, a_last, new_class_bias
from .model import ModelParams, logits, save_checkpoint
from .objective import GradientLedger, ait_loss, record_ledger, sit_loss
from .streams import StreamSchedule, iter_batches, task_end_steps

STRATEGIES = ("sit", "ait")
OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    strategy: str = "sit"
    optimizer: str = "adam"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iterations_per_batch: int = 3
    batch_size: int = 16
    eval_period: int = 80
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidConfig(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidConfig(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lr < 0:
            raise InvalidConfig("lr must be >= 0")
        for name in ("iterations_per_batch", "batch_size", "eval_period"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")


def adam_step(param: np.ndarray, grad: np.ndarray, state: dict, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """One bias-corrected Adam update, in place on ``param`` and ``state``.

    ``state`` starts empty and gains ``m``, ``v`` and ``t`` on the first call.
    """
    if param.shape != grad.shape:
        raise ShapeMismatch(f"param {param.shape} vs grad {grad.shape}")
    if not state:
        state.update(m=np.zeros_like(param), v=np.zeros_like(param), t=0)
    state["t"] += 1
    t = state["t"]
    state["m"] = beta1 * state["m"] + (1.0 - beta1) * grad
    state["v"] = beta2 * state["v"] + (1.0 - beta2) * grad * grad
    m_hat = state["m"] / (1.0 - beta1 ** t)
    v_hat = state["v"] / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if param.shape != grad.shape:
        raise ShapeMismatch(f"param {param.shape} vs grad {grad.shape}")
    param -= lr * grad
    return param


class Optimizer:
    """Applies Adam or SGD to a dict of named arrays; Adam state is created lazily."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.state: dict[str, dict] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        for name in sorted(grads):
            if c.optimizer == "adam":
                adam_step(params[name], grads[name], self.state.setdefault(name, {}),
                          c.lr, c.beta1, c.beta2, c.eps)
            else:
                sgd_step(params[name], grads[name], c.lr)


class SeenClassRegistry:
    """Append-only record of classes in first-occurrence order."""

    def __init__(self):
        self.first_seen: dict[int, int] = {}

    def observe(self, labels, step: int) -> list[int]:
        new = []
        for y in labels:
            y = int(y)
            if y not in self.first_seen:
                self.first_seen[y] = step
                new.append(y)
        return new

    @property
    def ids(self) -> list[int]:
        return list(self.first_seen)

    def __len__(self):
        return len(self.first_seen)

    def __contains__(self, c):
        return int(c) in self.first_seen


def evaluate(params: ModelParams, class_ids, descriptors, test_x, test_y) -> tuple[float, np.ndarray]:
    """Top-1 accuracy and confusion matrix (rows true, columns predicted, both in
    ``class_ids`` order). Exact ties go to the lowest class id."""
    class_ids = np.asarray(class_ids, dtype=np.int64)
    if len(class_ids) == 0:
        raise EmptyClassSet("evaluate needs at least one class")
    test_y = np.asarray(test_y, dtype=np.int64)
    col = {int(c): j for j, c in enumerate(class_ids)}
    if any(int(y) not in col for y in test_y):
        raise ValueError("test sample with a class outside class_ids")
    K = len(class_ids)
    conf = np.zeros((K, K), dtype=np.int64)
    if len(test_y) == 0:
        return 0.0, conf
    Z = logits(params, test_x, descriptors)
    # stable argmax after sorting columns by id gives the lowest id among ties
    by_id = np.argsort(class_ids, kind="stable")
    pred_cols = by_id[np.argmax(Z[:, by_id], axis=1)]
    true_cols = np.array([col[int(y)] for y in test_y])
    np.add.at(conf, (true_cols, pred_cols), 1)
    return float(np.trace(conf) / len(test_y)), conf


def zero_shot_eval(params: ModelParams, dataset: Dataset, class_ids=None) -> float:
    """Accuracy on held-out classes, predicting among held-out classes only."""
    ids = list(dataset.held_out if class_ids is None else class_ids)
    if not ids:
        raise EmptyClassSet("no held-out classes")
    X, Y = dataset.test_subset(ids)
    return evaluate(params, ids, dataset.descriptor_matrix(ids), X, Y)[0]


@dataclass
class RunArtifacts:
    config: dict
    curve: list[tuple[int, float]]
    task_accuracies: list[float]
    task_end_steps: list[int]
    a_last: float
    a_avg: float
    a_auc: float | None
    confusion: np.ndarray
    confusion_classes: list[int]
    zero_shot_before: float | None
    zero_shot_after: float | None
    ledger: GradientLedger
    params: ModelParams
    role: dict[int, str]
    home_task: dict[int, int]
    sample_touches: np.ndarray = field(repr=False, default=None)

    @property
    def new_class_bias(self) -> float:
        final = max(self.home_task.values())
        return new_class_bias(self.confusion, self.confusion_classes, self.home_task, final)

    def metrics(self) -> dict:
        return {
            "a_auc": self.a_auc,
            "a_avg": self.a_avg,
            "a_last": self.a_last,
            "new_class_bias": self.new_class_bias,
            "zero_shot_before": self.zero_shot_before,
            "zero_shot_after": self.zero_shot_after,
        }

    def save(self, outdir) -> Path:
        """Write metrics.json, curve.csv, tasks.csv, confusion.csv, zero_shot.csv,
        ledger.csv and checkpoint.npz into ``outdir``."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"config": self.config, "metrics": self.metrics(),
               "seen_classes": self.confusion_classes,
               "role": {str(c): r for c, r in sorted(self.role.items())},
               "home_task": {str(c): t for c, t in sorted(self.home_task.items())}}
        (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _write_csv(out / "curve.csv", ["samples_seen", "accuracy"],
                   [(x, repr(y)) for x, y in self.curve])
        _write_csv(out / "tasks.csv", ["task", "end_step", "accuracy"],
                   [(t, s, repr(a)) for t, (s, a) in
                    enumerate(zip(self.task_end_steps, self.task_accuracies))])
        _write_csv(out / "confusion.csv",
                   ["class_id", "role", "home_task"] + [f"pred_{c}" for c in self.confusion_classes],
                   [[c, self.role[c], self.home_task[c], *row.tolist()]
                    for c, row in zip(self.confusion_classes, self.confusion)])
        _write_csv(out / "zero_shot.csv", ["phase", "accuracy"],
                   [(p, repr(a)) for p, a in (("before", self.zero_shot_before),
                                              ("after", self.zero_shot_after)) if a is not None])
        self.ledger.export_csv(out / "ledger.csv")
        save_checkpoint(self.params, out / "checkpoint.npz")
        return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def train_online(dataset: Dataset, schedule: StreamSchedule, params: ModelParams,
                 cfg: TrainConfig, *, copy_params: bool = True) -> RunArtifacts:
    """Single pass over the stream: each batch is trained on for
    ``iterations_per_batch`` steps and then never revisited.

    Evaluation on the seen classes' test split happens whenever the sample
    count crosses a multiple of ``eval_period`` (recorded at the nominal
    multiple) and after each task's last batch. The learner itself never sees
    task boundaries.
    """
    if copy_params:
        params = params.copy()
    stream = [int(c) for c in dataset.stream_classes]
    if not dataset.has_descriptors():
        raise ConfigMismatch("dataset has no class descriptors")
    desc = {c: dataset.classes[c].descriptor for c in range(dataset.num_classes)}

    zs_before = zero_shot_eval(params, dataset) if dataset.held_out else None
    registry = SeenClassRegistry()
    ledger = GradientLedger()
    opt = Optimizer(cfg)
    ends = task_end_steps(schedule, cfg.batch_size)
    end_set = set(ends)
    touches = np.zeros(len(dataset.train_y), dtype=np.int64)
    curve: list[tuple[int, float]] = []
    at_end: dict[int, float] = {}
    next_eval = cfg.eval_period

    def eval_seen():
        ids = registry.ids
        X, Y = dataset.test_subset(ids)
        return evaluate(params, ids, dataset.descriptor_matrix(ids), X, Y)

    for batch in iter_batches(schedule, cfg.batch_size):
        for c in registry.observe(batch.labels, batch.step):
            if c not in desc or c not in stream:
                raise ConfigMismatch(f"batch class {c} is not a streamable class with a descriptor")
            ledger.occurrence.setdefault(c, len(ledger.occurrence))
        X = dataset.train_x[batch.sample_ids]
        for _ in range(cfg.iterations_per_batch):
            if cfg.strategy == "sit":
                out = sit_loss(params, X, batch.labels, desc)
            else:
                out = ait_loss(params, X, batch.labels, {c: desc[c] for c in registry.ids})
            record_ledger(out, batch.step, ledger)
            if cfg.lr > 0:
                opt.step(params.pet, out.grads)
            touches[batch.sample_ids] += 1
        while batch.samples_seen >= next_eval:
            curve.append((next_eval, eval_seen()[0]))
            next_eval += cfg.eval_period
        if batch.step in end_set:
            at_end[batch.step] = eval_seen()[0]

    task_acc = [at_end[s] for s in ends]
    ids = registry.ids
    X, Y = dataset.test_subset(ids)
    final_acc, conf = evaluate(params, ids, dataset.descriptor_matrix(ids), X, Y)
    zs_after = zero_shot_eval(params, dataset) if dataset.held_out else None
    return RunArtifacts(
        config={"train": asdict(cfg), "model": asdict(params.config),
                "stream": {"regime": schedule.regime, **schedule.params}},
        curve=curve,
        task_accuracies=task_acc,
        task_end_steps=ends,
        a_last=a_last(task_acc),
        a_avg=a_avg(task_acc),
        a_auc=a_auc(curve) if curve else None,
        confusion=conf,
        confusion_classes=ids,
        zero_shot_before=zs_before,
        zero_shot_after=zs_after,
        ledger=ledger,
        params=params,
        role=dict(schedule.role),
        home_task=dict(schedule.home_task),
        sample_touches=touches,
    )
