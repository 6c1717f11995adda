"""
Three ways to cut a class stream into tasks
===========================================

CIL keeps every class inside one task. i-Blurry and Si-Blurry split classes
into disjoint ones (never leave home) and blurry ones (a few samples leak
into other tasks). Si-Blurry also randomizes how many classes each task gets.

Run: python3 demos/01_streams.py
"""

from collections import Counter

import numpy as np

from sitlab import generate_dataset, iter_batches, make_schedule, task_end_steps
from sitlab.streams import BLURRY

ds = generate_dataset(num_classes=20, held_out_count=5, per_class_train=100, per_class_test=20,
                      d_in=32, cluster_sigma=1.0, seed=1)
print(f"{len(ds.stream_classes)} streamed classes, held out {ds.held_out}")


def show(sch):
    print(f"\n--- {sch.regime}  {sch.params}")
    for t, ids in enumerate(sch.tasks):
        counts = Counter(int(c) for c in sch.sample_class[ids])
        home = sch.home_classes(t)
        visitors = sorted(set(counts) - set(home))
        tag = lambda c: f"{c}{'b' if sch.role[c] == BLURRY else 'd'}"
        print(f"task {t}: {len(ids):4d} samples | home {' '.join(tag(c) for c in home)}"
              f" | visitors {' '.join(map(str, visitors)) or '-'}")


# classical class-incremental split: 4 classes per task, nothing crosses a boundary
show(make_schedule(ds, "cil", T=5, seed=1))

# i-Blurry: every task hosts 2 disjoint + 2 blurry classes
show(make_schedule(ds, "iblurry", T=5, disjoint_fraction=0.5, blurry_level=10, seed=1))

# Si-Blurry: the reference stream. Task sizes vary and blurry classes show up early
sch = make_schedule(ds, "siblurry", T=5, disjoint_fraction=0.5, blurry_level=10, seed=1)
show(sch)

# a blurry class keeps ceil(0.9 * 100) = 90 samples at home and scatters 10
c = next(c for c, r in sch.role.items() if r == BLURRY)
where = Counter(int(t) for t, ids in enumerate(sch.tasks) for s in ids if sch.sample_class[s] == c)
print(f"\nblurry class {c}, home task {sch.home_task[c]}: samples per task {dict(sorted(where.items()))}")

# the learner only sees fixed-size batches; task ends are known to the evaluator alone
batches = list(iter_batches(sch, batch_size=16))
print(f"{len(batches)} batches of 16, last holds {len(batches[-1].sample_ids)}")
print("task end batches:", task_end_steps(sch, 16))

# first time each class appears in the stream
first = {}
for b in batches:
    for y in b.labels:
        first.setdefault(int(y), b.step)
print("first-appearance step per class:", dict(sorted(first.items(), key=lambda kv: kv[1])))
print("classes seen by the end of the first task:",
      sum(s <= task_end_steps(sch, 16)[0] for s in first.values()), "of", len(first))
print("mean step of first appearance, blurry vs disjoint:",
      np.mean([s for c, s in first.items() if sch.role[c] == BLURRY]).round(1),
      np.mean([s for c, s in first.items() if sch.role[c] != BLURRY]).round(1))
