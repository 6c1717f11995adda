import math
import time
from collections import Counter

import numpy as np
import pytest

from sitlab import generate_dataset, iter_batches, make_schedule, task_end_steps
from sitlab.errors import InvalidConfig
from sitlab.streams import (BLURRY, DISJOINT, export_schedule, make_cil_schedule,
                            make_i_blurry_schedule, make_si_blurry_schedule)


def world(k, per=10, held=0, seed=0):
    return generate_dataset(k, held, per, 1, 3, 1.0, seed)


def check_schedule(ds, sch, blurry_level):
    """Independent invariant checker; returns a list of violations."""
    bad = []
    streamed = Counter(int(s) for t in sch.tasks for s in t)
    expected = Counter(int(i) for c in ds.stream_classes for i in np.flatnonzero(ds.train_y == c))
    if streamed != expected:
        bad.append("sample multiset differs")
    held = set(ds.held_out)
    where: dict[int, Counter] = {}
    for t, ids in enumerate(sch.tasks):
        for s in ids:
            c = int(ds.train_y[s])
            if c in held:
                bad.append(f"held-out class {c} streamed")
            where.setdefault(c, Counter())[t] += 1
    for c, tasks in where.items():
        n = sum(tasks.values())
        out = n - tasks[sch.home_task[c]]
        if sch.role[c] == DISJOINT:
            if len(tasks) != 1:
                bad.append(f"disjoint class {c} in tasks {sorted(tasks)}")
        else:
            want = n - math.ceil((1 - blurry_level / 100) * n) if sch.num_tasks > 1 else 0
            if out != want:
                bad.append(f"blurry class {c}: leaked {out}, expected {want}")
    return bad


def test_cil_hundred_classes_ten_tasks():
    ds = world(100, per=2)
    sch = make_cil_schedule(ds, 10, 0)
    assert [len(sch.home_classes(t)) for t in range(10)] == [10] * 10
    assert all(len(sch.task_classes(t)) == 10 for t in range(10))
    assert check_schedule(ds, sch, 0) == []


def test_cil_single_task_is_joint():
    ds = world(6)
    sch = make_cil_schedule(ds, 1, 0)
    assert sch.task_classes(0) == set(range(6))


def test_cil_remainder_to_earliest():
    sch = make_cil_schedule(world(7), 3, 0)
    assert [len(sch.home_classes(t)) for t in range(3)] == [3, 2, 2]


def test_cil_too_many_tasks():
    with pytest.raises(InvalidConfig):
        make_cil_schedule(world(3), 4, 0)


def test_si_blurry_role_counts():
    sch = make_si_blurry_schedule(world(10), 3, 0.5, 10, 4)
    roles = Counter(sch.role.values())
    assert roles == {DISJOINT: 5, BLURRY: 5}


def test_si_blurry_no_leak_when_m_zero():
    ds = world(10)
    sch = make_si_blurry_schedule(ds, 4, 0.3, 0, 2)
    for c in ds.stream_classes:
        homes = {t for t in range(4) if c in sch.task_classes(t)}
        assert homes == {sch.home_task[c]}


def test_reference_schedule_passes_checker():
    ds = generate_dataset(20, 5, 100, 20, 32, 1.0, 1)
    sch = make_schedule(ds, "siblurry", 5, 0.5, 10, 1)
    assert check_schedule(ds, sch, 10) == []
    # every task introduces at least one home class
    assert all(sch.home_classes(t) for t in range(5))
    # 10 of 100 samples leave home for each blurry class
    assert sum(r == BLURRY for r in sch.role.values()) == 10


def test_i_blurry_even_split():
    sch = make_i_blurry_schedule(world(20), 5, 0.5, 10, 0)
    for t in range(5):
        kinds = Counter(sch.role[c] for c in sch.home_classes(t))
        assert kinds == {DISJOINT: 2, BLURRY: 2}


def test_i_blurry_all_disjoint_is_cil_shaped():
    ds = world(12)
    sch = make_i_blurry_schedule(ds, 4, 1.0, 10, 0)
    assert set(sch.role.values()) == {DISJOINT}
    assert [len(sch.home_classes(t)) for t in range(4)] == [3] * 4
    assert check_schedule(ds, sch, 10) == []


def test_i_blurry_ratio_constant_over_seeds():
    ds = world(20)
    for seed in range(100):
        sch = make_i_blurry_schedule(ds, 4, 0.4, 20, seed)
        counts = {(Counter(sch.role[c] for c in sch.home_classes(t))[DISJOINT],
                   Counter(sch.role[c] for c in sch.home_classes(t))[BLURRY]) for t in range(4)}
        assert counts == {(2, 3)}


@pytest.mark.parametrize("args", [(2, 1.5, 10), (2, -0.1, 10), (2, 0.5, 100), (1, 0.5, 10)])
def test_blurry_invalid(args):
    T, frac, m = args
    with pytest.raises(InvalidConfig):
        make_si_blurry_schedule(world(5), T, frac, m, 0)


def test_unknown_regime():
    with pytest.raises(InvalidConfig):
        make_schedule(world(4), "zigzag", 2)


def test_random_schedules_satisfy_invariants():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for i in range(1000):
        regime = ("cil", "siblurry", "iblurry")[i % 3]
        k = int(rng.integers(2, 16))
        ds = generate_dataset(k, int(rng.integers(0, 3)), int(rng.integers(1, 25)), 1, 2, 1.0, i)
        T = int(rng.integers(1 if regime == "cil" else 2, min(k, 6) + 1))
        frac = float(rng.choice([0.0, 0.25, 0.5, 1.0, rng.random()]))
        m = float(rng.choice([0, 10, 30, 50, 99]))
        sch = make_schedule(ds, regime, T, frac, m, seed=i)
        eff_m = 0 if regime == "cil" else m
        assert check_schedule(ds, sch, eff_m) == [], (regime, i)
        if regime != "cil" and frac == 1.0:
            assert set(sch.role.values()) == {DISJOINT}
            assert all(len(sch.task_classes(t) - set(sch.home_classes(t))) == 0 for t in range(T))
    assert time.perf_counter() - t0 < 60


def test_batches_count_and_multiset():
    ds = generate_dataset(20, 0, 100, 1, 2, 1.0, 0)
    sch = make_schedule(ds, "siblurry", 5, 0.5, 10, 0)
    batches = list(iter_batches(sch, 16))
    assert len(batches) == 125
    assert batches[-1].samples_seen == 2000
    assert all(len(b.sample_ids) == 16 for b in batches)
    got = Counter(int(s) for b in batches for s in b.sample_ids)
    assert got == Counter(int(s) for t in sch.tasks for s in t)
    assert [b.step for b in batches] == list(range(125))


def test_single_batch_when_large():
    ds = world(3)
    sch = make_cil_schedule(ds, 1, 0)
    batches = list(iter_batches(sch, 1000))
    assert len(batches) == 1 and len(batches[0].sample_ids) == 30


def test_task_leftovers_merge_into_next_task():
    ds = world(3, per=5)
    sch = make_cil_schedule(ds, 3, 0)  # tasks of 5 samples each
    sizes = [len(b.sample_ids) for b in iter_batches(sch, 4)]
    assert sizes == [4, 4, 4, 3]
    assert task_end_steps(sch, 4) == [1, 2, 3]


def test_reshuffle_stays_within_tasks():
    ds = world(6)
    sch = make_cil_schedule(ds, 3, 0)
    a = np.concatenate([b.sample_ids for b in iter_batches(sch, 7, seed=5)])
    off = 0
    for t in sch.tasks:
        assert sorted(a[off:off + len(t)]) == sorted(t)
        off += len(t)
    assert not np.array_equal(a, sch.order())


def test_batch_size_validation():
    with pytest.raises(InvalidConfig):
        list(iter_batches(make_cil_schedule(world(2), 1, 0), 0))


def test_export_schedule(tmp_path):
    ds = world(4, per=3)
    sch = make_si_blurry_schedule(ds, 2, 0.5, 34, 0)
    p = tmp_path / "s.csv"
    export_schedule(sch, p)
    rows = p.read_text().splitlines()
    assert rows[0] == "step,sample_id,class_id,role,home_task,task"
    assert len(rows) == 13
