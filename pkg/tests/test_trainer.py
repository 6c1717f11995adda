import json
from dataclasses import replace

import numpy as np
import pytest

from sitlab import (ModelConfig, TrainConfig, a_auc, a_avg, a_last, adam_step, evaluate,
                    generate_dataset, init_model, make_descriptors, make_schedule, sgd_step,
                    train_online, zero_shot_eval)
from sitlab.errors import EmptyClassSet, EmptyCurve, EmptyInput, InvalidConfig, InvalidCurve, ShapeMismatch
from sitlab.metrics import new_class_bias
from sitlab.model import encode_class, logits
from sitlab.trainer import SeenClassRegistry

CFG = ModelConfig(d_in=10, d_desc=10, d_embed=6, pet_rank=2, pet_scale=4.0)
TRAIN = TrainConfig(lr=5e-3, batch_size=8, eval_period=40)


def small(seed=7, cfg=CFG, eta=0.3, regime="siblurry", T=3):
    params = init_model(cfg, seed)
    ds = make_descriptors(generate_dataset(6, 2, 30, 10, cfg.d_in, 1.0, seed), params, eta, seed)
    return ds, make_schedule(ds, regime, T, 0.5, 10, seed), params


# ------------------------------------------------------------------ optimizers

def test_adam_zero_gradient_is_noop():
    p = np.array([1.0, -2.0])
    adam_step(p, np.zeros(2), {}, 0.1)
    assert p.tolist() == [1.0, -2.0]


def test_adam_first_step_closed_form():
    # bias correction makes m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps)
    p = np.array([0.0])
    state = {}
    adam_step(p, np.array([1.0]), state, 0.1)
    assert abs(p[0] + 0.1 / (1.0 + 1e-8)) <= 1e-17
    assert state["t"] == 1


def test_sgd_exact():
    p = np.array([1.0, 2.0])
    sgd_step(p, np.array([0.5, -1.0]), 0.1)
    assert p.tolist() == [1.0 - 0.1 * 0.5, 2.0 + 0.1]


def test_optimizer_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step(np.zeros(2), np.zeros(3), {}, 0.1)
    with pytest.raises(ShapeMismatch):
        sgd_step(np.zeros(2), np.zeros((2, 1)), 0.1)


def test_train_config_validation():
    with pytest.raises(InvalidConfig):
        TrainConfig(strategy="both")
    with pytest.raises(InvalidConfig):
        TrainConfig(lr=-1.0)


# ------------------------------------------------------------------ evaluation

def test_evaluate_perfect_descriptors():
    ds, _, params = small(cfg=CFG, eta=0.0)
    ds0 = make_descriptors(generate_dataset(6, 0, 2, 5, 10, 0.0, 1), params, 0.0, 1)
    ids = list(range(6))
    acc, conf = evaluate(params, ids, ds0.descriptor_matrix(ids), ds0.test_x, ds0.test_y)
    assert acc == 1.0
    assert np.array_equal(conf, 5 * np.eye(6, dtype=int))


def test_evaluate_matches_brute_force():
    ds, _, params = small()
    ids = [3, 0, 5, 1]
    X, Y = ds.test_subset(ids)
    D = ds.descriptor_matrix(ids)
    acc, conf = evaluate(params, ids, D, X, Y)
    hits = 0
    brute = np.zeros((4, 4), dtype=int)
    for x, y in zip(X, Y):
        z = logits(params, x, D)[0]
        best = max(range(4), key=lambda j: (z[j], -ids[j]))
        brute[ids.index(int(y)), best] += 1
        hits += ids[best] == y
    assert acc == hits / len(Y)
    assert np.array_equal(conf, brute)


def test_evaluate_ties_go_to_lowest_id():
    params = init_model(CFG, 0)
    D = np.tile(np.arange(1.0, 11.0), (3, 1))
    X = np.random.default_rng(0).standard_normal((4, 10))
    _, conf = evaluate(params, [9, 4, 6], D, X, np.full(4, 9))
    assert conf[0].tolist() == [0, 4, 0]


def test_evaluate_random_descriptors_near_chance():
    accs = []
    for s in range(20):
        params = init_model(CFG, s)
        ds = generate_dataset(8, 0, 1, 25, 10, 1.0, s)
        D = np.random.default_rng(s).standard_normal((8, 10))
        accs.append(evaluate(params, list(range(8)), D, ds.test_x, ds.test_y)[0])
    assert abs(np.mean(accs) - 1 / 8) < 0.05


def test_evaluate_empty():
    with pytest.raises(EmptyClassSet):
        evaluate(init_model(CFG, 0), [], np.empty((0, 10)), np.empty((0, 10)), [])


# ------------------------------------------------------------------ metrics

def test_metric_examples():
    assert a_auc([(10, 0.7), (20, 0.7), (30, 0.7)]) == 0.7
    assert abs(a_auc([(5, 0.5), (10, 0.7), (15, 0.9)]) - 0.7) <= 1e-15
    assert a_avg([0.8]) == a_last([0.8]) == 0.8
    assert a_avg([1.0, 0.5]) == 0.75 and a_last([1.0, 0.5]) == 0.5
    with pytest.raises(InvalidCurve):
        a_auc([(10, 0.5), (25, 0.6)])
    with pytest.raises(EmptyCurve):
        a_auc([])
    with pytest.raises(EmptyInput):
        a_avg([])
    with pytest.raises(EmptyInput):
        a_last([])


def test_new_class_bias_by_hand():
    conf = np.array([[3, 0, 1], [1, 2, 1], [0, 0, 4]])
    # class 5 is the only final-task class; old rows hold 8 samples, 2 predicted as class 5
    assert new_class_bias(conf, [1, 2, 5], {1: 0, 2: 1, 5: 2}, 2) == 2 / 8


# ------------------------------------------------------------------ training loop

def test_zero_lr_keeps_params_and_baseline():
    ds, sch, params = small()
    art = train_online(ds, sch, params, replace(TRAIN, lr=0.0))
    assert all(np.array_equal(art.params.pet[k], params.pet[k]) for k in params.pet)
    ids = list(ds.stream_classes)
    X, Y = ds.test_subset(ids)
    base = evaluate(params, art.confusion_classes, ds.descriptor_matrix(art.confusion_classes), X, Y)[0]
    assert art.a_last == base
    assert art.zero_shot_before == art.zero_shot_after


def test_single_class_single_task_never_moves():
    params = init_model(CFG, 0)
    ds = make_descriptors(generate_dataset(2, 0, 20, 5, 10, 1.0, 0), params, 0.3, 0)
    sch = make_schedule(ds, "cil", 2, seed=0)
    one = replace(sch, tasks=sch.tasks[:1])
    art = train_online(ds, one, params, TRAIN)
    assert all(np.array_equal(art.params.pet[k], params.pet[k]) for k in params.pet)
    assert art.ledger.bucket_total("positive") == 0.0


def test_single_pass_touches():
    ds, sch, params = small()
    art = train_online(ds, sch, params, TRAIN)
    scheduled = sch.order()
    assert np.all(art.sample_touches[scheduled] == TRAIN.iterations_per_batch)
    mask = np.ones(len(ds.train_y), bool)
    mask[scheduled] = False
    assert np.all(art.sample_touches[mask] == 0)


def test_deterministic():
    ds, sch, params = small()
    a = train_online(ds, sch, params, TRAIN)
    b = train_online(ds, sch, params, TRAIN)
    assert a.metrics() == b.metrics() and a.curve == b.curve
    assert all(np.array_equal(a.params.pet[k], b.params.pet[k]) for k in params.pet)


def test_input_params_not_mutated():
    ds, sch, params = small()
    before = {k: v.copy() for k, v in params.pet.items()}
    train_online(ds, sch, params, TRAIN)
    assert all(np.array_equal(before[k], params.pet[k]) for k in before)


def test_untuned_text_path_frozen():
    cfg = replace(CFG, tune_text=False)
    ds, sch, params = small(cfg=cfg)
    art = train_online(ds, sch, params, TRAIN)
    assert "text.A" not in art.params.pet
    D = ds.descriptor_matrix(range(ds.num_classes))
    assert np.array_equal(encode_class(art.params, D), encode_class(params, D))
    assert art.zero_shot_before == zero_shot_eval(params, ds)


def test_untuned_image_path_frozen():
    ds, sch, params = small(cfg=replace(CFG, tune_image=False))
    art = train_online(ds, sch, params, TRAIN)
    assert not any(k.startswith("image.") for k in art.params.pet)
    assert any(not np.array_equal(art.params.pet[k], params.pet[k]) for k in params.pet)


def test_no_pet_zero_shot_unchanged():
    ds, sch, params = small(cfg=replace(CFG, pet_kind="none"))
    art = train_online(ds, sch, params, TRAIN)
    assert art.zero_shot_before == art.zero_shot_after


def test_first_batch_sit_and_ait_agree():
    ds, sch, params = small()
    first = np.asarray(sch.order()[:TRAIN.batch_size])
    one = replace(sch, tasks=(first,))
    s = train_online(ds, one, params, replace(TRAIN, strategy="sit"))
    a = train_online(ds, one, params, replace(TRAIN, strategy="ait"))
    for k in params.pet:
        np.testing.assert_allclose(s.params.pet[k], a.params.pet[k], rtol=0, atol=1e-15)


def test_curve_and_task_points():
    ds, sch, params = small()
    art = train_online(ds, sch, params, TRAIN)
    n = sch.num_samples
    assert [x for x, _ in art.curve] == list(range(40, n + 1, 40))
    assert len(art.task_accuracies) == 3
    assert art.a_avg == pytest.approx(np.mean(art.task_accuracies), abs=1e-15)
    assert art.a_last == art.task_accuracies[-1]


def test_registry_is_append_only():
    r = SeenClassRegistry()
    assert r.observe([3, 1, 3], 0) == [3, 1]
    assert r.observe([1, 2], 1) == [2]
    assert r.ids == [3, 1, 2] and 2 in r and len(r) == 3


def test_artifacts_saved(tmp_path):
    ds, sch, params = small()
    art = train_online(ds, sch, params, TRAIN)
    art.save(tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"metrics.json", "curve.csv", "tasks.csv", "confusion.csv", "zero_shot.csv",
            "ledger.csv", "checkpoint.npz"} <= names
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert doc["metrics"]["a_last"] == art.a_last


def test_published_defaults():
    # LoRA rank 4, adapter down-projection 64, Adam at 5e-4 with 3 iterations per batch
    from sitlab.reference import MODEL, TRAIN as REF
    assert ModelConfig().pet_rank == MODEL.pet_rank == 4
    assert ModelConfig().adapter_down_dim == 64
    assert (REF.optimizer, REF.lr, REF.iterations_per_batch) == ("adam", 5e-4, 3)
    assert TrainConfig().lr == 5e-4 and TrainConfig().iterations_per_batch == 3
