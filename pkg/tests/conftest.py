import numpy as np
import pytest

from sitlab import generate_dataset, init_model, make_descriptors, ModelConfig

# criterion id -> (description, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        desc, ok, detail = ACCEPTANCE[k]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2}. {desc} -- {detail}")


@pytest.fixture
def small_world():
    """6 streamed + 2 held-out classes in a small model, descriptors attached."""
    cfg = ModelConfig(d_in=10, d_desc=10, d_embed=6, pet_rank=2, pet_scale=4.0)
    params = init_model(cfg, 7)
    ds = generate_dataset(6, 2, 30, 10, 10, 1.0, 7)
    ds = make_descriptors(ds, params, 0.2, 7)
    return ds, params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
