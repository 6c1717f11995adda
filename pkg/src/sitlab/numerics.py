"""Small numeric kernels shared by every other module.

All arrays are float64. Randomness comes from numpy's Philox generator, a
counter-based bit generator whose output for a given key is fixed across
platforms and numpy releases, so schedules and weights replay exactly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import EmptyInput, ShapeMismatch, ZeroVector

EPS = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and an optional stream path.

    ``make_rng(s, 1)`` and ``make_rng(s, 2)`` are independent streams; use
    distinct stream ids instead of sharing one generator between consumers.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def as_vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeMismatch(f"expected a vector, got shape {v.shape}")
    return v


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite values in {what}")
    return a


def check_shape(a: np.ndarray, shape: tuple, what: str = "array") -> None:
    if a.shape != tuple(shape):
        raise ShapeMismatch(f"{what}: expected shape {tuple(shape)}, got {a.shape}")


def l2_normalize(v) -> np.ndarray:
    v = as_vec(v)
    n = np.linalg.norm(v)
    if not n > EPS:
        raise ZeroVector(f"cannot normalize vector with norm {n:g}")
    return check_finite(v / n)


def l2_normalize_rows(m) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise normalization; returns (unit rows, row norms)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {m.shape}")
    norms = np.linalg.norm(m, axis=1)
    if np.any(~(norms > EPS)):
        raise ZeroVector(f"row {int(np.argmin(norms))} has norm {norms.min():g}")
    return m / norms[:, None], norms


def softmax(z, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[axis] == 0:
        raise EmptyInput("softmax of an empty vector")
    check_finite(z, "softmax input")
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[axis] == 0:
        raise EmptyInput("log_softmax of an empty vector")
    s = z - z.max(axis=axis, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=axis, keepdims=True))


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any array shape)."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def relative_error(a, b, floor: float = 1e-8) -> float:
    """max |a-b| scaled by the larger of the two max-norms (or ``floor``)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / scale)
