"""Frozen linear dual encoder with parameter-efficient tuning.

Both paths are a frozen linear map followed by an optional trainable delta
and L2 normalization::

    h = W x + delta(x)          v = h / |h|

``lora``:     delta(x) = s B (A x), B zero-initialized.
``adapter``:  delta(x) = s U tanh(D W x), residual after the frozen map, U zero-initialized.

``s`` is ``pet_scale`` (LoRA's alpha / rank).

Either way the initial delta is exactly zero, so an untrained model makes the
same predictions as the frozen one (the zero-shot baseline).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyClassSet, InvalidConfig, ShapeMismatch
from .numerics import l2_normalize_rows, make_rng, softmax

PET_KINDS = ("lora", "adapter", "none")
PATHS = ("image", "text")


@dataclass(frozen=True)
class ModelConfig:
    d_in: int = 32
    d_desc: int = 32
    d_embed: int = 16
    pet_kind: str = "lora"
    pet_rank: int = 4
    adapter_down_dim: int = 64
    tune_image: bool = True
    tune_text: bool = True
    temperature: float = 0.07
    pet_scale: float = 1.0

    def __post_init__(self):
        for name in ("d_in", "d_desc", "d_embed", "pet_rank", "adapter_down_dim"):
            if int(getattr(self, name)) <= 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.pet_kind not in PET_KINDS:
            raise InvalidConfig(f"pet_kind must be one of {PET_KINDS}, got {self.pet_kind!r}")
        if self.pet_kind == "lora" and self.pet_rank > min(self.d_embed, self.d_in, self.d_desc):
            raise InvalidConfig("pet_rank exceeds min(d_embed, d_in, d_desc)")
        if not self.temperature > 0:
            raise InvalidConfig("temperature must be positive")
        if not self.pet_scale > 0:
            raise InvalidConfig("pet_scale must be positive")

    def tuned(self, path: str) -> bool:
        if self.pet_kind == "none":
            return False
        return self.tune_image if path == "image" else self.tune_text

    def input_dim(self, path: str) -> int:
        return self.d_in if path == "image" else self.d_desc


@dataclass
class ModelParams:
    config: ModelConfig
    W_img: np.ndarray
    W_txt: np.ndarray
    # trainable factors keyed "image.A", "text.B", "image.U", ...
    pet: dict[str, np.ndarray] = field(default_factory=dict)

    def frozen(self, path: str) -> np.ndarray:
        return self.W_img if path == "image" else self.W_txt

    def factors(self, path: str) -> dict[str, np.ndarray]:
        prefix = path + "."
        return {k[len(prefix):]: v for k, v in self.pet.items() if k.startswith(prefix)}

    def num_trainable(self) -> int:
        return int(sum(v.size for v in self.pet.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.W_img.copy(), self.W_txt.copy(),
                           {k: v.copy() for k, v in self.pet.items()})


def _orthonormal_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    g = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity so the draw is unique
    return q.T if rows <= cols else q


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    """Frozen weights with orthonormal rows plus zero-effect PET factors."""
    rng = make_rng(seed, 101)
    W_img = _orthonormal_rows(rng, config.d_embed, config.d_in)
    W_txt = _orthonormal_rows(rng, config.d_embed, config.d_desc)
    pet: dict[str, np.ndarray] = {}
    for path in PATHS:
        if not config.tuned(path):
            continue
        if config.pet_kind == "lora":
            d = config.input_dim(path)
            pet[f"{path}.A"] = rng.standard_normal((config.pet_rank, d)) / np.sqrt(d)
            pet[f"{path}.B"] = np.zeros((config.d_embed, config.pet_rank))
        else:
            a = config.adapter_down_dim
            pet[f"{path}.D"] = rng.standard_normal((a, config.d_embed)) / np.sqrt(config.d_embed)
            pet[f"{path}.U"] = np.zeros((config.d_embed, a))
    return ModelParams(config, W_img, W_txt, pet)


@dataclass
class PathCache:
    path: str
    X: np.ndarray
    H0: np.ndarray
    inner: np.ndarray | None  # A x for lora, tanh(D W x) for adapter
    V: np.ndarray
    norms: np.ndarray


def path_forward(params: ModelParams, path: str, X) -> PathCache:
    """Encode a batch of rows on one path, keeping what the backward pass needs."""
    cfg = params.config
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.input_dim(path):
        raise ShapeMismatch(f"{path} input: expected (*, {cfg.input_dim(path)}), got {X.shape}")
    W = params.frozen(path)
    H0 = X @ W.T
    H, inner = H0, None
    f = params.factors(path)
    if f:
        if cfg.pet_kind == "lora":
            inner = X @ f["A"].T
            H = H0 + cfg.pet_scale * (inner @ f["B"].T)
        else:
            inner = np.tanh(H0 @ f["D"].T)
            H = H0 + cfg.pet_scale * (inner @ f["U"].T)
    V, norms = l2_normalize_rows(H)
    return PathCache(path, X, H0, inner, V, norms)


def path_backward(params: ModelParams, cache: PathCache, dV: np.ndarray) -> dict[str, np.ndarray]:
    """Chain dL/dV through the normalization into this path's PET factors."""
    f = params.factors(cache.path)
    if not f:
        return {}
    V = cache.V
    dH = (dV - V * np.sum(V * dV, axis=1, keepdims=True)) / cache.norms[:, None]
    dH = params.config.pet_scale * dH  # every factor gradient sees the delta's scale once
    p = cache.path
    if params.config.pet_kind == "lora":
        return {
            f"{p}.A": (dH @ f["B"]).T @ cache.X,
            f"{p}.B": dH.T @ cache.inner,
        }
    S = cache.inner
    dZ = (dH @ f["U"]) * (1.0 - S * S)
    return {
        f"{p}.D": dZ.T @ cache.H0,
        f"{p}.U": dH.T @ S,
    }


def _encode(params: ModelParams, path: str, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return path_forward(params, path, x[None, :]).V[0]
    return path_forward(params, path, x).V


def encode_image(params: ModelParams, x) -> np.ndarray:
    """Unit image feature(s) for one input vector or a batch of rows."""
    return _encode(params, "image", x)


def encode_class(params: ModelParams, descriptor) -> np.ndarray:
    """Unit text feature(s) for one class descriptor or a batch of rows."""
    return _encode(params, "text", descriptor)


def logits(params: ModelParams, X, descriptors) -> np.ndarray:
    """Cosine similarities over temperature, shape (n_inputs, n_classes)."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or len(descriptors) == 0:
        raise EmptyClassSet("need at least one class descriptor")
    V = encode_image(params, np.atleast_2d(X))
    T = encode_class(params, descriptors)
    return V @ T.T / params.config.temperature


def predict(params: ModelParams, x, descriptors) -> np.ndarray:
    """Class probabilities for one input (softmax over cosine / temperature)."""
    x = np.asarray(x, dtype=np.float64)
    z = logits(params, x[None, :] if x.ndim == 1 else x, descriptors)
    p = softmax(z, axis=1)
    return p[0] if x.ndim == 1 else p


def save_checkpoint(params: ModelParams, path) -> None:
    """Write an ``.npz`` archive.

    Layout: ``config`` (JSON string of ModelConfig), ``frozen.W_img``,
    ``frozen.W_txt`` and one ``pet.<path>.<factor>`` array per trainable factor.
    """
    arrays = {
        "config": np.array(json.dumps(asdict(params.config), sort_keys=True)),
        "frozen.W_img": params.W_img,
        "frozen.W_txt": params.W_txt,
    }
    arrays.update({f"pet.{k}": v for k, v in sorted(params.pet.items())})
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> ModelParams:
    with np.load(Path(path), allow_pickle=False) as z:
        config = ModelConfig(**json.loads(str(z["config"])))
        pet = {k[4:]: z[k].copy() for k in z.files if k.startswith("pet.")}
        return ModelParams(config, z["frozen.W_img"].copy(), z["frozen.W_txt"].copy(), pet)
