"""Minimal differentiable numerics.

Linear maps, a 2-layer ReLU perceptron with hidden dropout, the
prototype-distance softmax loss with analytic gradients, and the Adam
optimizer with decoupled weight decay. Everything is float64 numpy and
deterministic given explicit seeds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearMap",
    "Mlp2",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "relu",
    "softmax",
    "softmax_nll",
    "proto_logits",
    "proto_nll",
    "linear_apply",
    "forward_backward_linear",
    "mlp_forward",
    "mlp_backward",
    "derive_rng",
    "derive_seed",
    "save_params",
    "load_params",
    "ParamsFormatError",
]

Array = np.ndarray

PARAMS_MAGIC = b"PAL1"
PARAMS_VERSION = 1


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic child seed for (seed, key path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class LinearMap:
    """Affine map y = x W^T + b with weight (out, in) and optional bias."""

    weight: Array
    bias: Array | None = None

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
        if not np.all(np.isfinite(self.weight)):
            raise ValueError("non-finite entries in weight")
        if self.bias is not None and not np.all(np.isfinite(self.bias)):
            raise ValueError("non-finite entries in bias")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @staticmethod
    def init_uniform(out_dim: int, in_dim: int, rng: np.random.Generator,
                     bias: bool = True) -> "LinearMap":
        """Weights ~ Uniform(-1/sqrt(in), +1/sqrt(in)), bias zero."""
        bound = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        b = np.zeros(out_dim) if bias else None
        return LinearMap(w, b)

    @staticmethod
    def identity(dim: int, bias: bool = True) -> "LinearMap":
        return LinearMap(np.eye(dim), np.zeros(dim) if bias else None)

    def __call__(self, x: Array) -> Array:
        return linear_apply(self, x)

    def parameters(self) -> dict[str, Array]:
        out = {"weight": self.weight}
        if self.bias is not None:
            out["bias"] = self.bias
        return out

    def copy(self) -> "LinearMap":
        return LinearMap(self.weight.copy(),
                         None if self.bias is None else self.bias.copy())


@dataclass
class Mlp2:
    """2-layer perceptron: linear -> ReLU -> dropout -> linear."""

    layer1: LinearMap
    layer2: LinearMap
    dropout_p: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    @staticmethod
    def create(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator,
               dropout_p: float = 0.0) -> "Mlp2":
        return Mlp2(LinearMap.init_uniform(n_hidden, n_in, rng),
                    LinearMap.init_uniform(n_out, n_hidden, rng),
                    dropout_p)

    @property
    def in_dim(self) -> int:
        return self.layer1.in_dim

    @property
    def out_dim(self) -> int:
        return self.layer2.out_dim

    def __call__(self, x: Array) -> Array:
        y, _ = mlp_forward(self, x, train=False)
        return y

    def parameters(self) -> dict[str, Array]:
        return {
            "layer1.weight": self.layer1.weight,
            "layer1.bias": self.layer1.bias,
            "layer2.weight": self.layer2.weight,
            "layer2.bias": self.layer2.bias,
        }

    def copy(self) -> "Mlp2":
        return Mlp2(self.layer1.copy(), self.layer2.copy(), self.dropout_p)


# ---------------------------------------------------------------------------
# forward / backward


def relu(x: Array) -> Array:
    return np.maximum(x, 0.0)


def linear_apply(lin: LinearMap, x: Array) -> Array:
    y = np.asarray(x, dtype=np.float64) @ lin.weight.T
    if lin.bias is not None:
        y = y + lin.bias
    return y


def forward_backward_linear(lin: LinearMap, x: Array, upstream: Array):
    """Outputs plus parameter and input gradients for y = x W^T + b.

    `upstream` is dLoss/dy with the same leading shape as x.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    dy = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    y = linear_apply(lin, x)
    grads = {"weight": dy.T @ x}
    if lin.bias is not None:
        grads["bias"] = dy.sum(axis=0)
    dx = dy @ lin.weight
    return y, grads, dx


@dataclass
class MlpCache:
    x: Array
    pre: Array
    hidden: Array
    mask: Array | None


def mlp_forward(mlp: Mlp2, x: Array, train: bool = False,
                rng: np.random.Generator | None = None):
    """Forward pass returning (output, cache for backward).

    Dropout applies only with train=True, using an explicit mask drawn from
    `rng` with inverted scaling (kept units divided by 1 - p).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    pre = linear_apply(mlp.layer1, x)
    hidden = relu(pre)
    mask = None
    if train and mlp.dropout_p > 0.0:
        if rng is None:
            raise ValueError("training forward with dropout requires an rng")
        mask = rng.random(hidden.shape) >= mlp.dropout_p
        hidden = hidden * mask / (1.0 - mlp.dropout_p)
    y = linear_apply(mlp.layer2, hidden)
    return y, MlpCache(x, pre, hidden, mask)


def mlp_backward(mlp: Mlp2, cache: MlpCache, upstream: Array):
    """Gradients of the cached forward pass; returns (param grads, dx)."""
    dy = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    grads = {
        "layer2.weight": dy.T @ cache.hidden,
        "layer2.bias": dy.sum(axis=0),
    }
    dh = dy @ mlp.layer2.weight
    if cache.mask is not None:
        dh = dh * cache.mask / (1.0 - mlp.dropout_p)
    dpre = dh * (cache.pre > 0.0)
    grads["layer1.weight"] = dpre.T @ cache.x
    grads["layer1.bias"] = dpre.sum(axis=0)
    dx = dpre @ mlp.layer1.weight
    return grads, dx


# ---------------------------------------------------------------------------
# losses


def proto_logits(z: Array, prototypes: Array) -> Array:
    """Negative squared Euclidean distances from z to each prototype row.

    Supports a single m-vector or a (batch, m) matrix; prototypes are (K, m).
    """
    z = np.asarray(z, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    diff = z[..., None, :] - prototypes
    return -np.sum(diff * diff, axis=-1)


def softmax(logits: Array) -> Array:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_nll(logits: Array, gold):
    """Negative log softmax probability of the gold class and its gradient.

    For (K,) logits and an int gold returns (loss, dloss/dlogits). For a
    (B, K) batch and (B,) golds returns per-sample losses and gradients.
    Stabilized by max-subtraction; gradient is softmax(logits) - onehot.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        losses, grads = softmax_nll(logits[None, :], np.asarray([gold]))
        return float(losses[0]), grads[0]
    golds = np.asarray(gold, dtype=np.intp)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(logits.shape[0])
    losses = logz - shifted[rows, golds]
    grads = softmax(logits)
    grads[rows, golds] -= 1.0
    return losses, grads


def proto_nll(z: Array, prototypes: Array, golds):
    """Mean prototype-distance NLL over a batch, with analytic gradients.

    Returns (loss, dloss/dz of shape (B, m), dloss/dprototypes of shape
    (K, m)) where loss is averaged over the batch.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    prototypes = np.asarray(prototypes, dtype=np.float64)
    golds = np.atleast_1d(np.asarray(golds, dtype=np.intp))
    n = z.shape[0]
    logits = proto_logits(z, prototypes)
    losses, dlogits = softmax_nll(logits, golds)
    dlogits /= n
    diff = z[:, None, :] - prototypes[None, :, :]
    dz = -2.0 * np.einsum("bk,bkm->bm", dlogits, diff)
    dprototypes = 2.0 * np.einsum("bk,bkm->km", dlogits, diff)
    return float(losses.mean()), dz, dprototypes


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamConfig:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters."""

    config: AdamConfig
    t: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)

    @staticmethod
    def create(params: dict[str, Array], config: AdamConfig) -> "AdamState":
        state = AdamState(config)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(params: dict[str, Array], grads: dict[str, Array],
              state: AdamState):
    """One bias-corrected Adam update, in place.

    Weight decay is decoupled: p <- p - lr * wd * p before the moment-based
    update.
    """
    cfg = state.config
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if cfg.weight_decay != 0.0:
            p -= cfg.lr * cfg.weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    return params, state


# ---------------------------------------------------------------------------
# parameter serialization: JSON header + flat little-endian f64 blob


class ParamsFormatError(ValueError):
    pass


def save_params(path, arrays: dict[str, Array], meta: dict | None = None) -> None:
    """Write named f64 arrays as a versioned JSON-header + flat binary blob."""
    names = sorted(arrays)
    header = {
        "format": "protoalign-params",
        "version": PARAMS_VERSION,
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
        "meta": meta or {},
    }
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<I", len(hjson)))
        f.write(hjson)
        for n in names:
            f.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def load_params(path):
    """Read arrays and metadata written by save_params."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != PARAMS_MAGIC:
        raise ParamsFormatError(f"bad magic in {path!r}")
    (hlen,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    if header.get("version") != PARAMS_VERSION:
        raise ParamsFormatError(f"unsupported params version {header.get('version')}")
    arrays = {}
    offset = 8 + hlen
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise ParamsFormatError(f"truncated params file {path!r}")
        arr = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64)
        arrays[spec["name"]] = arr.reshape(shape)
        offset = end
    return arrays, header["meta"]
