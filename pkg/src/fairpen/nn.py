"""Minimal feed-forward network engine with manual backprop and SGD.

The layer set is closed: dense, batch-norm, and elementwise activations
(relu / sigmoid / identity). Gradients are accumulated into per-layer
buffers by ``backward`` and consumed (then cleared) by ``sgd_step``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import CheckpointError, DimensionError, StateError

PROB_EPS = 1e-7
CKPT_MAGIC = "FAIRPEN-CKPT-v1"


def sigmoid(x: np.ndarray) -> np.ndarray:
    # numerically stable in both tails
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def clamp_prob(p: np.ndarray) -> np.ndarray:
    """Bound probabilities away from 0/1 before any logarithm."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _arr_to_spec(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "hex": [float(v).hex() for v in a.ravel()]}


def _arr_from_spec(d: dict) -> np.ndarray:
    vals = np.array([float.fromhex(h) for h in d["hex"]], dtype=np.float64)
    return vals.reshape(d["shape"])


class DenseLayer:
    """Affine layer y = x W + b with cached input for backprop."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.weights = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._cached_input: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._cached_input = x if train else None
        return x @ self.weights + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._cached_input
        self.grad_weights += x.T @ grad_out
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weights.T

    def params_and_grads(self):
        yield self.weights, self.grad_weights
        yield self.bias, self.grad_bias

    def to_spec(self) -> dict:
        return {
            "kind": "dense",
            "weights": _arr_to_spec(self.weights),
            "bias": _arr_to_spec(self.bias),
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "DenseLayer":
        w = _arr_from_spec(spec["weights"])
        layer = cls.__new__(cls)
        layer.weights = w
        layer.bias = _arr_from_spec(spec["bias"])
        layer.grad_weights = np.zeros_like(layer.weights)
        layer.grad_bias = np.zeros_like(layer.bias)
        layer._cached_input = None
        return layer


class BatchNormLayer:
    """Batch normalization: batch statistics in train mode, exponential
    running statistics (momentum 0.99) in inference mode."""

    def __init__(self, width: int, momentum: float = 0.99, epsilon: float = 1e-5):
        self.gamma = np.ones(width)
        self.beta_shift = np.zeros(width)
        self.grad_gamma = np.zeros(width)
        self.grad_beta_shift = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.epsilon = epsilon
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if train:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            x_hat = (x - mean) * inv_std
            self._cache = (x_hat, inv_std)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            return self.gamma * x_hat + self.beta_shift
        self._cache = None
        x_hat = (x - self.running_mean) / np.sqrt(self.running_var + self.epsilon)
        return self.gamma * x_hat + self.beta_shift

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_hat, inv_std = self._cache
        n = grad_out.shape[0]
        self.grad_gamma += (grad_out * x_hat).sum(axis=0)
        self.grad_beta_shift += grad_out.sum(axis=0)
        g = grad_out * self.gamma
        return inv_std / n * (n * g - g.sum(axis=0) - x_hat * (g * x_hat).sum(axis=0))

    def params_and_grads(self):
        yield self.gamma, self.grad_gamma
        yield self.beta_shift, self.grad_beta_shift

    def to_spec(self) -> dict:
        return {
            "kind": "batch_norm",
            "gamma": _arr_to_spec(self.gamma),
            "beta_shift": _arr_to_spec(self.beta_shift),
            "running_mean": _arr_to_spec(self.running_mean),
            "running_var": _arr_to_spec(self.running_var),
            "momentum": self.momentum,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "BatchNormLayer":
        layer = cls(len(spec["gamma"]["hex"]), spec["momentum"], spec["epsilon"])
        layer.gamma = _arr_from_spec(spec["gamma"])
        layer.beta_shift = _arr_from_spec(spec["beta_shift"])
        layer.running_mean = _arr_from_spec(spec["running_mean"])
        layer.running_var = _arr_from_spec(spec["running_var"])
        layer.grad_gamma = np.zeros_like(layer.gamma)
        layer.grad_beta_shift = np.zeros_like(layer.beta_shift)
        return layer


class ActivationLayer:
    """Elementwise relu / sigmoid / identity."""

    KINDS = ("relu", "sigmoid", "identity")

    def __init__(self, fn: str):
        if fn not in self.KINDS:
            raise ValueError(f"unknown activation {fn!r}")
        self.fn = fn
        self._cache: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if self.fn == "relu":
            out = np.maximum(x, 0.0)
            self._cache = x
        elif self.fn == "sigmoid":
            out = sigmoid(x)
            self._cache = out
        else:
            out = x
            self._cache = None
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self.fn == "relu":
            return grad_out * (self._cache > 0)
        if self.fn == "sigmoid":
            s = self._cache
            return grad_out * s * (1.0 - s)
        return grad_out

    def params_and_grads(self):
        return iter(())

    def to_spec(self) -> dict:
        return {"kind": "activation", "fn": self.fn}

    @classmethod
    def from_spec(cls, spec: dict) -> "ActivationLayer":
        return cls(spec["fn"])


_LAYER_KINDS = {
    "dense": DenseLayer,
    "batch_norm": BatchNormLayer,
    "activation": ActivationLayer,
}


class Mlp:
    """Ordered layer stack with a shared train/inference mode switch."""

    def __init__(self, layers: list):
        self.layers = layers
        self._train_cache_ready = False
        widths = [l for l in layers if isinstance(l, DenseLayer)]
        for prev, nxt in zip(widths, widths[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionError(
                    f"dense widths incompatible: {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return next(l for l in self.layers if isinstance(l, DenseLayer)).in_dim

    @property
    def out_dim(self) -> int:
        return [l for l in self.layers if isinstance(l, DenseLayer)][-1].out_dim

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"expected input of width {self.in_dim}, got shape {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, train)
        self._train_cache_ready = train
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; return the gradient w.r.t. the input."""
        if not self._train_cache_ready:
            raise StateError("backward called without a prior train-mode forward")
        grad = np.asarray(grad_out, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def sgd_step(self, learning_rate: float, maximize: bool = False) -> None:
        sign = 1.0 if maximize else -1.0
        for layer in self.layers:
            for param, grad in layer.params_and_grads():
                param += sign * learning_rate * grad
                if not np.isfinite(param).all():
                    raise FloatingPointError("non-finite parameter after SGD step")
        self.zero_grads()

    def zero_grads(self) -> None:
        for layer in self.layers:
            for _, grad in layer.params_and_grads():
                grad[...] = 0.0

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p, _ in layer.params_and_grads()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for _, g in layer.params_and_grads()]

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def save(self, path) -> None:
        spec = {"layers": [layer.to_spec() for layer in self.layers]}
        with open(path, "w", encoding="utf-8") as f:
            f.write(CKPT_MAGIC + "\n")
            json.dump(spec, f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        try:
            with open(path, "r", encoding="utf-8") as f:
                magic = f.readline().rstrip("\n")
                if magic != CKPT_MAGIC:
                    raise CheckpointError(f"{path}: bad magic header {magic!r}")
                spec = json.load(f)
        except OSError as exc:
            raise CheckpointError(f"{path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: corrupted checkpoint body") from exc
        layers = [_LAYER_KINDS[s["kind"]].from_spec(s) for s in spec["layers"]]
        return cls(layers)


def mlp(
    in_dim: int,
    hidden: list[int],
    out_dim: int = 1,
    rng: np.random.Generator | None = None,
    batch_norm: bool = True,
    hidden_activation: str = "relu",
    output_activation: str = "sigmoid",
) -> Mlp:
    """Build a [Dense-(BN)-act]*k - [Dense-out_act] stack."""
    rng = rng if rng is not None else np.random.default_rng()
    layers: list = []
    prev = in_dim
    for width in hidden:
        layers.append(DenseLayer(prev, width, rng))
        if batch_norm:
            layers.append(BatchNormLayer(width))
        layers.append(ActivationLayer(hidden_activation))
        prev = width
    layers.append(DenseLayer(prev, out_dim, rng))
    layers.append(ActivationLayer(output_activation))
    return Mlp(layers)


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the probabilities."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise DimensionError(f"length mismatch: {p.shape} vs {y.shape}")
    pc = clamp_prob(p)
    loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    grad = (-y / pc + (1.0 - y) / (1.0 - pc)) / p.size
    return loss, grad


def mae_loss(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient (0 at exact ties)."""
    s = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if s.shape != y.shape:
        raise DimensionError(f"length mismatch: {s.shape} vs {y.shape}")
    loss = float(np.mean(np.abs(y - s)))
    grad = np.sign(s - y) / s.size
    return loss, grad
