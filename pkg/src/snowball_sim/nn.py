"""Minimal deterministic MLP substrate.

Fully-connected networks stored as LayeredVectors (per layer: weight
matrix row-major, then bias), forward/backward passes, softmax
cross-entropy, and momentum SGD. Used both for client classifiers and
for the defense VAE's dense blocks. Everything is float64 and pure:
given the same RngStream inputs, results are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, ParameterError, ShapeError, StateError
from .layered import LayeredVector
from .rng import RngStream

ACTIVATIONS = ("relu", "identity", "softmax-output")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ParameterError("layer dims must be positive")


@dataclass(frozen=True)
class MLPModel:
    specs: tuple[LayerSpec, ...]
    params: LayeredVector

    def __post_init__(self):
        for a, b in zip(self.specs, self.specs[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        expect = tuple(s.in_dim * s.out_dim + s.out_dim for s in self.specs)
        if self.params.dims != expect:
            raise ShapeError(f"parameter dims {self.params.dims} != expected {expect}")

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def with_params(self, params: LayeredVector) -> "MLPModel":
        return replace(self, params=params)


@dataclass
class ForwardCache:
    """Intermediate activations kept for the matching backward call."""

    model: MLPModel
    inputs: list[np.ndarray]      # a_0 .. a_{L-1}, input to each layer
    preacts: list[np.ndarray]     # z_1 .. z_L
    squeezed: bool                # input arrived as a single sample


def weight_view(spec: LayerSpec, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split one layer's flat parameter array into (W, b) views."""
    n_w = spec.in_dim * spec.out_dim
    return flat[:n_w].reshape(spec.out_dim, spec.in_dim), flat[n_w:]


def kaiming_layer(spec: LayerSpec, gen: np.random.Generator) -> np.ndarray:
    """Fan-in scaled normal weights, zero bias, as one flat array."""
    gain = 2.0 if spec.activation == "relu" else 1.0
    std = np.sqrt(gain / spec.in_dim)
    w = gen.standard_normal((spec.out_dim, spec.in_dim)) * std
    return np.concatenate([w.ravel(), np.zeros(spec.out_dim)])


def build_classifier(layer_dims: list[int], rng: RngStream) -> MLPModel:
    """MLP with relu hidden layers and a linear (softmax-trained) output.

    layer_dims is [in, hidden..., out]; parameters are Kaiming-initialized
    from the given stream.
    """
    if len(layer_dims) < 2:
        raise ParameterError("need at least input and output dims")
    specs = []
    for k, (a, b) in enumerate(zip(layer_dims, layer_dims[1:])):
        last = k == len(layer_dims) - 2
        specs.append(LayerSpec(a, b, "softmax-output" if last else "relu"))
    gen = rng.generator()
    arrays = [kaiming_layer(s, gen) for s in specs]
    return MLPModel(tuple(specs), LayeredVector.from_arrays(arrays))


def mlp_forward(model: MLPModel, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on x (one sample (d,) or a batch (n, d)).

    Returns logits plus the cache needed by mlp_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    a = x[None, :] if squeezed else x
    if a.ndim != 2 or a.shape[1] != model.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match in_dim {model.in_dim}")
    inputs, preacts = [], []
    for spec, flat in zip(model.specs, model.params.values):
        w, b = weight_view(spec, flat)
        inputs.append(a)
        z = a @ w.T + b
        preacts.append(z)
        a = np.maximum(z, 0.0) if spec.activation == "relu" else z
    logits = a[0] if squeezed else a
    return logits, ForwardCache(model, inputs, preacts, squeezed)


def mlp_backward(model: MLPModel, cache: ForwardCache, grad_logits: np.ndarray) -> LayeredVector:
    """Backpropagate d(loss)/d(logits) to a parameter gradient.

    The cache must come from a forward pass on this exact model.
    """
    if cache.model is not model:
        raise StateError("cache does not belong to this model (stale or mismatched)")
    g = np.asarray(grad_logits, dtype=np.float64)
    if cache.squeezed:
        g = g[None, :]
    if g.shape != cache.preacts[-1].shape:
        raise ShapeError(f"grad_logits shape {grad_logits.shape} does not match logits")
    grads: list[np.ndarray | None] = [None] * len(model.specs)
    delta = g
    for k in range(len(model.specs) - 1, -1, -1):
        spec = model.specs[k]
        w, _ = weight_view(spec, model.params.values[k])
        dw = delta.T @ cache.inputs[k]
        db = delta.sum(axis=0)
        grads[k] = np.concatenate([dw.ravel(), db])
        if k > 0:
            delta = delta @ w
            if model.specs[k - 1].activation == "relu":
                delta = delta * (cache.preacts[k - 1] > 0.0)
    return LayeredVector(model.params.layer_ids, tuple(grads))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(labels)
    n = logits.shape[0]
    p = softmax(logits)
    loss = float(-np.log(np.clip(p[np.arange(n), labels], 1e-300, None)).mean())
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


@dataclass
class SgdState:
    """Momentum SGD with L2 weight decay added to the raw gradient."""

    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    velocity: LayeredVector | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be >= 0")


def sgd_step(params: LayeredVector, gradient: LayeredVector, state: SgdState) -> LayeredVector:
    """v <- momentum*v + grad + wd*params; params <- params - lr*v."""
    if not gradient.allfinite():
        raise NumericError("non-finite gradient")
    if state.velocity is None:
        state.velocity = params.zeros_like()
    elif state.velocity.dims != params.dims:
        raise ShapeError("velocity dims do not match params")
    new_v = []
    new_p = []
    for v, g, p in zip(state.velocity.values, gradient.values, params.values):
        vk = state.momentum * v + g + state.weight_decay * p
        new_v.append(vk)
        new_p.append(p - state.learning_rate * vk)
    state.velocity = LayeredVector(params.layer_ids, tuple(new_v))
    return LayeredVector(params.layer_ids, tuple(new_p))


def predict(model: MLPModel, x: np.ndarray) -> np.ndarray:
    logits, _ = mlp_forward(model, np.atleast_2d(x))
    return logits.argmax(axis=1)


def accuracy(model: MLPModel, x: np.ndarray, labels: np.ndarray) -> float:
    return float((predict(model, x) == labels).mean())
