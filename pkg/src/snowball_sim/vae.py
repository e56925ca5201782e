"""Variational autoencoder over update-difference vectors.

Encoder: two relu dense layers to hidden width, then linear heads for
the latent mean and log-variance. Decoder mirrors it back to the input
dimension. Training minimizes per-sample KL(q(z|u) || N(0, I)) plus the
mean-squared reconstruction error; scoring uses the deterministic z=mu
path so candidate scores are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, ParameterError, ShapeError
from .layered import LayeredVector
from .nn import SgdState, sgd_step
from .rng import RngStream


@dataclass(frozen=True)
class VAEModel:
    input_dim: int
    hidden_dim: int
    latent_dim: int
    params: LayeredVector

    # layer order: enc1, enc2, mu head, logvar head, dec1, dec2, out
    def layer_shapes(self) -> list[tuple[int, int, bool]]:
        """(in, out, relu?) per parameter layer."""
        d, h, l = self.input_dim, self.hidden_dim, self.latent_dim
        return [(d, h, True), (h, h, True), (h, l, False), (h, l, False),
                (l, h, True), (h, h, True), (h, d, False)]

    def __post_init__(self):
        expect = tuple(i * o + o for i, o, _ in self.layer_shapes())
        if self.params.dims != expect:
            raise ShapeError(f"VAE parameter dims {self.params.dims} != expected {expect}")

    def with_params(self, params: LayeredVector) -> "VAEModel":
        return replace(self, params=params)

    def weights(self, idx: int) -> tuple[np.ndarray, np.ndarray]:
        i, o, _ = self.layer_shapes()[idx]
        flat = self.params.values[idx]
        return flat[:i * o].reshape(o, i), flat[i * o:]


def init_vae(input_dim: int, hidden_dim: int, latent_dim: int, rng: RngStream) -> VAEModel:
    """Kaiming-initialized VAE (fan-in scaling, zero biases)."""
    if min(input_dim, hidden_dim, latent_dim) < 1:
        raise ParameterError("VAE dims must be positive")
    gen = rng.generator()
    arrays = []
    d, h, l = input_dim, hidden_dim, latent_dim
    for fan_in, fan_out, relu in [(d, h, True), (h, h, True), (h, l, False), (h, l, False),
                                  (l, h, True), (h, h, True), (h, d, False)]:
        std = np.sqrt((2.0 if relu else 1.0) / fan_in)
        w = gen.standard_normal((fan_out, fan_in)) * std
        arrays.append(np.concatenate([w.ravel(), np.zeros(fan_out)]))
    params = LayeredVector.from_arrays(arrays)
    return VAEModel(d, h, l, params)


@dataclass
class VAEForward:
    """Outputs and intermediates of one forward pass."""

    recon: np.ndarray
    mu: np.ndarray
    logvar: np.ndarray
    z: np.ndarray
    eps: np.ndarray | None    # None in eval mode
    inputs: np.ndarray
    hidden: dict
    squeezed: bool


def vae_forward(model: VAEModel, u: np.ndarray, rng: RngStream | None = None,
                train: bool = False) -> VAEForward:
    """Encode, sample (train) or take z=mu (eval), decode.

    Train mode draws the reparametrization noise from rng; eval mode is
    fully deterministic.
    """
    u = np.asarray(u, dtype=np.float64)
    squeezed = u.ndim == 1
    x = u[None, :] if squeezed else u
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"input shape {u.shape} does not match input_dim {model.input_dim}")

    def dense(idx, a):
        w, b = model.weights(idx)
        return a @ w.T + b

    z1 = dense(0, x); h1 = np.maximum(z1, 0.0)
    z2 = dense(1, h1); h2 = np.maximum(z2, 0.0)
    mu = dense(2, h2)
    logvar = dense(3, h2)
    if train:
        if rng is None:
            raise ParameterError("train-mode forward needs an rng for the latent noise")
        eps = rng.generator().standard_normal(mu.shape)
        z = mu + np.exp(0.5 * logvar) * eps
    else:
        eps = None
        z = mu
    zd1 = dense(4, z); d1 = np.maximum(zd1, 0.0)
    zd2 = dense(5, d1); d2 = np.maximum(zd2, 0.0)
    recon = dense(6, d2)
    hidden = {"z1": z1, "h1": h1, "z2": z2, "h2": h2, "zd1": zd1, "d1": d1, "zd2": zd2, "d2": d2}
    if squeezed:
        return VAEForward(recon[0], mu[0], logvar[0], z[0], None if eps is None else eps[0],
                          x, hidden, True)
    return VAEForward(recon, mu, logvar, z, eps, x, hidden, False)


def vae_loss(recon: np.ndarray, u: np.ndarray, mu: np.ndarray,
             logvar: np.ndarray) -> tuple[float, float, float]:
    """(total, kl, recon_mse); batch inputs are averaged over the batch.

    Per sample: recon = mean squared error over input dims,
    kl = 0.5 * sum_d(mu^2 + exp(logvar) - logvar - 1).
    """
    recon = np.atleast_2d(np.asarray(recon, dtype=np.float64))
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    if recon.shape != u.shape or mu.shape != logvar.shape:
        raise ShapeError("mismatched shapes in vae_loss")
    rec = float(((recon - u) ** 2).mean(axis=1).mean())
    kl = float((0.5 * (mu ** 2 + np.exp(logvar) - logvar - 1.0).sum(axis=1)).mean())
    total = kl + rec
    if not np.isfinite(total):
        raise NumericError("non-finite VAE loss")
    return total, kl, rec


def vae_backward(model: VAEModel, fwd: VAEForward) -> LayeredVector:
    """Gradient of the batch-mean loss w.r.t. every VAE parameter."""
    x = fwd.inputs
    n = x.shape[0]
    h = fwd.hidden
    recon = np.atleast_2d(fwd.recon)
    mu = np.atleast_2d(fwd.mu)
    logvar = np.atleast_2d(fwd.logvar)
    z = np.atleast_2d(fwd.z)
    grads: list[np.ndarray] = [None] * 7

    def dense_back(idx, delta, a_in):
        dw = delta.T @ a_in
        db = delta.sum(axis=0)
        grads[idx] = np.concatenate([dw.ravel(), db])
        w, _ = model.weights(idx)
        return delta @ w

    # reconstruction: per-sample mean over dims, batch mean over samples
    g = 2.0 * (recon - x) / (model.input_dim * n)
    g = dense_back(6, g, h["d2"])
    g = g * (h["zd2"] > 0.0)
    g = dense_back(5, g, h["d1"])
    g = g * (h["zd1"] > 0.0)
    gz = dense_back(4, g, z)

    dmu = gz.copy()
    dlv = np.zeros_like(logvar)
    if fwd.eps is not None:
        eps = np.atleast_2d(fwd.eps)
        dlv += gz * eps * np.exp(0.5 * logvar) * 0.5
    # KL term: 0.5 * sum(mu^2 + e^lv - lv - 1), batch mean
    dmu += mu / n
    dlv += 0.5 * (np.exp(logvar) - 1.0) / n

    gh2 = dense_back(2, dmu, h["h2"])
    gh2 = gh2 + dense_back(3, dlv, h["h2"])
    g = gh2 * (h["z2"] > 0.0)
    g = dense_back(1, g, h["h1"])
    g = g * (h["z1"] > 0.0)
    dense_back(0, g, x)
    return LayeredVector(model.params.layer_ids, tuple(grads))


def reconstruction_errors(model: VAEModel, u: np.ndarray) -> np.ndarray:
    """Per-row eval-mode reconstruction MSE."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    fwd = vae_forward(model, u)
    return ((np.atleast_2d(fwd.recon) - u) ** 2).mean(axis=1)


def mean_loss(model: VAEModel, u: np.ndarray) -> tuple[float, float, float]:
    """Eval-mode (total, kl, recon) averaged over the set."""
    fwd = vae_forward(model, np.atleast_2d(u))
    return vae_loss(fwd.recon, u, fwd.mu, fwd.logvar)


def train_vae(model: VAEModel, u_set: np.ndarray, epochs: int, state: SgdState,
              rng: RngStream, batch_size: int = 32) -> tuple[VAEModel, list[float]]:
    """Mini-batch SGD on the difference set for the given number of epochs.

    Returns the trained model and the eval-mode mean loss before training
    and after each epoch (length epochs + 1).
    """
    u_set = np.atleast_2d(np.asarray(u_set, dtype=np.float64))
    if len(u_set) == 0:
        raise ParameterError("empty difference set")
    history = [mean_loss(model, u_set)[0]]
    bs = max(1, min(batch_size, len(u_set)))
    for epoch in range(epochs):
        epoch_rng = rng.derive("epoch", epoch)
        perm = epoch_rng.generator().permutation(len(u_set))
        for bi, start in enumerate(range(0, len(u_set), bs)):
            batch = u_set[perm[start:start + bs]]
            fwd = vae_forward(model, batch, epoch_rng.derive("noise", bi), train=True)
            vae_loss(fwd.recon, batch, fwd.mu, fwd.logvar)  # raises on divergence
            grad = vae_backward(model, fwd)
            model = model.with_params(sgd_step(model.params, grad, state))
        history.append(mean_loss(model, u_set)[0])
    return model, history
