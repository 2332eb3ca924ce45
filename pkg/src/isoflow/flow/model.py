"""Invertible calibration model: layer stack, exact likelihood, gradients."""

from __future__ import annotations

import math

import numpy as np

from ..errors import FlowError
from ..numerics import Rng, as_matrix
from ..store import EmbeddingMatrix
from .layers import ActNorm, AdditiveCoupling, Permutation, make_coupling_net

LOG_2PI = math.log(2.0 * math.pi)


def _batch(x, dim):
    arr = np.asarray(x, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise FlowError(f"expected vectors of dim {dim}, got shape {np.shape(x)}")
    return arr, squeeze


class FlowModel:
    """Stack of invertible blocks mapping latent z to observation u.

    ``layers`` is ordered in the normalizing (u -> z) application order:
    the observation passes through layers[0], layers[1], ... to reach the
    latent, and the generative direction walks the list in reverse.
    """

    def __init__(self, dim: int, layers):
        self.dim = dim
        self.layers = list(layers)

    @classmethod
    def build(cls, dim: int, levels: int = 2, depth: int = 3, width: int = 32,
              coupling: str = "dense", rng: Rng | None = None, seed: int = 0) -> "FlowModel":
        """Standard architecture: (actnorm, permutation, coupling) blocks.

        The multi-level image recipe has no spatial axis here, so levels
        and depth simply multiply into the block count. Permutations and
        net weights are drawn from ``rng`` (or a fresh stream on ``seed``)
        once, at construction.
        """
        if dim < 2:
            raise FlowError("flow models need dim >= 2")
        rng = rng if rng is not None else Rng(seed)
        split = dim // 2
        layers = []
        for _ in range(levels * depth):
            layers.append(ActNorm(dim))
            layers.append(Permutation.random(dim, rng))
            net = make_coupling_net(coupling, split, dim - split, width, rng)
            layers.append(AdditiveCoupling(dim, net, split))
        return cls(dim, layers)

    # -- initialization -------------------------------------------------

    def init_actnorms(self, batch):
        """Data-dependent initialization, sequential through the stack."""
        x = as_matrix(batch, "init batch")
        for layer in self.layers:
            if isinstance(layer, ActNorm) and not layer.initialized:
                layer.init_from_batch(x)
            x, _ = layer.inverse(x)

    def init_identity(self):
        for layer in self.layers:
            if isinstance(layer, ActNorm):
                layer.init_identity()

    # -- exact transforms ------------------------------------------------

    def inverse(self, u):
        """Map observations to latents; also return log|det d f^-1 / d u|."""
        x, squeeze = _batch(u, self.dim)
        logdet = 0.0
        for layer in self.layers:
            x, ld = layer.inverse(x)
            logdet += ld
        return (x[0] if squeeze else x), logdet

    def forward(self, z):
        """Map latents to observations; also return log|det d f / d z|."""
        x, squeeze = _batch(z, self.dim)
        logdet = 0.0
        for layer in reversed(self.layers):
            x, ld = layer.forward(x)
            logdet += ld
        return (x[0] if squeeze else x), logdet

    # -- likelihood -------------------------------------------------------

    def _inverse_checked(self, batch, with_cache):
        x = batch
        caches = []
        logdet = 0.0
        with np.errstate(over="ignore", invalid="ignore"):  # detected below
            for index, layer in enumerate(self.layers):
                if with_cache:
                    x, ld, cache = layer.inverse_cached(x)
                    caches.append(cache)
                else:
                    x, ld = layer.inverse(x)
                if not np.isfinite(x).all():
                    raise FlowError(
                        f"non-finite activations after layer {index} ({type(layer).__name__})"
                    )
                logdet += ld
        return x, logdet, caches

    def nll(self, batch) -> float:
        """Mean negative log-likelihood under the standard Gaussian latent."""
        x = as_matrix(batch, "batch")
        z, logdet, _ = self._inverse_checked(x, with_cache=False)
        gauss = 0.5 * float(np.mean(np.sum(z * z, axis=1))) + 0.5 * self.dim * LOG_2PI
        return gauss - logdet

    def grad_nll(self, batch):
        """Loss value plus exact gradients for every parameter.

        Gradients are accumulated by reverse sweep through the inverse
        pipeline; the actnorm layers fold in their log-det terms.
        Returns (nll, {(layer_index, param_name): gradient}).
        """
        x = as_matrix(batch, "batch")
        n = x.shape[0]
        z, logdet, caches = self._inverse_checked(x, with_cache=True)
        gauss = 0.5 * float(np.mean(np.sum(z * z, axis=1))) + 0.5 * self.dim * LOG_2PI
        loss = gauss - logdet
        grad = z / n
        grads = {}
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            grad, layer_grads = layer.backward_inverse(caches[index], grad)
            for name, g in layer_grads.items():
                grads[(index, name)] = g
        return loss, grads

    # -- parameter plumbing ------------------------------------------------

    def parameters(self):
        """Live parameter arrays keyed by (layer_index, name)."""
        out = {}
        for index, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out[(index, name)] = arr
        return out

    def set_parameters(self, values):
        per_layer = {}
        for (index, name), arr in values.items():
            per_layer.setdefault(index, {})[name] = arr
        for index, layer_values in per_layer.items():
            self.layers[index].set_params(layer_values)


def flow_inverse(u, model: FlowModel):
    return model.inverse(u)


def flow_forward(z, model: FlowModel):
    return model.forward(z)


def nll(batch, model: FlowModel) -> float:
    batch = batch.matrix if isinstance(batch, EmbeddingMatrix) else batch
    return model.nll(batch)


def grad_nll(batch, model: FlowModel):
    batch = batch.matrix if isinstance(batch, EmbeddingMatrix) else batch
    return model.grad_nll(batch)


def transform(e, model: FlowModel):
    """Map every row of an embedding matrix into the latent space."""
    if isinstance(e, EmbeddingMatrix):
        if e.dim != model.dim:
            raise FlowError(f"model dim {model.dim} does not match embeddings dim {e.dim}")
        z, _ = model.inverse(e.matrix)
        return EmbeddingMatrix(matrix=z, source_tag=e.source_tag)
    z, _ = model.inverse(as_matrix(e, "embeddings"))
    return z
