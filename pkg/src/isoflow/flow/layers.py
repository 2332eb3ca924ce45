"""Invertible layers: actnorm, fixed permutation, additive coupling.

Conventions shared by every layer:

* ``forward`` maps latent toward observation (z -> u), ``inverse`` maps
  observation toward latent (u -> z); both take and return (B, D) batches.
* log-determinants are per-example scalars. Couplings and permutations
  contribute exactly zero, so for this layer set the total is always
  example-independent.
* training runs in the inverse direction only: ``inverse_cached`` records
  what ``backward_inverse`` needs to push a loss gradient from the layer
  output back to its input and to every parameter. The actnorm backward
  also folds in the gradient of the exact-likelihood log-det term, since
  that loss is the only consumer of these gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateDimensionError, FlowError
from ..numerics import Rng

_DEGENERATE_TOL = 1e-12


class ActNorm:
    """Per-dimension affine layer with data-dependent initialization."""

    def __init__(self, dim: int):
        self.dim = dim
        self.scale = np.ones(dim)
        self.bias = np.zeros(dim)
        self.initialized = False

    def init_identity(self):
        """Mark the layer initialized with the identity map (tests, toys)."""
        self.scale = np.ones(self.dim)
        self.bias = np.zeros(self.dim)
        self.initialized = True

    def init_from_batch(self, batch: np.ndarray):
        """Set bias/scale so the inverse output of ``batch`` is standardized.

        Uses per-dimension mean and population standard deviation, so after
        initialization ``inverse(batch)`` has mean 0 and variance 1 exactly
        (up to rounding).
        """
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[0] < 2:
            raise FlowError("actnorm initialization needs a batch of at least 2 rows")
        if batch.shape[1] != self.dim:
            raise FlowError(f"actnorm dim {self.dim} does not match batch dim {batch.shape[1]}")
        mean = batch.mean(axis=0)
        std = batch.std(axis=0)
        if np.any(std <= _DEGENERATE_TOL * np.maximum(1.0, np.abs(mean))):
            bad = int(np.argmin(std))
            raise DegenerateDimensionError(f"degenerate dimension {bad}: zero variance")
        self.bias = mean
        self.scale = std
        self.initialized = True

    def _check(self, x):
        if not self.initialized:
            raise FlowError("uninitialized actnorm layer")
        if np.any(self.scale == 0.0):
            raise FlowError("actnorm scale contains an exact zero")
        if x.shape[-1] != self.dim:
            raise FlowError(f"actnorm dim {self.dim} does not match input dim {x.shape[-1]}")

    def logdet_forward(self) -> float:
        return float(np.sum(np.log(np.abs(self.scale))))

    def forward(self, x):
        self._check(x)
        return x * self.scale + self.bias, self.logdet_forward()

    def inverse(self, y):
        self._check(y)
        return (y - self.bias) / self.scale, -self.logdet_forward()

    def inverse_cached(self, y):
        out, logdet = self.inverse(y)
        return out, logdet, out  # cache the standardized output

    def backward_inverse(self, cache, dout):
        # out = (y - bias) / scale, plus the +sum(log|scale|) loss term.
        out = cache
        dscale = -np.sum(dout * out, axis=0) / self.scale + 1.0 / self.scale
        dbias = -np.sum(dout, axis=0) / self.scale
        din = dout / self.scale
        return din, {"scale": dscale, "bias": dbias}

    def params(self):
        return {"scale": self.scale, "bias": self.bias}

    def set_params(self, values):
        self.scale = values["scale"]
        self.bias = values["bias"]


class Permutation:
    """Fixed shuffle of coordinates, sampled once at model construction."""

    def __init__(self, perm: np.ndarray):
        self.perm = np.asarray(perm, dtype=np.int64)
        self.inverse_perm = np.argsort(self.perm)
        if not np.array_equal(self.perm[self.inverse_perm], np.arange(len(self.perm))):
            raise FlowError("permutation is not a bijection")
        self.dim = len(self.perm)

    @classmethod
    def random(cls, dim: int, rng: Rng) -> "Permutation":
        return cls(rng.permutation(dim))

    def forward(self, x):
        return x[..., self.inverse_perm], 0.0

    def inverse(self, y):
        return y[..., self.perm], 0.0

    def inverse_cached(self, y):
        out, logdet = self.inverse(y)
        return out, logdet, None

    def backward_inverse(self, cache, dout):
        return dout[..., self.inverse_perm], {}

    def params(self):
        return {}

    def set_params(self, values):
        pass


def _he_init(rng: Rng, fan_in: int, shape) -> np.ndarray:
    return rng.standard_normal(*shape) * np.sqrt(2.0 / fan_in)


class DenseCouplingNet:
    """Residual fully-connected shift network.

    Three hidden transformations of equal width with one residual skip,
    followed by a zero-initialized linear output so the whole network is
    exactly zero at construction:

        h1 = relu(x W1' + b1)
        h2 = relu(h1 W2' + b2)
        h3 = relu(h2 W3' + b3) + h1
        y  = h3 W4' + b4          (W4, b4 start at zero)
    """

    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, width: int, rng: Rng):
        self.in_dim, self.out_dim, self.width = in_dim, out_dim, width
        self.w1 = _he_init(rng, in_dim, (width, in_dim))
        self.b1 = np.zeros(width)
        self.w2 = _he_init(rng, width, (width, width))
        self.b2 = np.zeros(width)
        self.w3 = _he_init(rng, width, (width, width))
        self.b3 = np.zeros(width)
        self.w4 = np.zeros((out_dim, width))
        self.b4 = np.zeros(out_dim)

    def apply(self, x):
        y, _ = self.apply_cached(x)
        return y

    def apply_cached(self, x):
        pre1 = x @ self.w1.T + self.b1
        h1 = np.maximum(pre1, 0.0)
        pre2 = h1 @ self.w2.T + self.b2
        h2 = np.maximum(pre2, 0.0)
        pre3 = h2 @ self.w3.T + self.b3
        h3 = np.maximum(pre3, 0.0) + h1
        y = h3 @ self.w4.T + self.b4
        return y, (x, pre1, h1, pre2, h2, pre3, h3)

    def backward(self, cache, dy):
        x, pre1, h1, pre2, h2, pre3, h3 = cache
        grads = {
            "w4": dy.T @ h3,
            "b4": dy.sum(axis=0),
        }
        dh3 = dy @ self.w4
        dh1 = dh3.copy()  # residual skip
        dpre3 = dh3 * (pre3 > 0.0)
        grads["w3"] = dpre3.T @ h2
        grads["b3"] = dpre3.sum(axis=0)
        dh2 = dpre3 @ self.w3
        dpre2 = dh2 * (pre2 > 0.0)
        grads["w2"] = dpre2.T @ h1
        grads["b2"] = dpre2.sum(axis=0)
        dh1 += dpre2 @ self.w2
        dpre1 = dh1 * (pre1 > 0.0)
        grads["w1"] = dpre1.T @ x
        grads["b1"] = dpre1.sum(axis=0)
        dx = dpre1 @ self.w1
        return dx, grads

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "w3": self.w3, "b3": self.b3, "w4": self.w4, "b4": self.b4}

    def set_params(self, values):
        for name, value in values.items():
            setattr(self, name, value)


def _conv1d(xp, kernels):
    # xp: (B, C_in, L+2) zero-padded input; kernels: (C_out, C_in, 3).
    length = xp.shape[2] - 2
    out = np.zeros((xp.shape[0], kernels.shape[0], length))
    for k in range(3):
        out += np.tensordot(xp[:, :, k:k + length], kernels[:, :, k],
                            axes=([1], [1])).transpose(0, 2, 1)
    return out


class ConvCouplingNet:
    """1-D convolutional variant of the shift network (kernel 3, same pad).

    The conditioning block is treated as a length-``in_dim`` sequence with
    one channel; three convolutions of ``width`` channels mirror the dense
    topology (relu, relu, relu + residual skip from the first feature map),
    and a zero-initialized linear map flattens to ``out_dim`` values.
    """

    kind = "conv"

    def __init__(self, in_dim: int, out_dim: int, width: int, rng: Rng):
        self.in_dim, self.out_dim, self.width = in_dim, out_dim, width
        self.k1 = _he_init(rng, 3, (width, 1, 3))
        self.b1 = np.zeros(width)
        self.k2 = _he_init(rng, 3 * width, (width, width, 3))
        self.b2 = np.zeros(width)
        self.k3 = _he_init(rng, 3 * width, (width, width, 3))
        self.b3 = np.zeros(width)
        self.w4 = np.zeros((out_dim, width * in_dim))
        self.b4 = np.zeros(out_dim)

    @staticmethod
    def _pad(x):
        return np.pad(x, ((0, 0), (0, 0), (1, 1)))

    def apply(self, x):
        y, _ = self.apply_cached(x)
        return y

    def apply_cached(self, x):
        xs = x[:, None, :]  # one input channel
        p1 = self._pad(xs)
        pre1 = _conv1d(p1, self.k1) + self.b1[None, :, None]
        c1 = np.maximum(pre1, 0.0)
        p2 = self._pad(c1)
        pre2 = _conv1d(p2, self.k2) + self.b2[None, :, None]
        c2 = np.maximum(pre2, 0.0)
        p3 = self._pad(c2)
        pre3 = _conv1d(p3, self.k3) + self.b3[None, :, None]
        c3 = np.maximum(pre3, 0.0) + c1
        flat = c3.reshape(x.shape[0], -1)
        y = flat @ self.w4.T + self.b4
        return y, (p1, pre1, c1, p2, pre2, p3, pre3, flat)

    @staticmethod
    def _conv_backward(dout, padded_in, kernels):
        batch, _, length = dout.shape
        dk = np.empty_like(kernels)
        dpad = np.zeros_like(padded_in)
        for k in range(3):
            dk[:, :, k] = np.tensordot(dout, padded_in[:, :, k:k + length],
                                       axes=([0, 2], [0, 2]))
            dpad[:, :, k:k + length] += np.tensordot(
                dout, kernels[:, :, k], axes=([1], [0])).transpose(0, 2, 1)
        db = dout.sum(axis=(0, 2))
        return dk, db, dpad[:, :, 1:-1]

    def backward(self, cache, dy):
        p1, pre1, c1, p2, pre2, p3, pre3, flat = cache
        grads = {"w4": dy.T @ flat, "b4": dy.sum(axis=0)}
        dflat = dy @ self.w4
        dc3 = dflat.reshape(pre3.shape)
        dc1 = dc3.copy()  # residual skip
        dpre3 = dc3 * (pre3 > 0.0)
        grads["k3"], grads["b3"], dc2 = self._conv_backward(dpre3, p3, self.k3)
        dpre2 = dc2 * (pre2 > 0.0)
        grads["k2"], grads["b2"], dc1_more = self._conv_backward(dpre2, p2, self.k2)
        dc1 += dc1_more
        dpre1 = dc1 * (pre1 > 0.0)
        grads["k1"], grads["b1"], dxs = self._conv_backward(dpre1, p1, self.k1)
        return dxs[:, 0, :], grads

    def params(self):
        return {"k1": self.k1, "b1": self.b1, "k2": self.k2, "b2": self.b2,
                "k3": self.k3, "b3": self.b3, "w4": self.w4, "b4": self.b4}

    def set_params(self, values):
        for name, value in values.items():
            setattr(self, name, value)


def make_coupling_net(kind: str, in_dim: int, out_dim: int, width: int, rng: Rng):
    if kind == "dense":
        return DenseCouplingNet(in_dim, out_dim, width, rng)
    if kind == "conv":
        return ConvCouplingNet(in_dim, out_dim, width, rng)
    raise FlowError(f"unknown coupling net kind {kind!r}")


class AdditiveCoupling:
    """Shift the second coordinate block by a function of the first.

    Forward adds, inverse subtracts; the Jacobian is unit triangular in
    both directions so the log-det contribution is identically zero.
    """

    def __init__(self, dim: int, net, split: int | None = None):
        self.dim = dim
        self.split = dim // 2 if split is None else split
        if not 1 <= self.split < dim:
            raise FlowError(f"coupling split {self.split} invalid for dim {dim}")
        self.net = net

    def _check(self, x):
        if x.shape[-1] != self.dim:
            raise FlowError(f"coupling dim {self.dim} does not match input dim {x.shape[-1]}")

    def forward(self, x):
        self._check(x)
        x1, x2 = x[..., :self.split], x[..., self.split:]
        return np.concatenate([x1, x2 + self.net.apply(x1)], axis=-1), 0.0

    def inverse(self, y):
        self._check(y)
        y1, y2 = y[..., :self.split], y[..., self.split:]
        return np.concatenate([y1, y2 - self.net.apply(y1)], axis=-1), 0.0

    def inverse_cached(self, y):
        self._check(y)
        y1, y2 = y[:, :self.split], y[:, self.split:]
        shift, net_cache = self.net.apply_cached(y1)
        out = np.concatenate([y1, y2 - shift], axis=-1)
        return out, 0.0, net_cache

    def backward_inverse(self, cache, dout):
        d1, d2 = dout[:, :self.split], dout[:, self.split:]
        # out2 = y2 - net(y1): push -d2 through the net.
        dy1_net, net_grads = self.net.backward(cache, -d2)
        din = np.concatenate([d1 + dy1_net, d2], axis=-1)
        return din, net_grads

    def params(self):
        return self.net.params()

    def set_params(self, values):
        self.net.set_params(values)
