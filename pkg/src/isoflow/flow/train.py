"""Maximum-likelihood training of the flow with Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import FlowError
from ..numerics import Rng, as_matrix
from ..store import EmbeddingMatrix
from .model import FlowModel

GRAD_CLIP_NORM = 100.0


@dataclass
class ArchConfig:
    """Architecture knobs; levels x depth blocks of width-``width`` nets."""

    levels: int = 2
    depth: int = 3
    width: int = 32
    coupling: str = "dense"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: float = 1.0
    batch_size: int = 256
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise FlowError("learning_rate must be positive")
        if self.batch_size < 1:
            raise FlowError("batch_size must be >= 1")
        if self.epochs < 0:
            raise FlowError("epochs must be >= 0")


@dataclass
class TrainResult:
    model: FlowModel
    history: list = field(default_factory=list)  # (step, nll) per step


class Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            m = self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            v = self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            params[key] -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def _clip_global_norm(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


def train(data, cfg: TrainConfig = TrainConfig(), arch: ArchConfig = ArchConfig(),
          model: FlowModel | None = None) -> TrainResult:
    """Fit a flow to ``data`` by exact maximum likelihood.

    Deterministic given ``cfg.seed``: the seed drives model construction
    (permutations, net initialization) and the per-epoch shuffles, in that
    order. Actnorms initialize on the first shuffled batch; with
    ``epochs=0`` the initialized model is returned untouched. The history
    records the pre-update batch NLL for every optimizer step.

    Passing ``model`` warm-starts from an existing flow (``arch`` is then
    ignored and optimizer moments start fresh), e.g. to polish at a lower
    learning rate after a fast first stage.
    """
    matrix = data.matrix if isinstance(data, EmbeddingMatrix) else as_matrix(data, "data")
    n, dim = matrix.shape
    batch_size = min(cfg.batch_size, n)
    steps_per_epoch = (n + batch_size - 1) // batch_size
    total_steps = int(cfg.epochs * steps_per_epoch)

    rng = Rng(cfg.seed)
    if model is None:
        model = FlowModel.build(dim, levels=arch.levels, depth=arch.depth,
                                width=arch.width, coupling=arch.coupling, rng=rng)
    elif model.dim != dim:
        raise FlowError(f"model dim {model.dim} does not match data dim {dim}")
    order = rng.permutation(n)
    model.init_actnorms(matrix[order[:batch_size]])

    params = model.parameters()
    optimizer = Adam(params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    history = []
    step = 0
    while step < total_steps:
        for start in range(0, n, batch_size):
            if step >= total_steps:
                break
            batch = matrix[order[start:start + batch_size]]
            try:
                loss, grads = model.grad_nll(batch)
            except FlowError as exc:
                raise FlowError(f"step {step}: {exc}") from exc
            if not math.isfinite(loss):
                raise FlowError(f"non-finite loss at step {step}")
            _clip_global_norm(grads, GRAD_CLIP_NORM)
            optimizer.step(params, grads)
            history.append((step, loss))
            step += 1
        order = rng.permutation(n)
    return TrainResult(model=model, history=history)
