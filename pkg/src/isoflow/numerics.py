"""Dense linear-algebra and randomness kernels shared by all modules.

Matrices are plain ``numpy.float64`` arrays in row-major order; this module
pins the two numerical contracts everything else builds on:

* a thin SVD with orthonormal factors and a tight reconstruction guarantee
  (delegated to LAPACK's Golub-Kahan based driver via ``numpy.linalg.svd``),
* a seeded PRNG with a fixed, documented algorithm: Philox 4x64, a
  counter-based generator whose stream is identical across runs and
  platforms for a given seed. The algorithm name is part of the
  reproducibility contract of every artifact written by this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting empty or non-finite input."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise NumericsError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise NumericsError(f"{name} must be non-empty, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericsError("non-finite matrix")
    return m


@dataclass
class SvdResult:
    """Thin SVD factors: input = u_basis @ diag(singular_values) @ v_basis.T.

    u_basis is n x r and v_basis is d x r with orthonormal columns;
    singular_values are non-negative and sorted descending.
    """

    u_basis: np.ndarray
    singular_values: np.ndarray
    v_basis: np.ndarray


def svd(m) -> SvdResult:
    """Thin singular value decomposition of a dense matrix."""
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u_basis=u, singular_values=s, v_basis=vt.T)


class Rng:
    """Single-owner seeded random stream (Philox 4x64, counter-based).

    Identical seeds produce identical streams. One Rng must not be shared
    across concurrent tasks; all sampling helpers consume the stream in
    call order.
    """

    ALGORITHM = "philox4x64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def standard_normal(self, *shape) -> np.ndarray:
        return self._gen.standard_normal(shape, dtype=np.float64)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def zipf(self, exponent: float, size: int) -> np.ndarray:
        if exponent <= 1.0:
            raise NumericsError("zipf exponent must exceed 1")
        return self._gen.zipf(exponent, size=size).astype(np.int64)


def gaussian_sample(rng: Rng, n: int, d: int) -> np.ndarray:
    """n x d matrix of i.i.d. standard normal draws from ``rng``."""
    if n < 1 or d < 1:
        raise NumericsError(f"sample shape must be positive, got {n}x{d}")
    return rng.standard_normal(n, d)
