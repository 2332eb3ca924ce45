"""Calibration baselines: per-dimension standardization and removal of the
leading singular directions of the centered embedding matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDimensionError, IsoflowError
from .numerics import svd
from .store import EmbeddingMatrix

_DEGENERATE_TOL = 1e-12


@dataclass
class SnParams:
    """Per-dimension mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray


def standard_normalize(e: EmbeddingMatrix) -> tuple[EmbeddingMatrix, SnParams]:
    """Standardize every column to mean 0 and population std 1."""
    m = e.matrix
    if m.shape[0] < 2:
        raise IsoflowError("standard normalization needs at least 2 rows")
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    if np.any(std <= _DEGENERATE_TOL * np.maximum(1.0, np.abs(mean))):
        bad = int(np.argmin(std))
        raise DegenerateDimensionError(f"degenerate dimension {bad}: zero variance")
    out = (m - mean) / std
    return EmbeddingMatrix(matrix=out, source_tag=e.source_tag), SnParams(mean=mean, std=std)


def natsv(e: EmbeddingMatrix, k: int) -> EmbeddingMatrix:
    """Center rows, then null the projections onto the top-k right singular
    vectors of the centered matrix."""
    m = e.matrix
    if not 0 <= k < e.dim:
        raise IsoflowError(f"k must satisfy 0 <= k < {e.dim}, got {k}")
    centered = m - m.mean(axis=0)
    if k == 0:
        return EmbeddingMatrix(matrix=centered, source_tag=e.source_tag)
    factors = svd(centered)
    top = factors.v_basis[:, :k]  # D x k
    out = centered - (centered @ top) @ top.T
    return EmbeddingMatrix(matrix=out, source_tag=e.source_tag)


def sn_natsv(e: EmbeddingMatrix, k: int) -> EmbeddingMatrix:
    """Standardize, then null the top-k singular directions of the result."""
    normalized, _ = standard_normalize(e)
    return natsv(normalized, k)
