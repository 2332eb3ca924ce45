"""Deterministic generator of anisotropic, frequency-biased embeddings.

The construction plants a recoverable similarity structure: latent rows
are isotropic Gaussian, gold similarity is an affine map of latent cosine,
and the observed rows distort the latent space two ways:

* a fixed linear map with a geometric singular-value profile (condition
  number ``condition_number``, largest singular value 1) stretches some
  directions and crushes others;
* a rank-dependent offset ``c * ln(rank)`` along one fixed unit direction
  pushes rare rows away from the origin, so raw norms grow with rarity
  and raw cosines are contaminated by frequency.

Calibration quality is then measured as how much of the planted latent
ranking an embedding transform recovers.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .errors import IsoflowError
from .evaluation import cosine
from .numerics import Rng
from .store import EmbeddingMatrix, FrequencyTable, PairDataset, SentenceFile


@dataclass
class SynthConfig:
    n_sentences: int = 2000
    latent_dim: int = 16
    observed_dim: int = 32
    condition_number: float = 100.0
    frequency_shift_strength: float = 1.5
    noise_std: float = 0.01
    zipf_exponent: float = 1.1
    n_pairs: int = 1000
    seed: int = 0
    with_sentences: bool = True

    def __post_init__(self):
        if self.latent_dim > self.observed_dim:
            raise IsoflowError("latent_dim must not exceed observed_dim")
        if self.latent_dim < 1 or self.n_sentences < 2:
            raise IsoflowError("need latent_dim >= 1 and n_sentences >= 2")
        if self.condition_number < 1.0:
            raise IsoflowError("condition_number must be >= 1")
        if self.frequency_shift_strength < 0 or self.noise_std < 0:
            raise IsoflowError("strengths must be >= 0")
        if self.n_pairs < 1:
            raise IsoflowError("n_pairs must be >= 1")


@dataclass
class SynthData:
    embeddings: EmbeddingMatrix
    pairs: PairDataset
    frequency: FrequencyTable
    sentences: SentenceFile | None
    latent: np.ndarray


def gold_oracle(z_a, z_b) -> float:
    """Planted gold score: 2.5 * (1 + cosine), ranged [0, 5]."""
    return 2.5 * (1.0 + cosine(z_a, z_b))


def _orthonormal_columns(rng: Rng, rows: int, cols: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal(rows, cols))
    return q


def _mixing_matrix(rng: Rng, cfg: SynthConfig) -> np.ndarray:
    # Geometric singular profile, largest value 1, smallest 1/kappa.
    lat = cfg.latent_dim
    if lat == 1:
        svals = np.ones(1)
    else:
        svals = np.geomspace(1.0, 1.0 / cfg.condition_number, lat)
    left = _orthonormal_columns(rng, cfg.observed_dim, lat)
    right = _orthonormal_columns(rng, lat, lat)
    return left @ np.diag(svals) @ right.T


_SENTENCE_LEN = 44
_TEMPLATE_CAP = 40


def _sentence_for(rank: int, junk: str) -> str:
    """Toy sentence whose lexical overlap mirrors the frequency geometry.

    Every sentence is ``_SENTENCE_LEN`` characters: a shared template
    prefix whose length grows with ln(rank), padded with per-row random
    junk. Edit distance between two sentences is then roughly the length
    of the non-shared tail, i.e. large unless both rows are rare, which is
    the same pair structure the frequency shift imprints on raw cosines.
    """
    length = min(1 + int(round(4.0 * np.log(rank))), _TEMPLATE_CAP)
    alphabet = string.ascii_lowercase
    template = (alphabet * (_TEMPLATE_CAP // len(alphabet) + 1))[:length]
    return template + junk[: _SENTENCE_LEN - length]


def generate(cfg: SynthConfig) -> SynthData:
    """Deterministic sample of (embeddings, pairs, frequency, sentences).

    The stream is consumed in a fixed order (latents, ranks, mixing map,
    shift direction, noise, pairs, sentence suffixes), so identical
    configs produce bit-identical outputs.
    """
    rng = Rng(cfg.seed)
    n = cfg.n_sentences

    latent = rng.standard_normal(n, cfg.latent_dim)
    ranks = rng.zipf(cfg.zipf_exponent, n)
    mixing = _mixing_matrix(rng, cfg)
    direction = rng.standard_normal(cfg.observed_dim)
    direction /= np.sqrt(np.dot(direction, direction))
    noise = rng.standard_normal(n, cfg.observed_dim) * cfg.noise_std

    shifts = cfg.frequency_shift_strength * np.log(ranks.astype(np.float64))
    observed = latent @ mixing.T + shifts[:, None] * direction[None, :] + noise

    max_pairs = n * (n - 1) // 2
    if cfg.n_pairs > max_pairs:
        raise IsoflowError(f"n_pairs {cfg.n_pairs} exceeds the {max_pairs} distinct pairs")
    seen = set()
    idx_a, idx_b, gold = [], [], []
    while len(seen) < cfg.n_pairs:
        a = int(rng.integers(0, n))
        b = int(rng.integers(0, n))
        if a == b:
            continue
        if a > b:
            a, b = b, a
        if (a, b) in seen:
            continue
        seen.add((a, b))
        idx_a.append(a)
        idx_b.append(b)
        gold.append(gold_oracle(latent[a], latent[b]))
    pairs = PairDataset(index_a=np.array(idx_a), index_b=np.array(idx_b),
                        gold=np.array(gold))

    sentences = None
    if cfg.with_sentences:
        letters = string.ascii_lowercase
        junk_idx = rng.integers(0, len(letters), size=(n, _SENTENCE_LEN))
        sentences = SentenceFile(sentences=[
            _sentence_for(int(r), "".join(letters[i] for i in row))
            for r, row in zip(ranks, junk_idx)
        ])

    embeddings = EmbeddingMatrix(matrix=observed, source_tag=f"synth-seed{cfg.seed}")
    return SynthData(embeddings=embeddings, pairs=pairs,
                     frequency=FrequencyTable(ranks=ranks),
                     sentences=sentences, latent=latent)
