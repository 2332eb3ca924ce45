"""Empirical probes of an embedding space.

Covers frequency-bucketed row norms and nearest-neighbor statistics,
singular-spectrum and isotropy summaries, and the lexical-vs-semantic
similarity analysis built on character-level edit distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError, IsoflowError
from .evaluation import pair_cosines, spearman
from .numerics import svd
from .store import EmbeddingMatrix, FrequencyTable, PairDataset, SentenceFile

LOW_EDIT_DISTANCE = 4  # scatter plots flag pairs at or below this distance


@dataclass
class BucketSpec:
    """Ascending rank thresholds defining half-open frequency buckets.

    Boundaries (b1, ..., bk) produce buckets [1, b1), [b1, b2), ...,
    [bk, inf). The defaults mirror the usual frequency-rank segmentation
    with an open tail bucket.
    """

    boundaries: tuple = (100, 500, 5000, 10000)

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.boundaries)
        if any(b < 1 for b in bounds) or any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise IsoflowError("bucket boundaries must be strictly ascending and >= 1")
        self.boundaries = bounds

    @property
    def n_buckets(self) -> int:
        return len(self.boundaries) + 1

    def labels(self) -> list:
        edges = (1,) + self.boundaries + ("inf",)
        return [f"[{lo},{hi})" for lo, hi in zip(edges, edges[1:])]

    def bucket_indices(self, ranks: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.boundaries), ranks, side="right")


@dataclass
class BucketTable:
    """Per-bucket counts and means; empty buckets are omitted."""

    labels: list
    counts: list
    means: list

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.means))


def _bucket_means(values, bucket_idx, spec: BucketSpec) -> BucketTable:
    labels, counts, means = [], [], []
    for b, label in enumerate(spec.labels()):
        mask = bucket_idx == b
        if not mask.any():
            continue
        labels.append(label)
        counts.append(int(mask.sum()))
        means.append(float(values[mask].mean()))
    return BucketTable(labels=labels, counts=counts, means=means)


def norm_by_bucket(e: EmbeddingMatrix, freq: FrequencyTable,
                   spec: BucketSpec = BucketSpec()) -> BucketTable:
    """Mean row L2 norm per frequency bucket."""
    if len(freq) != e.n_rows:
        raise IsoflowError(f"frequency table length {len(freq)} != {e.n_rows} rows")
    norms = np.sqrt(np.sum(e.matrix * e.matrix, axis=1))
    return _bucket_means(norms, spec.bucket_indices(freq.ranks), spec)


def _neighbor_lists(m: np.ndarray, k: int, neighbor_rule: str):
    """First k neighbor indices per row, self excluded.

    Neighbors are ordered by ascending L2 distance (rule "l2") or by
    descending dot product (rule "dot"); ties break toward the smaller
    row index via the stable sort.
    """
    n = m.shape[0]
    sq = np.sum(m * m, axis=1)
    if neighbor_rule == "l2":
        key = sq[:, None] + sq[None, :] - 2.0 * (m @ m.T)
        np.fill_diagonal(key, np.inf)
    elif neighbor_rule == "dot":
        key = -(m @ m.T)
        np.fill_diagonal(key, np.inf)
    else:
        raise IsoflowError(f"unknown neighbor rule {neighbor_rule!r}")
    order = np.argsort(key, axis=1, kind="stable")
    return order[:, :k]


def knn_stats(e: EmbeddingMatrix, freq: FrequencyTable, spec: BucketSpec,
              k: int, metric: str = "l2", neighbor_rule: str = "l2") -> BucketTable:
    """Per-bucket mean of each row's mean k-NN distance or dot product.

    ``metric`` selects what is averaged over the k neighbors (L2 distance
    or dot product); ``neighbor_rule`` selects how neighbors are chosen.
    The conventional probe picks neighbors by L2 distance for both rows.
    """
    if len(freq) != e.n_rows:
        raise IsoflowError(f"frequency table length {len(freq)} != {e.n_rows} rows")
    if not 1 <= k < e.n_rows:
        raise IsoflowError(f"k must satisfy 1 <= k < {e.n_rows}, got {k}")
    if metric not in ("l2", "dot"):
        raise IsoflowError(f"unknown knn metric {metric!r}")
    m = e.matrix
    neighbors = _neighbor_lists(m, k, neighbor_rule)
    rows = np.arange(e.n_rows)[:, None]
    if metric == "l2":
        diffs = m[rows] - m[neighbors]
        per_row = np.sqrt(np.sum(diffs * diffs, axis=2)).mean(axis=1)
    else:
        per_row = np.sum(m[rows] * m[neighbors], axis=2).mean(axis=1)
    return _bucket_means(per_row, spec.bucket_indices(freq.ranks), spec)


def singular_spectrum(e: EmbeddingMatrix) -> np.ndarray:
    """Descending singular values of the row-centered matrix."""
    if e.n_rows < 2:
        raise IsoflowError("singular spectrum needs at least 2 rows")
    centered = e.matrix - e.matrix.mean(axis=0)
    return svd(centered).singular_values


def spectral_flatness(e: EmbeddingMatrix) -> float:
    """min/max singular-value ratio of the centered matrix; 1 is isotropic."""
    spectrum = singular_spectrum(e)
    return float(spectrum[-1] / spectrum[0])


def mean_pairwise_cosine(e: EmbeddingMatrix) -> float:
    """Mean cosine over all unordered row pairs; near 0 is directionally
    uniform, near 1 is a narrow cone."""
    m = e.matrix
    norms = np.sqrt(np.sum(m * m, axis=1))
    if np.any(norms == 0.0):
        raise EvalError(f"zero-norm embedding at row {int(np.flatnonzero(norms == 0)[0])}")
    unit = m / norms[:, None]
    n = m.shape[0]
    total = np.sum(unit.sum(axis=0) ** 2) - n  # sum of off-diagonal Gram entries
    return float(total / (n * (n - 1)))


@dataclass
class DiagnosticsReport:
    """Bundle of the anisotropy probes for one embedding matrix.

    ``norm_buckets`` and the k-NN tables are present only when a frequency
    table was supplied; k-NN tables are keyed by k.
    """

    singular_values: np.ndarray
    mean_pairwise_cosine: float
    spectral_flatness: float
    norm_buckets: BucketTable | None = None
    knn_l2: dict = field(default_factory=dict)
    knn_dot: dict = field(default_factory=dict)


def build_report(e: EmbeddingMatrix, freq: FrequencyTable | None = None,
                 spec: BucketSpec = BucketSpec(), ks=(3, 5, 7),
                 neighbor_rule: str = "l2") -> DiagnosticsReport:
    spectrum = singular_spectrum(e)
    report = DiagnosticsReport(
        singular_values=spectrum,
        mean_pairwise_cosine=mean_pairwise_cosine(e),
        spectral_flatness=float(spectrum[-1] / spectrum[0]),
    )
    if freq is not None:
        report.norm_buckets = norm_by_bucket(e, freq, spec)
        for k in ks:
            report.knn_l2[k] = knn_stats(e, freq, spec, k, metric="l2",
                                         neighbor_rule=neighbor_rule)
            report.knn_dot[k] = knn_stats(e, freq, spec, k, metric="dot",
                                          neighbor_rule=neighbor_rule)
    return report


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit-cost edits over Unicode scalar values."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


@dataclass
class LexicalReport:
    """Correlations between similarity scores and lexical (edit) distance."""

    rho_predicted_edit: float
    rho_gold_edit: float
    rho_predicted_gold: float
    # (index_a, index_b, predicted, edit_distance, low_edit_flag) per pair
    records: list = field(default_factory=list)


def lexical_correlation(sentences: SentenceFile, pairs: PairDataset,
                        predicted) -> LexicalReport:
    predicted = np.asarray(predicted, dtype=np.float64)
    if len(predicted) != len(pairs):
        raise IsoflowError("predicted similarities must align with pairs")
    n_needed = int(max(pairs.index_a.max(), pairs.index_b.max())) + 1 if len(pairs) else 0
    if len(sentences) < n_needed:
        raise IsoflowError(f"sentence file has {len(sentences)} lines, pairs need {n_needed}")
    distances = np.array([
        edit_distance(sentences.sentences[a], sentences.sentences[b])
        for a, b in zip(pairs.index_a, pairs.index_b)
    ], dtype=np.float64)
    records = [
        (int(a), int(b), float(p), int(d), bool(d <= LOW_EDIT_DISTANCE))
        for a, b, p, d in zip(pairs.index_a, pairs.index_b, predicted, distances)
    ]
    return LexicalReport(
        rho_predicted_edit=spearman(predicted, distances),
        rho_gold_edit=spearman(pairs.gold, distances),
        rho_predicted_gold=spearman(predicted, pairs.gold),
        records=records,
    )


def dump_scatter(path, report: LexicalReport):
    """Plot-ready TSV of (pair, similarity, edit distance, low-edit flag)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# index_a\tindex_b\tsimilarity\tedit_distance\tlow_edit_flag\n")
        for a, b, sim, dist, low in report.records:
            fh.write(f"{a}\t{b}\t{sim:.17g}\t{dist}\t{int(low)}\n")


def predicted_similarities(e: EmbeddingMatrix, pairs: PairDataset) -> np.ndarray:
    """Cosine similarities for the lexical analysis, row-aligned with pairs."""
    return pair_cosines(e, pairs)
