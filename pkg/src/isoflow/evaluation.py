"""Similarity evaluation: cosine, Spearman rank correlation, AUC.

Predicted similarity for a sentence pair is the cosine of the two
embedding rows; quality is the Spearman correlation against gold scores
for graded data, or the area under the ROC curve for binary entailment
labels. Ranks use the average-rank convention for ties, which also gives
AUC its count-ties-as-half behavior through the rank-sum identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvalError
from .store import EmbeddingMatrix, PairDataset


@dataclass
class EvalReport:
    metric_name: str
    value: float
    n_pairs: int
    per_pair: list | None = None  # (index_a, index_b, predicted, gold)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.sqrt(np.dot(u, u))
    nv = np.sqrt(np.dot(v, v))
    if nu == 0.0 or nv == 0.0:
        raise EvalError("zero-norm embedding")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values receive the mean of their rank positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise EvalError("undefined correlation: constant input")
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys):
        raise EvalError("spearman inputs must have equal lengths")
    if len(xs) < 3:
        raise EvalError("spearman needs at least 3 observations")
    return pearson(average_ranks(xs), average_ranks(ys))


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative; ties count
    one half. Computed by rank sums, O(n log n)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise EvalError("auc inputs must have equal lengths")
    if not np.isin(labels, (0, 1)).all():
        raise EvalError("labels must be binary")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise EvalError("single-class input: AUC undefined")
    ranks = average_ranks(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pair_cosines(e: EmbeddingMatrix, pairs: PairDataset) -> np.ndarray:
    """Cosine of the two embedding rows for every pair."""
    pairs.check_indices(e.n_rows)
    m = e.matrix
    norms = np.sqrt(np.sum(m * m, axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if len(zero):
        raise EvalError(f"zero-norm embedding at row {int(zero[0])}")
    a, b = pairs.index_a, pairs.index_b
    dots = np.sum(m[a] * m[b], axis=1)
    return np.clip(dots / (norms[a] * norms[b]), -1.0, 1.0)


def evaluate_similarity(e: EmbeddingMatrix, pairs: PairDataset,
                        keep_pairs: bool = False) -> EvalReport:
    predicted = pair_cosines(e, pairs)
    rho = spearman(predicted, pairs.gold)
    per_pair = None
    if keep_pairs:
        per_pair = list(zip(pairs.index_a.tolist(), pairs.index_b.tolist(),
                            predicted.tolist(), pairs.gold.tolist()))
    return EvalReport(metric_name="spearman", value=rho, n_pairs=len(pairs), per_pair=per_pair)


def evaluate_entailment(e: EmbeddingMatrix, pairs: PairDataset,
                        keep_pairs: bool = False) -> EvalReport:
    predicted = pair_cosines(e, pairs)
    value = auc(predicted, pairs.gold.astype(np.int64))
    per_pair = None
    if keep_pairs:
        per_pair = list(zip(pairs.index_a.tolist(), pairs.index_b.tolist(),
                            predicted.tolist(), pairs.gold.tolist()))
    return EvalReport(metric_name="auc", value=value, n_pairs=len(pairs), per_pair=per_pair)


def report_lines(report: EvalReport) -> str:
    """Machine-readable TSV: metric, raw value, pair count."""
    return f"{report.metric_name}\t{report.value:.17g}\t{report.n_pairs}\n"


def dump_pairs(path, report: EvalReport):
    if report.per_pair is None:
        raise EvalError("report carries no per-pair dump")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# index_a\tindex_b\tpredicted\tgold\n")
        for a, b, pred, gold in report.per_pair:
            fh.write(f"{a}\t{b}\t{pred:.17g}\t{gold:.17g}\n")
