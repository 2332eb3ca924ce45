"""On-disk formats for embeddings, sentence pairs, frequency ranks, sentences.

EMBD binary format (all integers little-endian):

    offset  size          field
    0       4             magic bytes b"EMBD"
    4       4             format version, uint32 (currently 1)
    8       8             row count N, uint64
    16      8             column count D, uint64
    24      4*N*D         payload, row-major IEEE-754 float32, little-endian
    ...     4             source-tag byte length L, uint32
    ...     L             source tag, UTF-8

Storage is 32-bit while all in-memory compute is 64-bit; loading upcasts and
a save/load round trip is the identity at 32-bit precision. Text formats:

* pairs: TSV with three columns ``index_a<TAB>index_b<TAB>gold``; lines
  starting with ``#`` are skipped; indices are 0-based.
* frequency: one positive integer rank per line (1 = most frequent).
* sentences: one UTF-8 sentence per line, aligned with embedding rows.

Loaders reject anything violating a type invariant with an error carrying
the offending line or offset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFileError, FormatError, ParseError

EMBD_MAGIC = b"EMBD"
EMBD_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass
class EmbeddingMatrix:
    """N x D matrix of sentence embeddings plus a short provenance tag."""

    matrix: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 2:
            raise CorruptFileError(
                f"embedding matrix must be N>=1 rows by D>=2 columns, got shape {m.shape}"
            )
        if not np.isfinite(m).all():
            raise CorruptFileError("embedding matrix contains non-finite values")
        self.matrix = m

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass
class PairDataset:
    """Aligned arrays of (index_a, index_b, gold) evaluation records."""

    index_a: np.ndarray
    index_b: np.ndarray
    gold: np.ndarray

    def __post_init__(self):
        self.index_a = np.asarray(self.index_a, dtype=np.int64)
        self.index_b = np.asarray(self.index_b, dtype=np.int64)
        self.gold = np.asarray(self.gold, dtype=np.float64)
        if not (len(self.index_a) == len(self.index_b) == len(self.gold)):
            raise ParseError("pair dataset arrays must have equal lengths")

    def __len__(self) -> int:
        return len(self.gold)

    def check_indices(self, n_rows: int):
        """Verify every index addresses a row of an N-row embedding matrix."""
        for arr in (self.index_a, self.index_b):
            if len(arr) and (arr.min() < 0 or arr.max() >= n_rows):
                bad = int(arr[(arr < 0) | (arr >= n_rows)][0])
                raise ParseError(f"pair index {bad} out of range for {n_rows} rows")


@dataclass
class FrequencyTable:
    """Per-row frequency ranks; rank 1 is the most frequent."""

    ranks: np.ndarray

    def __post_init__(self):
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        if self.ranks.ndim != 1:
            raise ParseError("frequency ranks must be a flat sequence")
        if len(self.ranks) and self.ranks.min() < 1:
            raise ParseError("frequency ranks must satisfy ranks >= 1")

    def __len__(self) -> int:
        return len(self.ranks)


@dataclass
class SentenceFile:
    """Raw sentences aligned 1:1 with embedding rows."""

    sentences: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)


def save_embeddings(path, e: EmbeddingMatrix):
    """Write an EmbeddingMatrix in the EMBD format described above."""
    data32 = e.matrix.astype("<f4")
    if not np.isfinite(data32).all():
        raise CorruptFileError("matrix value overflows 32-bit storage")
    tag = e.source_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBD_MAGIC, EMBD_VERSION, e.n_rows, e.dim))
        fh.write(data32.tobytes(order="C"))
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)


def load_embeddings(path) -> EmbeddingMatrix:
    """Load an EMBD file, validating magic, version, and payload size."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"corrupt file: {len(raw)} bytes is shorter than the header")
    magic, version, rows, cols = _HEADER.unpack_from(raw, 0)
    if magic != EMBD_MAGIC:
        raise FormatError(f"format error: bad magic {magic!r}")
    if version != EMBD_VERSION:
        raise FormatError(f"format error: unsupported version {version}")
    payload_bytes = rows * cols * 4
    offset = _HEADER.size
    if payload_bytes > len(raw) - offset - 4:
        raise CorruptFileError(
            f"corrupt file: header claims {rows}x{cols} but payload is truncated"
        )
    data = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset)
    offset += payload_bytes
    (tag_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if offset + tag_len != len(raw):
        raise CorruptFileError("corrupt file: source-tag length disagrees with file size")
    tag = raw[offset : offset + tag_len].decode("utf-8")
    matrix = data.astype(np.float64).reshape(rows, cols)
    if not np.isfinite(matrix).all():
        raise CorruptFileError("corrupt file: non-finite payload values")
    return EmbeddingMatrix(matrix=matrix, source_tag=tag)


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n").rstrip("\r")
            if stripped.startswith("#"):
                continue
            yield lineno, stripped


def load_pairs(path, n_rows: int | None = None, gold_style: str | None = None) -> PairDataset:
    """Parse a pairs TSV file.

    If ``n_rows`` is given, indices are checked against it. ``gold_style``
    may be "sts" (gold in [0, 5]) or "binary" (gold in {0, 1}) to enforce
    the corresponding invariant at load time.
    """
    idx_a, idx_b, gold = [], [], []
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        try:
            a, b = int(fields[0]), int(fields[1])
            g = float(fields[2])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if a < 0 or b < 0:
            raise ParseError(f"{path}:{lineno}: indices must be non-negative")
        if n_rows is not None and (a >= n_rows or b >= n_rows):
            raise ParseError(f"{path}:{lineno}: index out of range for {n_rows} rows")
        if not np.isfinite(g):
            raise ParseError(f"{path}:{lineno}: non-finite gold score")
        if gold_style == "sts" and not (0.0 <= g <= 5.0):
            raise ParseError(f"{path}:{lineno}: gold score {g} outside [0, 5]")
        if gold_style == "binary" and g not in (0.0, 1.0):
            raise ParseError(f"{path}:{lineno}: gold label {g} is not 0 or 1")
        idx_a.append(a)
        idx_b.append(b)
        gold.append(g)
    return PairDataset(index_a=np.array(idx_a, dtype=np.int64),
                       index_b=np.array(idx_b, dtype=np.int64),
                       gold=np.array(gold, dtype=np.float64))


def save_pairs(path, pairs: PairDataset):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# index_a\tindex_b\tgold\n")
        for a, b, g in zip(pairs.index_a, pairs.index_b, pairs.gold):
            fh.write(f"{a}\t{b}\t{g:.17g}\n")


def load_frequency(path) -> FrequencyTable:
    ranks = []
    for lineno, line in _data_lines(path):
        try:
            rank = int(line)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if rank < 1:
            raise ParseError(f"{path}:{lineno}: frequency ranks must satisfy ranks >= 1")
        ranks.append(rank)
    return FrequencyTable(ranks=np.array(ranks, dtype=np.int64))


def save_frequency(path, table: FrequencyTable):
    with open(path, "w", encoding="utf-8") as fh:
        for rank in table.ranks:
            fh.write(f"{rank}\n")


def load_sentences(path) -> SentenceFile:
    with open(path, "r", encoding="utf-8") as fh:
        sentences = fh.read().splitlines()
    return SentenceFile(sentences=sentences)


def save_sentences(path, sent: SentenceFile):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sent.sentences:
            fh.write(s + "\n")
