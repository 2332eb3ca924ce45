"""Writer for the EMBD interchange format.

This mirrors the consumer's documented public contract byte for byte
(all integers little-endian):

    magic b"EMBD" | uint32 version=1 | uint64 rows | uint64 cols |
    row-major float32 payload | uint32 tag length | UTF-8 tag
"""

from __future__ import annotations

import struct

import numpy as np

_HEADER = struct.Struct("<4sIQQ")


def write_embd(path, matrix: np.ndarray, source_tag: str = ""):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 2:
        raise ValueError(f"EMBD needs an N>=1 by D>=2 matrix, got shape {matrix.shape}")
    data = matrix.astype("<f4")
    if not np.isfinite(data).all():
        raise ValueError("matrix contains values not representable as finite float32")
    tag = source_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"EMBD", 1, matrix.shape[0], matrix.shape[1]))
        fh.write(data.tobytes(order="C"))
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)
