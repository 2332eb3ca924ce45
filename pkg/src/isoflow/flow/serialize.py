"""Versioned binary container for flow models.

Layout (all integers little-endian, all floats IEEE-754 float64 LE):

    magic  b"FLOW"
    uint32 format version (currently 1)
    uint32 model dim D
    uint32 number of layers K
    K layer records, each starting with a uint8 type tag:

    tag 0  actnorm:      uint8 initialized, D float64 scale, D float64 bias
    tag 1  permutation:  D uint32 indices (the u -> z gather order)
    tag 2  dense coupling:
           uint32 split d, uint32 out (D - d), uint32 width W, then
           w1 (W*d), b1 (W), w2 (W*W), b2 (W), w3 (W*W), b3 (W),
           w4 (out*W), b4 (out) as row-major float64
    tag 3  conv coupling:
           uint32 split d, uint32 out, uint32 channels C, then
           k1 (C*1*3), b1 (C), k2 (C*C*3), b2 (C), k3 (C*C*3), b3 (C),
           w4 (out*C*d), b4 (out) as row-major float64

Serialization is byte-deterministic: identical models produce identical
files.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CorruptFileError, FormatError, FlowError
from .layers import ActNorm, AdditiveCoupling, ConvCouplingNet, DenseCouplingNet, Permutation
from .model import FlowModel

FLOW_MAGIC = b"FLOW"
FLOW_VERSION = 1


def _f64(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _net_blob(net):
    order = ("1", "2", "3")
    parts = [struct.pack("<III", net.in_dim, net.out_dim, net.width)]
    prefix = "w" if isinstance(net, DenseCouplingNet) else "k"
    for i in order:
        parts.append(_f64(getattr(net, prefix + i)))
        parts.append(_f64(getattr(net, "b" + i)))
    parts.append(_f64(net.w4))
    parts.append(_f64(net.b4))
    return b"".join(parts)


def save_model(path, model: FlowModel):
    parts = [FLOW_MAGIC, struct.pack("<III", FLOW_VERSION, model.dim, len(model.layers))]
    for layer in model.layers:
        if isinstance(layer, ActNorm):
            parts.append(struct.pack("<BB", 0, int(layer.initialized)))
            parts.append(_f64(layer.scale))
            parts.append(_f64(layer.bias))
        elif isinstance(layer, Permutation):
            parts.append(struct.pack("<B", 1))
            parts.append(np.ascontiguousarray(layer.perm, dtype="<u4").tobytes())
        elif isinstance(layer, AdditiveCoupling):
            tag = 2 if isinstance(layer.net, DenseCouplingNet) else 3
            parts.append(struct.pack("<B", tag))
            parts.append(_net_blob(layer.net))
        else:
            raise FlowError(f"cannot serialize layer type {type(layer).__name__}")
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise CorruptFileError("corrupt file: truncated model record")
        values = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return values

    def floats(self, count, shape):
        size = 8 * count
        if self.pos + size > len(self.raw):
            raise CorruptFileError("corrupt file: truncated model parameters")
        arr = np.frombuffer(self.raw, dtype="<f8", count=count, offset=self.pos)
        self.pos += size
        return arr.astype(np.float64).reshape(shape)

    def uints(self, count):
        size = 4 * count
        if self.pos + size > len(self.raw):
            raise CorruptFileError("corrupt file: truncated permutation")
        arr = np.frombuffer(self.raw, dtype="<u4", count=count, offset=self.pos)
        self.pos += size
        return arr.astype(np.int64)


def _read_net(reader, conv):
    d, out, width = reader.take("<III")
    cls = ConvCouplingNet if conv else DenseCouplingNet
    net = cls.__new__(cls)
    net.in_dim, net.out_dim, net.width = d, out, width
    if conv:
        net.k1 = reader.floats(width * 3, (width, 1, 3))
        net.b1 = reader.floats(width, (width,))
        net.k2 = reader.floats(width * width * 3, (width, width, 3))
        net.b2 = reader.floats(width, (width,))
        net.k3 = reader.floats(width * width * 3, (width, width, 3))
        net.b3 = reader.floats(width, (width,))
        net.w4 = reader.floats(out * width * d, (out, width * d))
    else:
        net.w1 = reader.floats(width * d, (width, d))
        net.b1 = reader.floats(width, (width,))
        net.w2 = reader.floats(width * width, (width, width))
        net.b2 = reader.floats(width, (width,))
        net.w3 = reader.floats(width * width, (width, width))
        net.b3 = reader.floats(width, (width,))
        net.w4 = reader.floats(out * width, (out, width))
    net.b4 = reader.floats(out, (out,))
    return d, net


def load_model(path) -> FlowModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != FLOW_MAGIC:
        raise FormatError(f"format error: bad magic {raw[:4]!r}")
    reader = _Reader(raw)
    reader.pos = 4
    version, dim, n_layers = reader.take("<III")
    if version != FLOW_VERSION:
        raise FormatError(f"format error: unsupported model version {version}")
    layers = []
    for _ in range(n_layers):
        (tag,) = reader.take("<B")
        if tag == 0:
            (initialized,) = reader.take("<B")
            layer = ActNorm(dim)
            layer.scale = reader.floats(dim, (dim,))
            layer.bias = reader.floats(dim, (dim,))
            layer.initialized = bool(initialized)
            layers.append(layer)
        elif tag == 1:
            layers.append(Permutation(reader.uints(dim)))
        elif tag in (2, 3):
            split, net = _read_net(reader, conv=tag == 3)
            layers.append(AdditiveCoupling(dim, net, split))
        else:
            raise CorruptFileError(f"corrupt file: unknown layer tag {tag}")
    if reader.pos != len(raw):
        raise CorruptFileError("corrupt file: trailing bytes after last layer")
    return FlowModel(dim, layers)
