"""
Binary snapshot files for spectral fields.

Layout (little-endian)::

    magic    4 bytes  b"OLDB"
    version  u32      1
    dim      u32
    n        u32
    rank     u32      0 scalar, 1 vector, 2 tensor
    flags    u32      bit 0 symmetric, bit 1 divergence-free, bit 2 real
    data     float64  interleaved (re, im) pairs

Coefficients are written in row-major ``(component, xi_1, ..., xi_d)``
order; tensor components are ``(i, j)`` row-major and each wavenumber axis
uses FFT ordering ``0, 1, ..., n/2-1, -n/2, ..., -1``.
"""

import struct

import numpy as np

from .errors import ConfigurationError, InputError
from .spectral import PeriodicGrid, SpectralField

MAGIC = b"OLDB"
VERSION = 1
_HEADER = struct.Struct("<4s5I")

FLAG_SYMMETRIC = 1
FLAG_DIVERGENCE_FREE = 2
FLAG_REAL = 4


def encode(field):
    flags = (
        FLAG_SYMMETRIC * field.symmetric
        | FLAG_DIVERGENCE_FREE * field.divergence_free
        | FLAG_REAL * field.real
    )
    head = _HEADER.pack(MAGIC, VERSION, field.grid.dim, field.grid.n, field.rank, flags)
    body = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    return head + body


def decode(buf):
    if len(buf) < _HEADER.size:
        raise InputError("snapshot shorter than its header")
    magic, version, dim, n, rank, flags = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise InputError(f"bad magic {magic!r}")
    if version != VERSION:
        raise InputError(f"unsupported snapshot version {version}")
    if rank > 2:
        raise InputError(f"bad snapshot header: rank {rank}")
    try:
        grid = PeriodicGrid(dim, n)
    except ConfigurationError as exc:
        raise InputError(f"bad snapshot header: {exc}") from exc
    shape = (dim,) * rank + grid.shape
    expected = _HEADER.size + 16 * int(np.prod(shape))
    if len(buf) != expected:
        raise InputError(f"snapshot has {len(buf)} bytes, expected {expected}")
    coeffs = np.frombuffer(buf, dtype="<c16", offset=_HEADER.size).reshape(shape)
    return SpectralField(
        grid,
        coeffs.astype(complex),
        symmetric=bool(flags & FLAG_SYMMETRIC),
        divergence_free=bool(flags & FLAG_DIVERGENCE_FREE),
        real=bool(flags & FLAG_REAL),
    )


def write_snapshot(path, field):
    with open(path, "wb") as fh:
        fh.write(encode(field))


def read_snapshot(path):
    with open(path, "rb") as fh:
        return decode(fh.read())
