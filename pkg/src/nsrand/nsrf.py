"""Binary field files (``.nsrf``).

Layout, all little-endian::

    b"NSRF"  u32 version (=1)  u32 d  u32 n  u32 M  f64 L
    f64 samples[n][M]...[M]      component-major, row-major over the grid
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, RepresentationError
from .spectral import SpectralGrid, VectorField

MAGIC = b"NSRF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def to_bytes(u: VectorField) -> bytes:
    if not u.real:
        raise RepresentationError("NSRF stores real fields only; use hermitian pairing")
    g = u.grid
    phys = np.ascontiguousarray(u.values(), dtype="<f8")
    return _HEADER.pack(MAGIC, VERSION, g.d, u.n, g.M, g.L) + phys.tobytes(order="C")


def from_bytes(blob: bytes) -> VectorField:
    if len(blob) < _HEADER.size:
        raise ConfigError("NSRF file truncated before end of header")
    magic, version, d, n, M, L = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ConfigError(f"not an NSRF file (magic {magic!r})")
    if version != VERSION:
        raise ConfigError(f"unsupported NSRF version {version}")
    grid = SpectralGrid(d, L, M)
    count = n * M ** d
    body = blob[_HEADER.size:]
    if len(body) != 8 * count:
        raise ConfigError(f"NSRF payload has {len(body)} bytes, expected {8 * count}")
    phys = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape((n,) + grid.shape)
    return VectorField(grid, physical=phys)


def write(path, u: VectorField) -> None:
    Path(path).write_bytes(to_bytes(u))


def read(path) -> VectorField:
    return from_bytes(Path(path).read_bytes())
