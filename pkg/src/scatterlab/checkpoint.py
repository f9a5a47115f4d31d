"""Binary field checkpoints.

Layout (little endian)::

    magic     4s   b"DSPL"
    version   u32
    n         u32
    L         f64
    time      f64
    eq tag    u8   0 linear, 1 nls, 2 hartree
    exponent  f64  p or gamma (0 for linear)
    payload   n*n complex values as (re, im) f64 pairs, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .propagator import EquationSpec

MAGIC = b"DSPL"
VERSION = 1
HEADER = struct.Struct("<4sIIddBd")
_TAGS = {"linear": 0, "nls": 1, "hartree": 2}
_KINDS = {v: k for k, v in _TAGS.items()}


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CheckpointHeader:
    n: int
    L: float
    time: float
    kind: str
    exponent: float
    version: int = VERSION

    @property
    def payload_bytes(self) -> int:
        return 16 * self.n * self.n

    def equation(self) -> EquationSpec:
        if self.kind == "nls":
            return EquationSpec.nls(self.exponent)
        if self.kind == "hartree":
            return EquationSpec.hartree(self.exponent)
        return EquationSpec.linear()

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.n, self.L, self.time, _TAGS[self.kind], self.exponent)


def encode(f: np.ndarray, L: float, time: float, eq: EquationSpec) -> bytes:
    f = np.asarray(f)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise CheckpointError(f"expected a square field, got shape {f.shape}")
    head = CheckpointHeader(f.shape[0], float(L), float(time), eq.kind, float(eq.exponent or 0.0))
    return head.pack() + np.ascontiguousarray(f, dtype="<c16").tobytes()


def decode(blob: bytes) -> tuple[CheckpointHeader, np.ndarray]:
    if len(blob) < HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, n, L, time, tag, exponent = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    if tag not in _KINDS:
        raise CheckpointError(f"unknown equation tag {tag}")
    head = CheckpointHeader(n, L, time, _KINDS[tag], exponent, version)
    payload = blob[HEADER.size :]
    if len(payload) != head.payload_bytes:
        raise CheckpointError(f"payload is {len(payload)} bytes, expected {head.payload_bytes}")
    f = np.frombuffer(payload, dtype="<c16").reshape(n, n).astype(complex)
    return head, f


def write_checkpoint(path, f: np.ndarray, L: float, time: float, eq: EquationSpec) -> Path:
    path = Path(path)
    path.write_bytes(encode(f, L, time, eq))
    return path


def read_checkpoint(path) -> tuple[CheckpointHeader, np.ndarray]:
    return decode(Path(path).read_bytes())
