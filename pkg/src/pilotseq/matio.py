"""Self-describing binary container for complex matrices.

Layout: an 8-byte magic string, two little-endian uint64 dimension words
(rows, cols), then rows*cols entries in row-major order, each entry as two
little-endian float64 words (real part, imaginary part).  The format
round-trips bit-exactly; a CSV export exists for human inspection only.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["write_cmat", "read_cmat", "export_cmat_csv"]

_MAGIC = b"PSCMAT1\n"
_HEADER = struct.Struct("<QQ")


def write_cmat(path, matrix) -> None:
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.complex128))
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    interleaved = np.empty((m.shape[0], m.shape[1], 2), dtype="<f8")
    interleaved[:, :, 0] = m.real
    interleaved[:, :, 1] = m.imag
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(m.shape[0], m.shape[1]))
        fh.write(interleaved.tobytes())


def read_cmat(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a complex-matrix container")
        rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
        payload = fh.read(rows * cols * 16)
    if len(payload) != rows * cols * 16:
        raise ValueError(f"{path}: truncated payload")
    flat = np.frombuffer(payload, dtype="<f8").reshape(rows, cols, 2)
    return (flat[:, :, 0] + 1j * flat[:, :, 1]).astype(np.complex128)


def export_cmat_csv(cmat_path, csv_path=None) -> Path:
    """Write a human-readable CSV next to (or at) the given path."""
    cmat_path = Path(cmat_path)
    m = read_cmat(cmat_path)
    out = Path(csv_path) if csv_path is not None else cmat_path.with_suffix(".csv")
    with open(out, "w") as fh:
        for row in m:
            fh.write(",".join(repr(complex(z)) for z in row))
            fh.write("\n")
    return out
