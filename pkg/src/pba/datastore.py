"""Dataset loading and empirical second-order statistics.

Two on-disk formats are supported: a plain numeric CSV (one sample per row)
and PBADATA, a little-endian binary dump::

    b"PBADATA\\0"  uint32 n  uint32 d  float64[n*d]  (row-major)
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

PBADATA_MAGIC = b"PBADATA\x00"
_HEADER = struct.Struct("<8sII")


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    samples: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 2:
            raise FormatError(f"samples must be 2-D, got shape {x.shape}")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise FormatError(f"dataset must have n >= 1 and d >= 1, got n={x.shape[0]} d={x.shape[1]}")
        if not np.all(np.isfinite(x)):
            r, c = np.argwhere(~np.isfinite(x))[0]
            raise FormatError(f"non-finite value at row {r + 1}, column {c + 1}")
        object.__setattr__(self, "samples", _frozen(x))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Mean, covariance of the centered data and per-dimension power ``P``."""

    mean: np.ndarray
    K: np.ndarray
    P: float

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def load_csv(path) -> Dataset:
    rows = []
    width = None
    with open(path, newline="") as fh:
        lines = list(csv.reader(fh))
    # trailing blank lines are tolerated, interior ones are not
    while lines and not any(cell.strip() for cell in lines[-1]):
        lines.pop()
    for lineno, cells in enumerate(lines, start=1):
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FormatError(f"ragged row at line {lineno}: expected {width} columns, got {len(cells)}")
        row = []
        for col, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise FormatError(f"unparseable cell {cell!r} at line {lineno}, column {col}") from None
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: empty file (n=0)")
    return Dataset(np.array(rows, dtype=np.float64))


def load_f64bin(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, n, d = _HEADER.unpack_from(raw)
    if magic != PBADATA_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    need = n * d * 8
    payload = raw[_HEADER.size:]
    if len(payload) < need:
        raise FormatError(f"{path}: truncated payload, expected {need} bytes, got {len(payload)}")
    x = np.frombuffer(payload, dtype="<f8", count=n * d).reshape(n, d)
    return Dataset(x)


def write_f64bin(samples, path) -> None:
    x = np.ascontiguousarray(samples, dtype="<f8")
    if x.ndim != 2:
        raise FormatError("samples must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PBADATA_MAGIC, x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def write_csv(samples, path) -> None:
    x = np.asarray(samples, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in x:
            w.writerow([repr(float(v)) for v in row])


def load(path) -> Dataset:
    """Load either format, sniffing the PBADATA magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(PBADATA_MAGIC))
    if head == PBADATA_MAGIC:
        return load_f64bin(path)
    return load_csv(path)


def read_samples(path) -> np.ndarray:
    """Like :func:`load` but also accepts a PBADATA file with n=0."""
    raw = Path(path).read_bytes()
    if raw[: len(PBADATA_MAGIC)] == PBADATA_MAGIC and len(raw) >= _HEADER.size:
        _, n, d = _HEADER.unpack_from(raw)
        if n == 0:
            return np.zeros((0, d))
    return load(path).samples


def fit_stats(data: Dataset) -> CovarianceModel:
    x = data.samples
    mean = x.mean(axis=0)
    xc = x - mean
    K = xc.T @ xc / data.n
    K = 0.5 * (K + K.T)
    return CovarianceModel(mean=_frozen(mean), K=_frozen(K), P=float(np.trace(K) / data.d))
