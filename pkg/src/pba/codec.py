"""Fixed-rate transform codec: model fitting, record packing, file formats.

Encoding a sample ``x`` (index ``j``) computes latents
``l_i = s_i * u_i . (x - mean)`` and quantizes each coded component with
its own clamped dithered quantizer, dither ``dither(seed, j, i)``.  Indices
are packed MSB-first in component order and zero-padded to a whole byte, so
every record of a model has the same length.  Decoding maps indices back to
codebook points ``y_i`` and returns ``mean + sum_i t_i y_i u_i``, with
``t_i = sigma_i^2 s_i / (v_i + sigma^2)`` the linear least-squares decoder.

Model file (PBAM, little-endian)::

    b"PBAM" u32 version=1 u32 d f64 a f64 sigma2 u64 seed
    f64 mean[d] f64 U[d*d] (column-major) f64 s[d] f64 v[d] f64 t[d] u8 bits[d]

Container file (PBAC)::

    b"PBAC" u32 version=1 sha256(model file)[32] u64 n u32 total_bits
    n records of ceil(total_bits / 8) bytes
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import allocator, quantizer
from .allocator import AllocatorConfig
from .datastore import CovarianceModel, Dataset, fit_stats
from .errors import FormatError, ModelMismatchError, PbaError
from .spectral import Spectrum, eigendecompose

MODEL_MAGIC = b"PBAM"
CONTAINER_MAGIC = b"PBAC"
VERSION = 1
_MODEL_HEAD = struct.Struct("<4sIIddQ")
_CONTAINER_HEAD = struct.Struct("<4sI32sQI")
CONTAINER_HEADER_SIZE = _CONTAINER_HEAD.size


def _ro(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PbaModel:
    mean: np.ndarray
    U: np.ndarray
    s: np.ndarray
    v: np.ndarray
    t: np.ndarray
    bits: np.ndarray
    a: float = allocator.DEFAULT_A
    sigma2: float = allocator.DEFAULT_SIGMA2
    seed: int = 0

    def __post_init__(self):
        d = np.asarray(self.mean).shape[0]
        for name in ("mean", "U", "s", "v", "t"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        object.__setattr__(self, "bits", _ro(self.bits, np.uint8))
        if self.U.shape != (d, d) or any(getattr(self, f).shape != (d,) for f in ("s", "v", "t", "bits")):
            raise FormatError("inconsistent model array shapes")
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @property
    def coded(self) -> np.ndarray:
        return np.flatnonzero(self.bits > 0)

    @property
    def total_bits(self) -> int:
        return int(self.bits.astype(np.int64).sum())

    @property
    def record_len(self) -> int:
        return (self.total_bits + 7) // 8

    @property
    def rate_bits_per_dim(self) -> float:
        return self.total_bits / self.d

    def spec(self, i) -> quantizer.QuantSpec:
        return quantizer.QuantSpec(a=self.a, v=float(self.v[i]), bits=int(self.bits[i]))

    def to_bytes(self) -> bytes:
        return serialize_model(self)

    def hash(self) -> bytes:
        return hashlib.sha256(serialize_model(self)).digest()


# -- fitting ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Design:
    """Everything computed from training data before quantizer geometry."""

    stats: CovarianceModel
    spectrum: Spectrum
    proj_var: np.ndarray      # empirical variance of u_i . (x - mean)

    @classmethod
    def from_data(cls, data: Dataset):
        if data.n < 2:
            raise PbaError(f"need at least 2 training samples, got {data.n}")
        stats = fit_stats(data)
        spectrum = eigendecompose(stats.K)
        proj = (data.samples - stats.mean) @ spectrum.eigvecs
        return cls(stats=stats, spectrum=spectrum, proj_var=proj.var(axis=0))

    def build(self, alloc: allocator.Allocation, a, sigma2, seed, empirical=True) -> PbaModel:
        s = alloc.s
        v = s * s * self.proj_var if empirical else alloc.v
        bits = np.array([quantizer.make_spec(a, vi).bits if si > 0 else 0 for si, vi in zip(s, v)])
        w = np.maximum(self.spectrum.eigvals, 0.0)
        t = w * s / (v + sigma2)
        return PbaModel(mean=self.stats.mean, U=self.spectrum.eigvecs, s=s, v=v, t=t, bits=bits,
                        a=a, sigma2=sigma2, seed=seed)

    def allocate(self, cfg: AllocatorConfig) -> allocator.Allocation:
        return allocator.pba_allocate(self.spectrum, cfg)


def fit(data: Dataset, cfg: AllocatorConfig, seed: int = 0) -> PbaModel:
    """Train a PBA model; ``cfg.lam`` is the reduced multiplier (``lam_true / alpha``)."""
    design = Design.from_data(data)
    return design.build(design.allocate(cfg), cfg.a, cfg.sigma2, seed)


def fit_pca(data: Dataset, k: int, gain_bits: int = 16, a: float = allocator.DEFAULT_A,
            sigma2: float = allocator.DEFAULT_SIGMA2, seed: int = 0) -> PbaModel:
    """PCA baseline: top ``k`` components at ``gain_bits`` bits, the rest dropped.

    Latent variances are the design values (not re-estimated) so every kept
    component lands on exactly ``gain_bits`` bits.
    """
    design = Design.from_data(data)
    alloc = allocator.pca_allocate(design.spectrum, k, gain_bits, a=a, sigma2=sigma2)
    return design.build(alloc, a, sigma2, seed, empirical=False)


def search_lambda(design: Design, target_bits_per_dim: float, a=allocator.DEFAULT_A,
                  sigma2=allocator.DEFAULT_SIGMA2, iters: int = 80) -> AllocatorConfig:
    """Smallest ``lam_true`` whose realized rate does not exceed the target.

    Realized rate is a step function of lambda (bit widths are floored), so
    this maximizes realized bits/dim subject to the target.
    """
    d = design.spectrum.d
    probe = AllocatorConfig(lam=1.0, a=a, sigma2=sigma2)
    w1 = max(float(design.spectrum.eigvals[0]), 0.0)
    hi = max(w1, np.finfo(float).tiny) * probe.alpha / (4.0 * (probe.alpha - 1.0))
    scale = max(float(np.trace(design.stats.K)), np.finfo(float).tiny)
    lo = 1e-8 * scale

    def rate(lam_true):
        cfg = AllocatorConfig.from_true_lambda(lam_true, a, sigma2)
        return design.build(design.allocate(cfg), a, sigma2, 0).total_bits / d, cfg

    r_lo, cfg_lo = rate(lo)
    if r_lo <= target_bits_per_dim:
        return cfg_lo
    lo_l, hi_l = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (lo_l + hi_l)
        if rate(math.exp(mid))[0] <= target_bits_per_dim:
            hi_l = mid
        else:
            lo_l = mid
    return rate(math.exp(hi_l))[1]


def fit_target_bits(data: Dataset, target_bits_per_dim: float, a=allocator.DEFAULT_A,
                    sigma2=allocator.DEFAULT_SIGMA2, seed: int = 0):
    design = Design.from_data(data)
    cfg = search_lambda(design, target_bits_per_dim, a, sigma2)
    return design.build(design.allocate(cfg), a, sigma2, seed), cfg


# -- encode / decode -------------------------------------------------------

def _dithers(model: PbaModel, sample_indices, per_sample=True):
    j = np.asarray(sample_indices, dtype=np.uint64)
    if not per_sample:
        j = np.zeros_like(j)
    comps = model.coded.astype(np.uint64)
    return np.asarray(quantizer.dither(model.seed, j[:, None], comps[None, :])).reshape(j.size, comps.size)


def encode_indices(model: PbaModel, X, start_index: int = 0, per_sample_dither: bool = True) -> np.ndarray:
    """Codebook ranks, shape ``(n, n_coded)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.d:
        raise PbaError(f"dimension mismatch: model has d={model.d}, input has {X.shape[1]}")
    coded = model.coded
    lat = ((X - model.mean) @ model.U[:, coded]) * model.s[coded]
    U = _dithers(model, np.arange(start_index, start_index + X.shape[0]), per_sample_dither)
    idx = np.empty(lat.shape, dtype=np.int64)
    for c, i in enumerate(coded):
        idx[:, c] = quantizer.q_cd(model.spec(i), U[:, c], lat[:, c])
    return idx


def pack(model: PbaModel, idx) -> np.ndarray:
    """Pack ranks into fixed-length records, shape ``(n, record_len)`` uint8."""
    idx = np.asarray(idx, dtype=np.int64)
    n = idx.shape[0]
    cols = []
    for c, i in enumerate(model.coded):
        b = int(model.bits[i])
        shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
        cols.append(((idx[:, c:c + 1] >> shifts) & 1).astype(np.uint8))
    if not cols:
        return np.zeros((n, 0), dtype=np.uint8)
    return np.packbits(np.concatenate(cols, axis=1), axis=1)


def unpack(model: PbaModel, records) -> np.ndarray:
    rec = np.asarray(records, dtype=np.uint8)
    if rec.ndim == 1:
        rec = rec[None, :]
    if rec.shape[1] != model.record_len:
        raise FormatError(f"record length {rec.shape[1]} does not match model ({model.record_len} bytes)")
    bitmat = np.unpackbits(rec, axis=1)[:, : model.total_bits].astype(np.int64)
    out = np.empty((rec.shape[0], model.coded.size), dtype=np.int64)
    pos = 0
    for c, i in enumerate(model.coded):
        b = int(model.bits[i])
        weights = np.int64(1) << np.arange(b - 1, -1, -1, dtype=np.int64)
        out[:, c] = bitmat[:, pos:pos + b] @ weights
        pos += b
    return out


def reconstruct_latents(model: PbaModel, idx, start_index: int = 0, per_sample_dither: bool = True):
    idx = np.asarray(idx, dtype=np.int64)
    U = _dithers(model, np.arange(start_index, start_index + idx.shape[0]), per_sample_dither)
    y = np.empty(idx.shape)
    for c, i in enumerate(model.coded):
        y[:, c] = quantizer.q_cd_prime(model.spec(i), U[:, c], idx[:, c])
    return y


def decode_indices(model: PbaModel, idx, start_index: int = 0, per_sample_dither: bool = True):
    y = reconstruct_latents(model, idx, start_index, per_sample_dither)
    coded = model.coded
    return model.mean + (y * model.t[coded]) @ model.U[:, coded].T


def encode(model: PbaModel, X, start_index: int = 0, per_sample_dither: bool = True) -> np.ndarray:
    return pack(model, encode_indices(model, X, start_index, per_sample_dither))


def decode(model: PbaModel, records, start_index: int = 0, per_sample_dither: bool = True) -> np.ndarray:
    return decode_indices(model, unpack(model, records), start_index, per_sample_dither)


def encode_sample(model: PbaModel, sample_index: int, x, per_sample_dither: bool = True) -> bytes:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise PbaError(f"dimension mismatch: model has d={model.d}, sample has shape {x.shape}")
    return encode(model, x[None, :], sample_index, per_sample_dither)[0].tobytes()


def decode_sample(model: PbaModel, sample_index: int, record: bytes, per_sample_dither: bool = True) -> np.ndarray:
    rec = np.frombuffer(bytes(record), dtype=np.uint8)
    if rec.size != model.record_len:
        raise FormatError(f"truncated record: expected {model.record_len} bytes, got {rec.size}")
    return decode(model, rec[None, :], sample_index, per_sample_dither)[0]


# -- model file ------------------------------------------------------------

def serialize_model(model: PbaModel) -> bytes:
    parts = [_MODEL_HEAD.pack(MODEL_MAGIC, VERSION, model.d, model.a, model.sigma2, model.seed)]
    for arr in (model.mean, model.U.ravel(order="F"), model.s, model.v, model.t):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    parts.append(model.bits.astype(np.uint8).tobytes())
    return b"".join(parts)


def deserialize_model(raw: bytes) -> PbaModel:
    if len(raw) < _MODEL_HEAD.size:
        raise FormatError("truncated model header")
    magic, version, d, a, sigma2, seed = _MODEL_HEAD.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad model magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    need = _MODEL_HEAD.size + 8 * (4 * d + d * d) + d
    if len(raw) != need:
        raise FormatError(f"model payload is {len(raw)} bytes, expected {need}")
    f = np.frombuffer(raw, dtype="<f8", count=4 * d + d * d, offset=_MODEL_HEAD.size)
    mean, rest = f[:d], f[d:]
    U = rest[: d * d].reshape((d, d), order="F")
    s, v, t = rest[d * d: d * d + d], rest[d * d + d: d * d + 2 * d], rest[d * d + 2 * d:]
    bits = np.frombuffer(raw, dtype=np.uint8, count=d, offset=need - d)
    return PbaModel(mean=mean, U=U, s=s, v=v, t=t, bits=bits, a=a, sigma2=sigma2, seed=seed)


def write_model(model: PbaModel, path) -> None:
    Path(path).write_bytes(serialize_model(model))


def read_model(path) -> PbaModel:
    return deserialize_model(Path(path).read_bytes())


# -- container -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Container:
    model_hash: bytes
    n: int
    total_bits: int
    payload: bytes

    @property
    def record_len(self) -> int:
        return (self.total_bits + 7) // 8

    def offset(self, j: int) -> int:
        return CONTAINER_HEADER_SIZE + j * self.record_len

    def records(self) -> np.ndarray:
        return np.frombuffer(self.payload, dtype=np.uint8).reshape(self.n, self.record_len)

    def check(self, model: PbaModel) -> None:
        if model.hash() != self.model_hash:
            raise ModelMismatchError("container was written with a different model (hash mismatch)")

    def to_bytes(self) -> bytes:
        head = _CONTAINER_HEAD.pack(CONTAINER_MAGIC, VERSION, self.model_hash, self.n, self.total_bits)
        return head + self.payload


def make_container(model: PbaModel, records) -> Container:
    if isinstance(records, np.ndarray):
        rec = np.asarray(records, dtype=np.uint8)
        if rec.ndim != 2 or rec.shape[1] != model.record_len:
            raise FormatError(f"records must have shape (n, {model.record_len})")
    else:
        rows = [bytes(r) for r in records]
        if any(len(r) != model.record_len for r in rows):
            raise FormatError(f"all records must be {model.record_len} bytes")
        rec = np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(len(rows), model.record_len)
    return Container(model_hash=model.hash(), n=rec.shape[0], total_bits=model.total_bits,
                     payload=rec.tobytes())


def parse_container(raw: bytes) -> Container:
    if len(raw) < CONTAINER_HEADER_SIZE:
        raise FormatError("truncated container header")
    magic, version, digest, n, total_bits = _CONTAINER_HEAD.unpack_from(raw)
    if magic != CONTAINER_MAGIC:
        raise FormatError(f"bad container magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    need = n * ((total_bits + 7) // 8)
    payload = raw[CONTAINER_HEADER_SIZE:]
    if len(payload) != need:
        raise FormatError(f"container payload is {len(payload)} bytes, expected {need}")
    return Container(model_hash=digest, n=n, total_bits=total_bits, payload=payload)


def write_container(model: PbaModel, records, path) -> Container:
    c = make_container(model, records)
    Path(path).write_bytes(c.to_bytes())
    return c


def read_container(path) -> Container:
    return parse_container(Path(path).read_bytes())


def random_access(container: Container, j: int) -> bytes:
    if not 0 <= j < container.n:
        raise IndexError(f"record {j} out of range for a container of {container.n}")
    start = j * container.record_len
    return container.payload[start:start + container.record_len]


def read_record(path, j: int) -> bytes:
    """Fetch record ``j`` straight from a container file by seeking."""
    with open(path, "rb") as fh:
        head = fh.read(CONTAINER_HEADER_SIZE)
        if len(head) < CONTAINER_HEADER_SIZE:
            raise FormatError("truncated container header")
        magic, version, _, n, total_bits = _CONTAINER_HEAD.unpack(head)
        if magic != CONTAINER_MAGIC or version != VERSION:
            raise FormatError("not a version-1 PBAC container")
        if not 0 <= j < n:
            raise IndexError(f"record {j} out of range for a container of {n}")
        rl = (total_bits + 7) // 8
        fh.seek(CONTAINER_HEADER_SIZE + j * rl)
        rec = fh.read(rl)
    if len(rec) != rl:
        raise FormatError("truncated container")
    return rec


def encode_container(model: PbaModel, X, per_sample_dither: bool = True) -> Container:
    X = np.asarray(X, dtype=np.float64).reshape(-1, model.d)
    return make_container(model, encode(model, X, 0, per_sample_dither))


def decode_container(model: PbaModel, container: Container, per_sample_dither: bool = True) -> np.ndarray:
    container.check(model)
    if container.n == 0:
        return np.zeros((0, model.d))
    return decode(model, container.records(), 0, per_sample_dither)
