"""Clamped dithered scalar quantization.

A component with latent variance ``v`` gets a codebook of
``Gamma = 2**floor(0.5 * log2(4 a^2 v + 1))`` points ``{i + u}`` lying in
``(-Gamma/2, Gamma/2]``, where ``u`` is a dither value in ``[-1/2, 1/2)``
shared by encoder and decoder.  Indices are codebook ranks in ascending
order, so each takes exactly ``log2(Gamma)`` bits.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PbaError

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_COMPONENT_SALT = np.uint64(0xD1B54A32D192ED03)
MAX_BITS = 62


@dataclass(frozen=True)
class QuantSpec:
    a: float
    v: float
    bits: int

    @property
    def gamma_pts(self) -> int:
        return 1 << self.bits


def clamp_bits(a, v) -> int:
    """``floor(0.5 * log2(4 a^2 v + 1))`` evaluated exactly on the float argument."""
    y = 4.0 * a * a * v + 1.0
    if not math.isfinite(y):
        raise PbaError(f"4 a^2 v + 1 is not finite (a={a}, v={v})")
    _, e = math.frexp(y)          # y = m * 2**e, 0.5 <= m < 1
    return max(0, (e - 1) // 2)


def make_spec(a: float, v: float) -> QuantSpec:
    if not a > 0:
        raise PbaError(f"a must be positive, got {a}")
    if not v >= 0:
        raise PbaError(f"variance must be nonnegative, got {v}")
    bits = clamp_bits(a, v)
    if bits > MAX_BITS:
        raise PbaError(f"{bits} bits per component exceeds the supported {MAX_BITS}")
    return QuantSpec(a=float(a), v=float(v), bits=bits)


def splitmix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def dither(seed, sample_index, component_index):
    """Deterministic dither in ``[-1/2, 1/2)`` keyed by (seed, sample, component).

    Array arguments broadcast; a scalar key returns a Python float.
    """
    seed = np.asarray(int(seed) & _M64 if np.isscalar(seed) else seed, dtype=np.uint64)
    si = np.asarray(sample_index, dtype=np.uint64)
    ci = np.asarray(component_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = seed ^ (si * _GOLDEN) ^ (ci + _COMPONENT_SALT)
    z = splitmix64(key)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 - 0.5
    return float(u) if u.ndim == 0 else u


def _lowest(gamma_pts, u):
    """Integer part of the smallest codebook point: min i with i + u > -Gamma/2."""
    return np.floor(-gamma_pts / 2.0 - u) + 1.0


def q_cd(spec: QuantSpec, u, x):
    """Rank of the codebook point nearest ``x``; ties go to the lower rank."""
    g = spec.gamma_pts
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if g == 1:
        return np.zeros(np.broadcast(u, x).shape, dtype=np.int64)[()]
    # nearest integer offset, rounding exact halves down
    k = np.ceil(x - u - _lowest(g, u) - 0.5)
    return np.clip(k, 0, g - 1).astype(np.int64)[()]


def q_cd_prime(spec: QuantSpec, u, index):
    """Codebook point of the given rank."""
    g = spec.gamma_pts
    index = np.asarray(index)
    if np.any(index < 0) or np.any(index >= g):
        raise PbaError(f"index out of range for a {g}-point codebook")
    u = np.asarray(u, dtype=np.float64)
    return (_lowest(g, u) + index + u)[()]


def codebook(spec: QuantSpec, u: float) -> np.ndarray:
    return q_cd_prime(spec, u, np.arange(spec.gamma_pts))
