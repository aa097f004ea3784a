"""SNR/MSE evaluation and rate-distortion curve generation."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import codec
from .allocator import DEFAULT_A, DEFAULT_SIGMA2, AllocatorConfig, RDPoint
from .datastore import Dataset, fit_stats
from .errors import PbaError

RD_CURVE_HEADER = ["method", "param", "rate_bits_per_dim", "mse", "snr_db"]
RD_SWEEP_HEADER = ["lambda", "rate_nats", "rate_bits", "true_mse", "snr_db", "active"]


@dataclass(frozen=True)
class EvalReport:
    rate_bits_per_dim: float
    mse: float
    snr_db: float
    n: int


def snr_db(power, mse) -> float:
    if mse == 0:
        return math.inf
    if power == 0:
        return -math.inf
    return 10.0 * math.log10(power / mse)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def parse_clip(spec: str):
    """``"lo,hi"`` or ``"lo,hi,round"`` -> ``(lo, hi, round)``."""
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "round"):
        raise PbaError(f"bad clip spec {spec!r}; expected lo,hi[,round]")
    lo, hi = float(parts[0]), float(parts[1])
    if lo > hi:
        raise PbaError(f"clip lower bound {lo} exceeds upper bound {hi}")
    return lo, hi, len(parts) == 3


def apply_clip(X, lo, hi, round_=False):
    X = np.clip(np.asarray(X, dtype=np.float64), lo, hi)
    return np.rint(X) if round_ else X


def parse_grid(spec: str) -> np.ndarray:
    """``geom:lo:hi:n`` -> ``n`` geometrically spaced values, endpoints included."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "geom":
        raise PbaError(f"bad grid spec {spec!r}; expected geom:lo:hi:n")
    lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
    if not (lo > 0 and hi >= lo and n >= 1):
        raise PbaError(f"bad grid spec {spec!r}; need 0 < lo <= hi and n >= 1")
    return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])


def evaluate(original, reconstructed, rate_bits_per_dim=math.nan, clip=None) -> EvalReport:
    """Per-dimension MSE and SNR against the centered power of ``original``."""
    X = np.asarray(original, dtype=np.float64)
    Y = np.asarray(reconstructed, dtype=np.float64)
    if X.shape != Y.shape:
        raise PbaError(f"shape mismatch: {X.shape} vs {Y.shape}")
    if clip is not None:
        Y = apply_clip(Y, *clip)
    power = fit_stats(Dataset(X)).P
    mse = float(np.mean((X - Y) ** 2))
    return EvalReport(rate_bits_per_dim=rate_bits_per_dim, mse=mse, snr_db=snr_db(power, mse), n=X.shape[0])


def simulate(model: codec.PbaModel, X, clip=None) -> EvalReport:
    """Encode and decode ``X`` through packed records, then score."""
    recon = codec.decode(model, codec.encode(model, X))
    return evaluate(X, recon, model.rate_bits_per_dim, clip)


def n_workers() -> int:
    raw = os.environ.get("PBA_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise PbaError(f"PBA_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def _ordered_map(fn, items):
    items = list(items)
    workers = min(n_workers(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def gaussian_source(eigvals, n, seed=0, rotate=True):
    """``n`` zero-mean Gaussian samples with covariance spectrum ``eigvals``.

    With ``rotate`` the covariance is ``Q diag(eigvals) Q^T`` for a random
    orthogonal ``Q`` drawn from the same generator.
    """
    w = np.asarray(eigvals, dtype=np.float64)
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, w.size)) * np.sqrt(w)
    if rotate:
        Q, R = np.linalg.qr(rng.normal(size=(w.size, w.size)))
        Z = Z @ (Q * np.sign(np.diag(R))).T
    return Z


def split(X, train_frac=0.8):
    X = np.asarray(X)
    cut = int(math.floor(train_frac * X.shape[0]))
    if cut < 2 or cut >= X.shape[0]:
        raise PbaError(f"train fraction {train_frac} leaves no usable train/eval split for n={X.shape[0]}")
    return X[:cut], X[cut:]


def rd_curve(X, lambdas_true, a=DEFAULT_A, sigma2=DEFAULT_SIGMA2, seed=0, train_frac=0.8,
             baseline="pca", gain_bits=16, clip=None):
    """Rows ``(method, param, rate_bits_per_dim, mse, snr_db)`` on a held-out split."""
    train, test = split(X, train_frac)
    design = codec.Design.from_data(Dataset(train))

    def pba_row(lam_true):
        cfg = AllocatorConfig.from_true_lambda(float(lam_true), a, sigma2)
        model = design.build(design.allocate(cfg), a, sigma2, seed)
        rep = simulate(model, test, clip)
        return ("pba", float(lam_true), rep.rate_bits_per_dim, rep.mse, rep.snr_db)

    rows = _ordered_map(pba_row, lambdas_true)
    if baseline == "pca":
        from .allocator import pca_allocate

        def pca_row(k):
            alloc = pca_allocate(design.spectrum, k, gain_bits, a=a, sigma2=sigma2)
            model = design.build(alloc, a, sigma2, seed, empirical=False)
            rep = simulate(model, test, clip)
            return ("pca", k, rep.rate_bits_per_dim, rep.mse, rep.snr_db)

        rows += _ordered_map(pca_row, range(design.spectrum.d + 1))
    elif baseline not in (None, "none"):
        raise PbaError(f"unknown baseline {baseline!r}")
    return rows


def write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([r if isinstance(r, str) else fmt(r) for r in row])


def rd_sweep_rows(points: list[RDPoint], total_power: float, alpha: float):
    """Rows for the allocator sweep CSV; ``lambda`` is reported in source units."""
    return [(p.lam * alpha, p.rate_nats, p.rate_bits, p.true_mse, snr_db(total_power, p.true_mse), p.active)
            for p in points]
