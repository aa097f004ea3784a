"""Rate allocation over the eigen-components of a covariance matrix.

With the encoder restricted to scaled eigenvectors, the design problem
separates into one scalar problem per component.  In reduced units
``D_i = sigma_i^2 / (alpha + s'_i^2 sigma_i^2)`` the Lagrangian minimised here is::

    sum_i D_i + lam * sum_i log(sigma_i^2 / D_i - (alpha - 1)),   D_i <= sigma_i^2 / alpha

whose stationary points are the roots of
``(alpha - 1) D^2 - sigma^2 D + lam sigma^2 = 0``.  The per-component rate
in nats is ``0.5 * log(sigma_i^2 / D_i - (alpha - 1)) = 0.5 * log(1 + gamma v_i)``,
so the Lagrangian equals ``sum(D) + 2 * lam * rate_nats``.

The source-domain MSE is ``alpha * sum(D)``; a source-domain multiplier
``lam_true`` corresponds to ``lam = lam_true / alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import PbaError
from .quantizer import make_spec
from .spectral import Spectrum

DEFAULT_A = 15.0
DEFAULT_SIGMA2 = 1.0 / 12.0
FEAS_D_ATOL = 1e-15
FEAS_RATE_ATOL = 1e-12
TIE_ATOL = 1e-12
ZERO_EIG_RTOL = 1e-14


@dataclass(frozen=True)
class AllocatorConfig:
    lam: float
    a: float = DEFAULT_A
    sigma2: float = DEFAULT_SIGMA2

    def __post_init__(self):
        if not self.lam > 0:
            raise PbaError(f"lambda must be positive, got {self.lam}")
        if not self.a > 0:
            raise PbaError(f"a must be positive, got {self.a}")
        if not self.sigma2 > 0:
            raise PbaError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.alpha > 2:
            raise PbaError(f"alpha = 4 a^2 sigma2 must exceed 2, got {self.alpha}")

    @property
    def gamma(self) -> float:
        return 4.0 * self.a * self.a

    @property
    def alpha(self) -> float:
        return self.gamma * self.sigma2

    @property
    def lam_true(self) -> float:
        return self.lam * self.alpha

    @classmethod
    def from_true_lambda(cls, lam_true, a=DEFAULT_A, sigma2=DEFAULT_SIGMA2):
        return cls(lam=lam_true / (4.0 * a * a * sigma2), a=a, sigma2=sigma2)


@dataclass(frozen=True, eq=False)
class CandidateSolution:
    index: int          # 1-based position in the list of 2*dbar candidates
    r: int
    concave_tail: bool
    D: np.ndarray
    rates: np.ndarray   # per-component nats
    feasible: bool
    lagrangian: float

    @property
    def rate_nats(self) -> float:
        return float(self.rates.sum())

    @property
    def n_concave(self) -> int:
        return int(self.concave_tail)


@dataclass(frozen=True, eq=False)
class Allocation:
    eigvals: np.ndarray
    D: np.ndarray
    rates: np.ndarray
    s: np.ndarray
    v: np.ndarray
    alpha: float
    lam: float = math.nan
    candidate: int = 0

    @property
    def d(self) -> int:
        return self.D.shape[0]

    @property
    def rate_nats(self) -> float:
        return float(self.rates.sum())

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / math.log(2.0)

    @property
    def reduced_distortion(self) -> float:
        return float(self.D.sum())

    @property
    def true_mse(self) -> float:
        return _true_mse(self.eigvals, self.D, self.rates, self.alpha)

    @property
    def lagrangian(self) -> float:
        return self.reduced_distortion + 2.0 * self.lam * self.rate_nats

    @property
    def active(self) -> int:
        return int(np.count_nonzero(self.s > 0))


@dataclass(frozen=True)
class RDPoint:
    lam: float
    rate_nats: float
    true_mse: float
    candidate: int
    active: int

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / math.log(2.0)


def _eigvals(spectrum):
    w = np.asarray(spectrum.eigvals if isinstance(spectrum, Spectrum) else spectrum, dtype=np.float64)
    if w.ndim != 1:
        raise PbaError("eigenvalues must be a 1-D array")
    if np.any(np.diff(w) > 0):
        raise PbaError("eigenvalues must be sorted in descending order")
    top = w[0] if w.size else 0.0
    return np.where(w > ZERO_EIG_RTOL * max(top, 0.0), w, 0.0)


def _true_mse(w, D, rates, alpha):
    # zero-rate components cost exactly their variance
    return float(np.sum(np.where(rates > 0, alpha * D, w)))


def _finish(w, D, rates, cfg, lam=math.nan, candidate=0):
    """Map reduced distortions to encoder scalings and latent variances."""
    alpha = cfg.alpha
    pos = (w > 0) & (rates > 0)
    sp2 = np.zeros_like(w)
    sp2[pos] = np.maximum(0.0, w[pos] / D[pos] - alpha) / w[pos]
    s2 = cfg.sigma2 * sp2 / alpha
    return Allocation(eigvals=w, D=D, rates=rates, s=np.sqrt(s2), v=s2 * w,
                      alpha=alpha, lam=lam, candidate=candidate)


def zero_rate_threshold(spectrum, cfg: AllocatorConfig) -> float:
    """Reduced lambda at or above which no stationary point exists and zero rate is optimal."""
    w = _eigvals(spectrum)
    return float(w[0]) / (4.0 * (cfg.alpha - 1.0)) if w.size else math.inf


def enumerate_candidates(spectrum, cfg: AllocatorConfig) -> list[CandidateSolution]:
    """The ``2 * dbar`` stationary candidates, feasibility tagged."""
    w = _eigvals(spectrum)
    lam, alpha = cfg.lam, cfg.alpha
    live = lam < w / (4.0 * (alpha - 1.0))
    dbar = int(np.count_nonzero(live))
    if dbar == 0:
        return []
    wl = w[:dbar]
    c = np.sqrt(np.maximum(0.0, 1.0 - 4.0 * lam * (alpha - 1.0) / wl))
    convex = wl / (2.0 * (alpha - 1.0)) * (1.0 - c)
    concave = wl / (2.0 * (alpha - 1.0)) * (1.0 + c)
    base_rate = 0.5 * np.log(wl / (4.0 * lam))
    rate_convex = base_rate + np.log1p(c)
    with np.errstate(divide="ignore"):
        rate_concave = base_rate + np.log1p(-c)
    boundary = w / alpha

    out = []
    for r in range(1, dbar + 1):
        for tail in (False, True):
            D = boundary.copy()
            rates = np.zeros_like(w)
            D[: r - 1] = convex[: r - 1]
            rates[: r - 1] = rate_convex[: r - 1]
            if tail:
                D[r - 1], rates[r - 1] = concave[r - 1], rate_concave[r - 1]
            else:
                D[r - 1], rates[r - 1] = convex[r - 1], rate_convex[r - 1]
            feasible = bool(np.all(D <= boundary + FEAS_D_ATOL) and np.all(rates >= -FEAS_RATE_ATOL))
            lagr = float(D.sum() + 2.0 * lam * rates.sum())
            out.append(CandidateSolution(index=2 * r - int(not tail), r=r, concave_tail=tail, D=D,
                                         rates=rates, feasible=feasible, lagrangian=lagr))
    return out


def pba_allocate(spectrum, cfg: AllocatorConfig) -> Allocation:
    """Allocation minimizing the Lagrangian over feasible stationary candidates.

    Zero eigenvalues receive no rate.  At or above
    ``sigma_1^2 / (4 (alpha - 1))`` every component sits on its boundary.
    Below it the all-boundary point (candidate 0) competes with the
    ``2 * dbar`` stationary candidates, ties going to candidate 0.
    """
    w = _eigvals(spectrum)
    if cfg.lam >= zero_rate_threshold(w, cfg):
        return _finish(w, w / cfg.alpha, np.zeros_like(w), cfg, lam=cfg.lam)
    best = None
    for cand in enumerate_candidates(w, cfg):
        if cand.feasible and (best is None or cand.lagrangian < best.lagrangian - TIE_ATOL):
            best = cand
    # the all-convex candidate with r = dbar is always feasible for alpha > 2
    assert best is not None, "no feasible candidate"
    # Just below the threshold the convex roots can lose to sending nothing.
    boundary = w / cfg.alpha
    if float(boundary.sum()) <= best.lagrangian + TIE_ATOL:
        return _finish(w, boundary, np.zeros_like(w), cfg, lam=cfg.lam, candidate=0)
    return _finish(w, best.D, best.rates, cfg, lam=cfg.lam, candidate=best.index)


@lru_cache(maxsize=8)
def _oracle_grid(alpha, grid_size, span):
    # normalized distortion delta = D / sigma^2 on (1/alpha * 10^-span, 1/alpha]
    top = 1.0 / alpha
    delta = top * np.logspace(-span, 0.0, grid_size)
    delta[-1] = top
    logterm = np.log(np.maximum(1.0 / delta - (alpha - 1.0), 1.0))
    logterm[-1] = 0.0
    delta.flags.writeable = False
    logterm.flags.writeable = False
    return delta, logterm


def oracle_allocate(spectrum, cfg: AllocatorConfig, grid_size: int = 100_000, span: float = 12.0) -> Allocation:
    """Brute-force minimiser of the separable Lagrangian on a log grid.

    Each component independently minimises
    ``D + lam * log(sigma^2 / D - (alpha - 1))`` over ``grid_size``
    log-uniform points in ``(sigma^2/alpha * 10**-span, sigma^2/alpha]``.
    Shares nothing with the root formulas used by :func:`pba_allocate`.
    """
    if grid_size < 1000:
        raise PbaError("grid_size must be at least 1000")
    w = _eigvals(spectrum)
    delta, logterm = _oracle_grid(float(cfg.alpha), int(grid_size), float(span))
    D = np.zeros_like(w)
    rates = np.zeros_like(w)
    pos = np.flatnonzero(w > 0)
    if pos.size:
        obj = w[pos, None] * delta[None, :] + cfg.lam * logterm[None, :]
        k = np.argmin(obj, axis=1)
        D[pos] = w[pos] * delta[k]
        rates[pos] = 0.5 * logterm[k]
    return _finish(w, D, rates, cfg, lam=cfg.lam)


def _dominated(p, q):
    return (q.rate_nats <= p.rate_nats and q.true_mse <= p.true_mse
            and (q.rate_nats < p.rate_nats or q.true_mse < p.true_mse))


def pareto_filter(points):
    pts = sorted(points, key=lambda p: (p.rate_nats, p.true_mse))
    kept = []
    best_mse = math.inf
    for p in pts:
        if p.true_mse < best_mse:
            kept.append(p)
            best_mse = p.true_mse
    return sorted(kept, key=lambda p: -p.rate_nats)


def rd_sweep(spectrum, cfg_base: AllocatorConfig, lambdas) -> list[RDPoint]:
    """Operational RD curve: selected and candidate points, Pareto filtered.

    Sorted by rate, highest first.
    """
    w = _eigvals(spectrum)
    alpha = cfg_base.alpha
    points = []
    for lam in lambdas:
        cfg = replace(cfg_base, lam=float(lam))
        sel = pba_allocate(w, cfg)
        points.append(RDPoint(lam=cfg.lam, rate_nats=sel.rate_nats, true_mse=sel.true_mse,
                              candidate=sel.candidate, active=sel.active))
        for cand in enumerate_candidates(w, cfg):
            if cand.feasible:
                points.append(RDPoint(lam=cfg.lam, rate_nats=cand.rate_nats,
                                      true_mse=_true_mse(w, cand.D, cand.rates, alpha),
                                      candidate=cand.index, active=cand.r))
    return pareto_filter(points)


def pca_gain_variance(gain_bits: int, a: float = DEFAULT_A) -> float:
    """Latent variance for which the clamp-width formula yields ``gain_bits`` bits.

    Nominally ``(4**gain_bits - 1) / (4 a^2)``; nudged up by a few ulps if
    rounding would otherwise floor to one bit fewer.
    """
    v = (4.0 ** gain_bits - 1.0) / (4.0 * a * a)
    while make_spec(a, v).bits < gain_bits:
        v = float(np.nextafter(v, math.inf))
    return v


def pca_allocate(spectrum, k: int, gain_bits: int = 16, a: float = DEFAULT_A,
                 sigma2: float = DEFAULT_SIGMA2) -> Allocation:
    """Keep the top ``k`` components at ``gain_bits`` bits each, drop the rest."""
    w = _eigvals(spectrum)
    if not 0 <= k <= w.size:
        raise PbaError(f"k must lie in [0, {w.size}], got {k}")
    if not 1 <= gain_bits <= 30:
        raise PbaError(f"gain_bits must lie in [1, 30], got {gain_bits}")
    cfg = AllocatorConfig(lam=1.0, a=a, sigma2=sigma2)
    v = np.zeros_like(w)
    keep = np.zeros(w.size, dtype=bool)
    keep[:k] = w[:k] > 0
    v[keep] = pca_gain_variance(gain_bits, a)
    s = np.zeros_like(w)
    s[keep] = np.sqrt(v[keep] / w[keep])
    mse_i = sigma2 * w / (sigma2 + v)
    rates = 0.5 * np.log1p(cfg.gamma * v)
    return Allocation(eigvals=w, D=mse_i / cfg.alpha, rates=rates, s=s, v=v, alpha=cfg.alpha)
