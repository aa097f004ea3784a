"""Entropy of a Gaussian latent plus uniform dither, and the linear NTC objective.

For ``Y = sqrt(s) Z + e`` with ``Z ~ N(0, 1)`` and ``e ~ Unif[-1/2, 1/2]``
the density is ``f(x) = Phi((x + 1/2)/sqrt(s)) - Phi((x - 1/2)/sqrt(s))``.
:func:`rho_sl_ntc` returns ``h(Y)`` in nats and :func:`fisher_info` its
Fisher information; de Bruijn's identity ties them by ``h'(s) = J(s) / 2``.

The variable-rate objective for a linear encoder ``W`` (columns ``w_j``) and
the optimal linear decoder is::

    tr K - tr(K W (W^T K W + I/12)^-1 W^T K) + lam * sum_j h(w_j^T x + e_j)

with the factorized rate depending on ``w_j`` only through ``w_j^T K w_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from scipy.special import log_ndtr, ndtr

from .errors import ConvergenceError, PbaError

DITHER_VAR = 1.0 / 12.0
TAIL_SIGMAS = 8.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class EntropyGrid:
    s_values: np.ndarray
    h_values: np.ndarray
    j_values: np.ndarray


def density_gauss_plus_uniform(s, x):
    s = float(s)
    if not s > 0:
        raise PbaError(f"s must be positive, got {s}")
    r = math.sqrt(s)
    x = np.abs(np.asarray(x, dtype=np.float64))
    # upper-tail form avoids cancellation for x > 0
    return (ndtr(-(x - 0.5) / r) - ndtr(-(x + 0.5) / r))[()]


def _log_density(x, r):
    """log f for x >= 0, accurate far into the tails."""
    hi = log_ndtr(-(x - 0.5) / r)
    lo = log_ndtr(-(x + 0.5) / r)
    return hi + np.log1p(-np.exp(lo - hi))


def _log_abs_dlog(x, r):
    """log |f'(x)| for x >= 0, where f' = (phi(b) - phi(a)) / r with b < a."""
    a, b = (x + 0.5) / r, (x - 0.5) / r
    # phi(b) >= phi(a) for x >= 0; ratio phi(a)/phi(b) = exp(-x / r^2)
    return -0.5 * b * b - _HALF_LOG_2PI - math.log(r) + np.log1p(-np.exp(-x / (r * r)))


def _pieces(s):
    w = TAIL_SIGMAS * math.sqrt(s)
    edge = 0.5 + w
    cuts = sorted({0.0, max(0.0, 0.5 - w), 0.5, edge})
    return list(zip(cuts[:-1], cuts[1:]))


def _integrate_half(fn, s, epsabs, epsrel):
    total = 0.0
    for lo, hi in _pieces(s):
        if hi <= lo:
            continue
        val, err, *info = integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400, full_output=1)
        if len(info) > 1 and err > 100 * max(epsabs, epsrel * abs(val)):
            raise ConvergenceError(f"quadrature did not converge on [{lo}, {hi}] for s={s}: {info[1]}")
        total += val
    return 2.0 * total        # f is even


def rho_sl_ntc(s, epsabs=1e-13, epsrel=1e-13) -> float:
    """Differential entropy ``h(sqrt(s) Z + e)`` in nats; exactly 0 at ``s = 0``."""
    s = float(s)
    if s < 0:
        raise PbaError(f"s must be nonnegative, got {s}")
    if s == 0:
        return 0.0
    r = math.sqrt(s)

    def integrand(x):
        lf = _log_density(x, r)
        return -math.exp(lf) * lf if lf > -745 else 0.0

    return _integrate_half(integrand, s, epsabs, epsrel)


def fisher_info(s, epsabs=1e-13, epsrel=1e-12) -> float:
    """Fisher information ``int f'^2 / f`` of ``sqrt(s) Z + e``."""
    s = float(s)
    if not s > 0:
        raise PbaError(f"s must be positive, got {s}")
    r = math.sqrt(s)

    def integrand(x):
        if x == 0.0:
            return 0.0
        lg = 2.0 * _log_abs_dlog(x, r) - _log_density(x, r)
        return math.exp(lg) if lg > -745 else 0.0

    return _integrate_half(integrand, s, epsabs, epsrel)


def entropy_grid(s_values) -> EntropyGrid:
    s = np.asarray(s_values, dtype=np.float64)
    h = np.array([rho_sl_ntc(v) for v in s])
    j = np.array([fisher_info(v) for v in s])
    return EntropyGrid(s_values=s, h_values=h, j_values=j)


# -- tabulated entropy for bulk evaluation ----------------------------------

_TABLE_LO, _TABLE_HI, _TABLE_N = -10.0, 8.0, 1801


@lru_cache(maxsize=1)
def _table():
    log_s = np.linspace(_TABLE_LO, _TABLE_HI, _TABLE_N) * math.log(10.0)
    h = np.array([rho_sl_ntc(math.exp(t)) for t in log_s])
    return CubicSpline(log_s, h), float(h[0])


def rho_sl_fast(s):
    """Vectorized ``rho_sl_ntc`` via a spline in ``log s`` (|error| well below 1e-8).

    Below ``1e-10`` the entropy is interpolated as ``c * sqrt(s)``; above
    ``1e8`` the Gaussian asymptote ``0.5 log(2 pi e (s + 1/12))`` is used.
    """
    spline, h_lo = _table()
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    lo, hi = 10.0 ** _TABLE_LO, 10.0 ** _TABLE_HI
    mid = (s >= lo) & (s <= hi)
    out[mid] = spline(np.log(s[mid]))
    small = (s > 0) & (s < lo)
    out[small] = h_lo * np.sqrt(s[small] / lo)
    big = s > hi
    out[big] = 0.5 * np.log(2 * math.pi * math.e * (s[big] + DITHER_VAR))
    return out[()]


# -- NTC objective ----------------------------------------------------------

def _eigvals(spectrum):
    return np.asarray(getattr(spectrum, "eigvals", spectrum), dtype=np.float64)


def ntc_lagrangian(spectrum, v, lam, rho=rho_sl_fast) -> float:
    """Objective of an eigen-aligned encoder with latent variances ``v``."""
    w = _eigvals(spectrum)
    v = np.asarray(v, dtype=np.float64)
    dist = DITHER_VAR * w / (DITHER_VAR + v)
    return float(dist.sum() + lam * np.sum(rho(v)))


def ntc_objective(K, W, lam, rho=rho_sl_fast):
    """General-``W`` objective; ``W`` may be a stack of shape ``(..., d, d)``."""
    K = np.asarray(K, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    d = K.shape[0]
    G = np.swapaxes(W, -1, -2) @ K @ W            # latent covariance W^T K W
    KW = K @ W
    M = G + DITHER_VAR * np.eye(d)
    gain = np.trace(KW @ np.linalg.solve(M, np.swapaxes(KW, -1, -2)), axis1=-2, axis2=-1)
    latent_var = np.diagonal(G, axis1=-2, axis2=-1)
    return np.trace(K) - gain + lam * np.sum(rho(np.maximum(latent_var, 0.0)), axis=-1)


def _component_opt(sig2, lam, rho, v_max):
    """Global minimum over v >= 0 of ``sig2/12/(1/12+v) + lam*rho(v)``.

    Dense log-grid scan (plus v = 0), then bounded refinement of the best bracket.
    """
    grid = np.concatenate(([0.0], np.logspace(-10, math.log10(v_max), 4000)))
    f = DITHER_VAR * sig2 / (DITHER_VAR + grid) + lam * rho(grid)
    k = int(np.argmin(f))
    if k == 0:
        return 0.0, float(f[0])
    lo, hi = grid[k - 1], grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda v: float(DITHER_VAR * sig2 / (DITHER_VAR + v) + lam * rho(np.array(v))),
                                   bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(hi, 1e-12)})
    if res.fun < f[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(f[k])


def eigen_aligned_optimum(spectrum, lam, rho=rho_sl_fast, v_max=None):
    """Best eigen-aligned latent variances; returns ``(objective, v)``."""
    w = _eigvals(spectrum)
    if v_max is None:
        v_max = max(1e4, 1e4 * float(w.max(initial=0.0)) / max(lam, 1e-12))
    v = np.zeros_like(w)
    total = 0.0
    for i, sig2 in enumerate(w):
        v[i], fi = _component_opt(float(sig2), lam, rho, v_max)
        total += fi
    return total, v


def aligned_encoder(spectrum, v) -> np.ndarray:
    """``W = U diag(sqrt(v / sigma^2))``: eigenvector columns with latent variances ``v``."""
    w = _eigvals(spectrum)
    U = np.asarray(spectrum.eigvecs)
    scale = np.where(w > 0, np.sqrt(np.asarray(v) / np.where(w > 0, w, 1.0)), 0.0)
    return U * scale


def eigen_alignment_search(K, lam, trials: int = 100_000, seed: int = 0,
                           log_var_range=(-6.0, 4.0), batch: int = 20_000, rho=rho_sl_fast):
    """Random search over general ``d x d`` encoders.

    Each column gets a uniformly random direction and a norm chosen so its
    latent variance ``w^T K w`` is log-uniform over ``10**log_var_range``;
    with probability 1/4 per column the column is zeroed instead.  Returns
    ``(best_objective, best_W)``.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.shape[0] != K.shape[1]:
        raise PbaError("K must be square")
    d = K.shape[0]
    rng = np.random.default_rng(seed)
    best, best_W = math.inf, None
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        dirs = rng.normal(size=(m, d, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        quad = np.einsum("mij,ik,mkj->mj", dirs, K, dirs)
        target = 10.0 ** rng.uniform(*log_var_range, size=(m, d))
        scale = np.sqrt(target / np.maximum(quad, 1e-300))
        scale[rng.random(size=(m, d)) < 0.25] = 0.0
        W = dirs * scale[:, None, :]
        obj = ntc_objective(K, W, lam, rho)
        k = int(np.argmin(obj))
        if obj[k] < best:
            best, best_W = float(obj[k]), W[k].copy()
        done += m
    return best, best_W


def mmse_distortion(K, W, sigma2=DITHER_VAR):
    """``tr K - tr(K W (W^T K W + sigma2 I)^-1 W^T K)``; ``W`` may be stacked."""
    K = np.asarray(K, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    KW = K @ W
    M = np.swapaxes(W, -1, -2) @ KW + sigma2 * np.eye(W.shape[-1])
    return np.trace(K) - np.trace(KW @ np.linalg.solve(M, np.swapaxes(KW, -1, -2)), axis1=-2, axis2=-1)


def aligned_fixed_rate_optimum(eigvals, budget_nats, gamma, sigma2=DITHER_VAR, grid=200_001):
    """Least eigen-aligned distortion for d=2 with ``sum 0.5 ln(1 + gamma v_i) = budget``."""
    w = np.asarray(eigvals, dtype=np.float64)
    if w.shape != (2,):
        raise PbaError("aligned_fixed_rate_optimum handles d=2 only")
    r1 = np.linspace(0.0, budget_nats, grid)
    v1 = np.expm1(2.0 * r1) / gamma
    v2 = np.expm1(2.0 * (budget_nats - r1)) / gamma
    dist = sigma2 * w[0] / (sigma2 + v1) + sigma2 * w[1] / (sigma2 + v2)
    k = int(np.argmin(dist))
    return float(dist[k]), np.array([v1[k], v2[k]])


def fixed_rate_alignment_search(K, budget_nats, gamma, trials: int = 100_000, seed: int = 0,
                                sigma2=DITHER_VAR, batch: int = 20_000):
    """Random general encoders spending exactly ``budget_nats`` of log-form rate.

    Columns get uniformly random directions; the budget is split among them
    by a uniform Dirichlet draw, and each column is scaled so its latent
    variance ``v_j`` has ``0.5 ln(1 + gamma v_j)`` equal to its share.
    Returns ``(best_distortion, best_W)``.
    """
    K = np.asarray(K, dtype=np.float64)
    d = K.shape[0]
    rng = np.random.default_rng(seed)
    best, best_W = math.inf, None
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        dirs = rng.normal(size=(m, d, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        quad = np.einsum("mij,ik,mkj->mj", dirs, K, dirs)
        share = rng.dirichlet(np.ones(d), size=m) * budget_nats
        v = np.expm1(2.0 * share) / gamma
        W = dirs * np.sqrt(v / np.maximum(quad, 1e-300))[:, None, :]
        dist = mmse_distortion(K, W, sigma2)
        k = int(np.argmin(dist))
        if dist[k] < best:
            best, best_W = float(dist[k]), W[k].copy()
        done += m
    return best, best_W


def rotation(theta_deg) -> np.ndarray:
    t = math.radians(theta_deg)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
