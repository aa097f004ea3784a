"""Symmetric eigendecomposition by cyclic Jacobi rotations.

Rotations are scheduled in round-robin (tournament) order: each round
annihilates ``d // 2`` disjoint off-diagonal pairs at once, and ``d - 1``
rounds visit every pair exactly once, which is one cyclic sweep.  The result
is deterministic for a given input and independent of any LAPACK build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, PbaError

MAX_SWEEPS = 100
OFFDIAG_RTOL = 1e-12
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigvals: np.ndarray
    eigvecs: np.ndarray
    sweeps: int = 0

    @property
    def d(self) -> int:
        return self.eigvals.shape[0]


def _round_robin(m):
    """Pairings for ``m`` (even) players: ``m - 1`` rounds of ``m / 2`` pairs."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        rounds.append([(players[i], players[m - 1 - i]) for i in range(half)])
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _schedule(d):
    m = d + (d % 2)
    out = []
    for pairs in _round_robin(m):
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < d and q < d]
        if pairs:
            p, q = np.array(pairs).T
            out.append((p, q))
    return out


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigendecompose(K) -> Spectrum:
    """Eigenvalues (descending) and orthonormal eigenvectors of symmetric ``K``.

    Iterates until every off-diagonal magnitude is below
    ``1e-12 * max|K|``; raises :class:`ConvergenceError` after 100 sweeps.
    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    A = np.array(K, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PbaError(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    scale = np.max(np.abs(A)) if A.size else 0.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise PbaError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(d)
    tol = OFFDIAG_RTOL * scale

    def offdiag_max():
        if d < 2:
            return 0.0
        return np.max(np.abs(A[~np.eye(d, dtype=bool)]))

    schedule = _schedule(d)
    sweeps = 0
    while offdiag_max() >= tol and scale > 0:
        if sweeps == MAX_SWEEPS:
            raise ConvergenceError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")
        sweeps += 1
        for p, q in schedule:
            apq = A[p, q]
            live = np.abs(apq) >= tol
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # A <- J^T A J, J_pp = J_qq = c, J_pq = s, J_qp = -s
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = _fix_signs(V[:, order])
    w.flags.writeable = False
    V.flags.writeable = False
    return Spectrum(eigvals=w, eigvecs=V, sweeps=sweeps)


def project(spectrum: Spectrum, x) -> np.ndarray:
    """Coordinates of ``x`` (a vector or rows of samples) in the eigenbasis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spectrum.d:
        raise PbaError(f"dimension mismatch: spectrum has d={spectrum.d}, input has {x.shape[-1]}")
    return x @ spectrum.eigvecs
