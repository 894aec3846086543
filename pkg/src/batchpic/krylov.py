"""Matrix-free Krylov solvers: conjugate gradient and restarted GMRES.

Both solvers treat the operator as a plain callable on flat float64
vectors and never trust their internal residual recurrences: a claimed
convergence is confirmed by recomputing ``||b - A x|| / ||b||`` from
scratch before the report says so.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BreakdownError


@dataclass
class SolverReport:
    iterations: int
    residual: float
    converged: bool


def _true_residual(A, b, x, bnorm):
    return float(np.linalg.norm(b - A(x))) / bnorm


def cg_solve(A, b, x0=None, tol=1e-7, max_iter=500, weight=None):
    """Conjugate gradient for a symmetric positive (semi-)definite operator.

    ``weight`` optionally defines the inner product ``<u, v> = sum(w u v)``
    (volume weights make the mirrored-wall Poisson operator self-adjoint).
    Convergence is declared on the plain relative residual.
    """
    b = np.asarray(b, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolverReport(0, 0.0, True)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    dot = (lambda u, v: float(np.dot(u, v))) if weight is None else (
        lambda u, v: float(np.dot(u * weight, v)))

    r = b - A(x)
    p = r.copy()
    rs = dot(r, r)
    it = 0
    while it < max_iter:
        if not np.isfinite(rs):
            raise BreakdownError("CG residual is not finite")
        rel = float(np.linalg.norm(r)) / bnorm
        if rel <= tol:
            true_rel = _true_residual(A, b, x, bnorm)
            if true_rel <= tol:
                return x, SolverReport(it, true_rel, True)
        it += 1
        Ap = A(p)
        pAp = dot(p, Ap)
        if pAp == 0.0:
            raise BreakdownError("CG breakdown: p'Ap = 0 with nonzero residual")
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = dot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    true_rel = _true_residual(A, b, x, bnorm)
    return x, SolverReport(it, true_rel, true_rel <= tol)


def gmres_solve(A, b, x0=None, tol=1e-7, restart=20, max_iter=200):
    """Restarted GMRES(m) with modified Gram-Schmidt and Givens rotations.

    The least-squares residual is monotone nonincreasing within a restart
    cycle.  A vanishing new Krylov vector with the residual still above
    tolerance raises :class:`BreakdownError`.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolverReport(0, 0.0, True)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    total_it = 0

    while True:
        r = b - A(x)
        beta = float(np.linalg.norm(r))
        if not np.isfinite(beta):
            raise BreakdownError("GMRES residual is not finite")
        if beta / bnorm <= tol:
            true_rel = _true_residual(A, b, x, bnorm)
            if true_rel <= tol:
                return x, SolverReport(total_it, true_rel, True)
        if total_it >= max_iter:
            true_rel = _true_residual(A, b, x, bnorm)
            return x, SolverReport(total_it, true_rel, true_rel <= tol)

        m = restart
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            if total_it >= max_iter:
                break
            total_it += 1
            w = A(V[k])
            for i in range(k + 1):
                H[i, k] = float(np.dot(w, V[i]))
                w = w - H[i, k] * V[i]
            hk = float(np.linalg.norm(w))
            H[k + 1, k] = hk
            happy = hk <= 1e-14 * beta
            if not happy:
                V[k + 1] = w / hk
            # apply accumulated rotations to the new column
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                raise BreakdownError("GMRES breakdown: zero Hessenberg column")
            cs[k] = H[k, k] / denom
            sn[k] = H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_done = k + 1
            res = abs(g[k + 1])
            if res / bnorm <= tol or happy:
                break
        if k_done == 0:
            raise BreakdownError("GMRES made no progress within a restart cycle")
        y = np.linalg.solve(H[:k_done, :k_done], g[:k_done])
        x = x + V[:k_done].T @ y
