"""Krylov solvers: Jacobi-preconditioned CG and ILU(0)-preconditioned GMRES."""
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    method: str = ""


class SolverError(RuntimeError):
    """Raised by callers that require convergence; carries the report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def _check(A, b):
    if A.n_rows != A.n_cols:
        raise ValueError("matrix must be square")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n_rows,):
        raise ValueError(f"dimension mismatch: rhs {b.shape} vs matrix {A.shape}")
    return b


def relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def solve_spd(A, b, tol=DEFAULT_TOL, maxiter=None, x0=None):
    """Preconditioned conjugate gradients with the Jacobi preconditioner."""
    b = _check(A, b)
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, "pcg")
    d = A.diagonal()
    if np.any(d <= 0):
        raise ValueError("Jacobi preconditioner needs a positive diagonal")
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / nb
    while res > tol and it < maxiter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / nb
        if res <= tol:
            # guard against drift of the recursive residual
            res = relative_residual(A, x, b)
            if res <= tol:
                break
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = relative_residual(A, x, b)
    return x, SolveReport(it, float(res), bool(res <= tol), "pcg")


class Ilu0:
    """Zero-fill incomplete LU factors of a CSR matrix."""

    def __init__(self, A):
        n = A.n_rows
        self.n = n
        self.row_ptr, self.col_idx = A.row_ptr, A.col_idx
        self.lu, self.diag, status = _kernels.ilu0(n, A.row_ptr, A.col_idx, A.values)
        self.zero_pivot = int(status)
        self._apply = None

    @property
    def ok(self):
        return self.zero_pivot < 0

    def solve(self, r):
        if self._apply is None:
            self._apply = _kernels.ilu0_solver(self.n, self.row_ptr, self.col_idx,
                                               self.lu, self.diag)
        return self._apply(np.ascontiguousarray(r, dtype=np.float64))


def gmres(A, b, tol=DEFAULT_TOL, restart=50, maxiter=None, precond=None, x0=None):
    """Restarted GMRES with right preconditioning (true residual is minimised)."""
    b = _check(A, b)
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, "gmres")
    apply_m = (lambda v: v) if precond is None else precond
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    total = 0
    m = min(restart, n)
    while True:
        r = b - A @ x
        beta = np.linalg.norm(r)
        if beta / nb <= tol or total >= maxiter:
            break
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            Z[k] = apply_m(V[k])
            w = A @ Z[k]
            for j in range(k + 1):
                H[j, k] = w @ V[j]
                w -= H[j, k] * V[j]
            # one reorthogonalisation pass keeps the basis clean at tight tol
            for j in range(k + 1):
                c = w @ V[j]
                H[j, k] += c
                w -= c * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                k_done = k
                break
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            hk1 = H[k + 1, k]
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_done = k + 1
            if abs(g[k + 1]) / nb <= 0.5 * tol or total >= maxiter:
                break
            if hk1 == 0.0:
                break
            V[k + 1] = w / hk1
        if k_done == 0:
            break
        y = np.linalg.solve(np.triu(H[:k_done, :k_done]), g[:k_done])
        x = x + y @ Z[:k_done]
    res = relative_residual(A, x, b)
    return x, SolveReport(total, float(res), bool(res <= tol), "gmres")


def solve_general(A, b, tol=DEFAULT_TOL, restart=50, maxiter=None, x0=None):
    """GMRES(restart) with ILU(0); falls back to no preconditioner on a zero pivot."""
    b = _check(A, b)
    ilu = Ilu0(A)
    if ilu.ok:
        x, rep = gmres(A, b, tol=tol, restart=restart, maxiter=maxiter, precond=ilu.solve, x0=x0)
        rep.method = "gmres+ilu0"
    else:
        log.warning("ILU(0) zero pivot in row %d; running unpreconditioned GMRES", ilu.zero_pivot)
        x, rep = gmres(A, b, tol=tol, restart=restart, maxiter=maxiter, x0=x0)
    return x, rep
