"""Hot sparse kernels with a numba path and a pure numpy/scipy fallback.

The backend is chosen once at import time.  Set ``CRAFEM_NUMBA=0`` in the
environment to force the fallback (also used automatically when numba is not
importable).  Both paths return identical results up to round-off; the
benchmark under ``benchmarks/`` compares them.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("CRAFEM_NUMBA", "1") != "0"


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# triplets -> CSR

def _coo_to_csr_py(n_rows, rows, cols, vals):
    """Counting sort by row, then sort columns and merge duplicates."""
    nnz = rows.shape[0]
    counts = np.zeros(n_rows + 1, dtype=np.int64)
    for k in range(nnz):
        counts[rows[k] + 1] += 1
    for i in range(n_rows):
        counts[i + 1] += counts[i]
    pos = counts[:-1].copy()
    c_tmp = np.empty(nnz, dtype=np.int64)
    v_tmp = np.empty(nnz, dtype=np.float64)
    for k in range(nnz):
        r = rows[k]
        c_tmp[pos[r]] = cols[k]
        v_tmp[pos[r]] = vals[k]
        pos[r] += 1
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    col_out = np.empty(nnz, dtype=np.int64)
    val_out = np.empty(nnz, dtype=np.float64)
    out = 0
    for i in range(n_rows):
        a, b = counts[i], counts[i + 1]
        order = np.argsort(c_tmp[a:b], kind="mergesort")
        last = -1
        for q in range(order.shape[0]):
            c = c_tmp[a + order[q]]
            v = v_tmp[a + order[q]]
            if c == last:
                val_out[out - 1] += v
            else:
                col_out[out] = c
                val_out[out] = v
                out += 1
                last = c
        row_ptr[i + 1] = out
    return row_ptr, col_out[:out].copy(), val_out[:out].copy()


def _coo_to_csr_np(n_rows, rows, cols, vals):
    if rows.size == 0:
        return (np.zeros(n_rows + 1, dtype=np.int64),
                np.zeros(0, dtype=np.int64), np.zeros(0))
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    new = np.ones(r.size, dtype=bool)
    new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(new)
    merged = np.add.reduceat(v, starts)
    r_u, c_u = r[starts], c[starts]
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(row_ptr, r_u + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return row_ptr, c_u.astype(np.int64), merged.astype(np.float64)


# ---------------------------------------------------------------------------
# y = A x

def _csr_matvec_py(row_ptr, col_idx, values, x):
    n = row_ptr.shape[0] - 1
    y = np.zeros(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            s += values[k] * x[col_idx[k]]
        y[i] = s
    return y


def _csr_matvec_np(row_ptr, col_idx, values, x):
    n = row_ptr.shape[0] - 1
    prod = values * x[col_idx]
    y = np.zeros(n, dtype=np.float64)
    nonempty = row_ptr[:-1] < row_ptr[1:]
    if prod.size:
        y[nonempty] = np.add.reduceat(prod, row_ptr[:-1][nonempty])
    return y


# ---------------------------------------------------------------------------
# ILU(0): factors stored in the sparsity pattern of A, unit lower L

def _ilu0_py(n, row_ptr, col_idx, values):
    """Returns (lu_values, diag_pos, status); status = -1 or the zero-pivot row."""
    lu = values.copy()
    diag = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for k in range(row_ptr[i], row_ptr[i + 1]):
            if col_idx[k] == i:
                diag[i] = k
                break
        if diag[i] < 0:
            return lu, diag, i
    marker = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        a, b = row_ptr[i], row_ptr[i + 1]
        for k in range(a, b):
            marker[col_idx[k]] = k
        for k in range(a, b):
            j = col_idx[k]
            if j >= i:
                break
            piv = lu[diag[j]]
            lu[k] = lu[k] / piv
            lij = lu[k]
            for q in range(diag[j] + 1, row_ptr[j + 1]):
                m = marker[col_idx[q]]
                if m >= 0:
                    lu[m] -= lij * lu[q]
        for k in range(a, b):
            marker[col_idx[k]] = -1
        if lu[diag[i]] == 0.0 or not np.isfinite(lu[diag[i]]):
            return lu, diag, i
    return lu, diag, -1


def _ilu0_apply_py(n, row_ptr, col_idx, lu, diag, r):
    """Solve (L U) z = r with the packed ILU(0) factors."""
    z = r.copy()
    for i in range(n):
        s = z[i]
        for k in range(row_ptr[i], diag[i]):
            s -= lu[k] * z[col_idx[k]]
        z[i] = s
    for i in range(n - 1, -1, -1):
        s = z[i]
        for k in range(diag[i] + 1, row_ptr[i + 1]):
            s -= lu[k] * z[col_idx[k]]
        z[i] = s / lu[diag[i]]
    return z


def _ilu0_solver_np(n, row_ptr, col_idx, lu, diag):
    import scipy.sparse as sp
    from scipy.sparse.linalg import spsolve_triangular

    mat = sp.csr_matrix((lu, col_idx, row_ptr), shape=(n, n))
    lower = sp.tril(mat, k=-1, format="csr") + sp.identity(n, format="csr")
    upper = sp.triu(mat, k=0, format="csr")

    def apply(r):
        y = spsolve_triangular(lower, r, lower=True, unit_diagonal=True)
        return spsolve_triangular(upper, y, lower=False)

    return apply


def _ilu0_apply_np(n, row_ptr, col_idx, lu, diag, r):
    return _ilu0_solver_np(n, row_ptr, col_idx, lu, diag)(r)


def _ilu0_solver_jit(n, row_ptr, col_idx, lu, diag):
    def apply(r):
        return ilu0_apply(n, row_ptr, col_idx, lu, diag, r)

    return apply


if USE_NUMBA:
    _jit = numba.njit(cache=True)
    coo_to_csr = _jit(_coo_to_csr_py)
    csr_matvec = _jit(_csr_matvec_py)
    ilu0 = _jit(_ilu0_py)
    ilu0_apply = _jit(_ilu0_apply_py)
    ilu0_solver = _ilu0_solver_jit
else:
    coo_to_csr = _coo_to_csr_np
    csr_matvec = _csr_matvec_np
    # ILU(0) is inherently sequential; the fallback runs the same loop in
    # the interpreter and only the triangular solves go through scipy.
    ilu0 = _ilu0_py
    ilu0_apply = _ilu0_apply_np
    ilu0_solver = _ilu0_solver_np
