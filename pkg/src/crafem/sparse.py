"""Compressed sparse row matrices built on the kernels in ``_kernels``."""
import numpy as np
import scipy.sparse as sp

from . import _kernels


class CsrMatrix:
    """CSR matrix with sorted, duplicate-free column indices in every row."""

    def __init__(self, n_rows, n_cols, row_ptr, col_idx, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.row_ptr.shape != (self.n_rows + 1,):
            raise ValueError("row_ptr must have length n_rows + 1")

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, vals):
        rows = np.ascontiguousarray(rows, dtype=np.int64).ravel()
        cols = np.ascontiguousarray(cols, dtype=np.int64).ravel()
        vals = np.ascontiguousarray(vals, dtype=np.float64).ravel()
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows
                          or cols.min() < 0 or cols.max() >= n_cols):
            raise IndexError("triplet index out of range")
        row_ptr, col_idx, values = _kernels.coo_to_csr(n_rows, rows, cols, vals)
        return cls(n_rows, n_cols, row_ptr, col_idx, values)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_triplets(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def from_scipy(cls, m):
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return len(self.values)

    def matvec(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.n_cols,):
            raise ValueError(f"dimension mismatch: {x.shape} vs {self.n_cols} columns")
        return _kernels.csr_matvec(self.row_ptr, self.col_idx, self.values, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self):
        d = np.zeros(min(self.shape))
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))
        on = rows == self.col_idx
        d[rows[on]] = self.values[on]
        return d

    def to_scipy(self):
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_dense(self):
        return self.to_scipy().toarray()

    def transpose(self):
        return CsrMatrix.from_scipy(self.to_scipy().T)

    def scale(self, alpha):
        return CsrMatrix(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, alpha * self.values)

    def add(self, other, alpha=1.0):
        return CsrMatrix.from_scipy(self.to_scipy() + alpha * other.to_scipy())

    def is_valid(self):
        rp, ci = self.row_ptr, self.col_idx
        if rp[0] != 0 or rp[-1] != len(ci) or np.any(np.diff(rp) < 0):
            return False
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            return False
        for i in range(self.n_rows):
            row = ci[rp[i]:rp[i + 1]]
            if np.any(np.diff(row) <= 0):
                return False
        return True

    def write_matrix_market(self, path):
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{self.n_rows} {self.n_cols} {self.nnz}\n")
            for i, j, v in zip(rows.tolist(), self.col_idx.tolist(), self.values.tolist()):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")

    def __repr__(self):
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"


def restrict(matrix, rows, cols):
    """Submatrix on index sets ``rows`` x ``cols`` (reindexed in the given order)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= matrix.n_rows):
        raise IndexError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= matrix.n_cols):
        raise IndexError("column index out of range")
    col_map = np.full(matrix.n_cols, -1, dtype=np.int64)
    col_map[cols] = np.arange(len(cols))
    rp, ci, va = matrix.row_ptr, matrix.col_idx, matrix.values
    counts = rp[rows + 1] - rp[rows]
    starts = np.repeat(rp[rows], counts)
    offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    src = starts + offset
    new_rows = np.repeat(np.arange(len(rows)), counts)
    new_cols = col_map[ci[src]]
    keep = new_cols >= 0
    return CsrMatrix.from_triplets(len(rows), len(cols), new_rows[keep], new_cols[keep], va[src][keep])


def bmat(blocks):
    """Assemble a block matrix from a nested list of CsrMatrix or None."""
    sub = [[None if b is None else b.to_scipy() for b in row] for row in blocks]
    return CsrMatrix.from_scipy(sp.bmat(sub, format="csr"))
