"""Numerically thresholded symmetric sparse matrix algebra.

Row-compressed storage with a drop tolerance tau. Entries are dropped in
symmetric pairs: (i, j) and (j, i) go together, and only when both magnitudes
fall below tau, so logical symmetry is preserved exactly. Thresholding is
applied after each multiply-add, not inside inner products.

The arithmetic kernel is scipy's CSR matrix product, which is deterministic
(fixed row order, fixed reduction order) so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SparseMatrix:
    """Symmetric sparse matrix with drop tolerance tau.

    `csr` is canonical scipy CSR (sorted, deduplicated column indices per
    row). Treated as immutable; operations return new instances.
    """

    csr: sp.csr_matrix
    tau: float

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    def to_dense(self) -> np.ndarray:
        return np.asarray(self.csr.todense(), dtype=np.float64)

    def trace(self) -> float:
        return float(self.csr.diagonal().sum())

    def frobenius(self) -> float:
        return float(np.sqrt(np.sum(self.csr.data**2)))

    def max_nnz_per_row(self) -> int:
        return int(np.max(np.diff(self.csr.indptr))) if self.dim else 0


def _canonical(m) -> sp.csr_matrix:
    c = sp.csr_matrix(m, dtype=np.float64)
    c.sum_duplicates()
    c.sort_indices()
    return c


def _sym_threshold(raw, dim: int, tau: float) -> sp.csr_matrix:
    """Symmetrize a raw CSR result and apply the pairwise drop rule.

    An entry pair survives when max(|raw_ij|, |raw_ji|) >= tau; surviving
    entries store the symmetrized value (raw_ij + raw_ji)/2.
    """
    r = _canonical(raw)
    rt = _canonical(r.transpose())
    s = _canonical(r + rt)
    s.data *= 0.5
    if tau > 0.0 and s.nnz:
        coo = s.tocoo()  # canonical CSR: data order matches s.data
        va = np.abs(np.asarray(r[coo.row, coo.col]).ravel())
        vb = np.abs(np.asarray(rt[coo.row, coo.col]).ravel())
        s.data[np.maximum(va, vb) < tau] = 0.0
        s.eliminate_zeros()
    return s


def sparsify(x: np.ndarray, tau: float) -> SparseMatrix:
    """Threshold a dense symmetric matrix into sparse storage."""
    if tau < 0:
        raise ValueError("drop tolerance tau must be non-negative")
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    keep = np.maximum(np.abs(x), np.abs(x.T)) >= tau
    vals = np.where(keep, 0.5 * (x + x.T), 0.0)
    return SparseMatrix(_canonical(vals), tau)


def sp_identity(n: int, tau: float) -> SparseMatrix:
    return SparseMatrix(_canonical(sp.identity(n, format="csr")), tau)


def sp_multiply_add(
    a: float,
    x: SparseMatrix,
    y: SparseMatrix,
    b: float,
    z: SparseMatrix | None,
    tau: float,
) -> SparseMatrix:
    """a*X@Y + b*Z, thresholded at tau and symmetrized.

    The symmetrization makes the result exact only when the exact result is
    symmetric (the case in every expansion here, where products enter in
    X@X or P + P^T combinations).
    """
    if tau < 0:
        raise ValueError("drop tolerance tau must be non-negative")
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    raw = (x.csr @ y.csr) * a if a != 0.0 else sp.csr_matrix((x.dim, x.dim))
    if b != 0.0:
        if z is None:
            raise ValueError("b is nonzero but no Z matrix was supplied")
        if z.dim != x.dim:
            raise ValueError(f"dimension mismatch: {x.dim} vs {z.dim}")
        raw = raw + z.csr * b
    return SparseMatrix(_sym_threshold(raw, x.dim, tau), tau)


def sp_trace_product(a: SparseMatrix, b: SparseMatrix) -> float:
    """Tr[A B] for symmetric sparse matrices (elementwise contraction)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(a.csr.multiply(b.csr).sum())


def sp_gershgorin(x: SparseMatrix):
    """Gershgorin disc bounds on sparse storage."""
    from .linalg import SpectralBounds

    d = x.csr.diagonal()
    r = np.asarray(abs(x.csr).sum(axis=1)).ravel() - np.abs(d)
    return SpectralBounds(float(np.min(d - r)), float(np.max(d + r)))
