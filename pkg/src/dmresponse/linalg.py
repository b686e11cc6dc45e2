"""Dense symmetric matrix algebra.

Storage is plain float64 ``numpy`` arrays kept logically symmetric. The
eigensolver is a cyclic Jacobi iteration chosen for determinism and for the
high orthogonality of its eigenvectors, which every eigenbasis-based check in
the test suite leans on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConvergenceError

# Constructors repair asymmetry below this (relative to ||X||_F) silently;
# anything larger is treated as corrupt input, not rounding noise.
ASYMMETRY_RTOL = 1e-8

# Positive definiteness: smallest eigenvalue must exceed this fraction of the
# largest one.
SPD_RTOL = 1e-10

JACOBI_TOL_FACTOR = 1e-12
JACOBI_MAX_SWEEPS = 30


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues ascending (ties kept in original order) and orthonormal
    eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralBounds:
    """Interval guaranteed to enclose the spectrum of a symmetric matrix."""

    eps_min: float
    eps_max: float

    @property
    def width(self) -> float:
        return self.eps_max - self.eps_min


def symmetric_matrix(data) -> np.ndarray:
    """Validate and symmetrize user-supplied matrix data.

    Returns (X + X^T)/2 as a fresh float64 array. Asymmetry above
    ``ASYMMETRY_RTOL * ||X||_F`` is rejected rather than repaired, since that
    points at corrupt input instead of file-format rounding noise.
    """
    x = np.array(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("matrix dimension must be at least 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix contains non-finite entries")
    norm = float(np.linalg.norm(x))
    asym = asymmetry_norm(x)
    if asym > ASYMMETRY_RTOL * norm:
        raise ValueError(
            f"matrix is not symmetric: ||X - X^T||_F = {asym:.3e} "
            f"exceeds {ASYMMETRY_RTOL:g} * ||X||_F = {ASYMMETRY_RTOL * norm:.3e}"
        )
    return 0.5 * (x + x.T)


def asymmetry_norm(x: np.ndarray) -> float:
    """Frobenius norm of X - X^T."""
    return float(np.linalg.norm(x - x.T))


def symmetrize(x: np.ndarray) -> np.ndarray:
    """(X + X^T)/2 without validation, for repairing round-off on results
    whose exact value is symmetric."""
    return 0.5 * (x + x.T)


def trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """Tr[A B] for general square matrices."""
    return float(np.einsum("ij,ji->", a, b))


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def _offdiag_norm(a: np.ndarray) -> float:
    # Computed on a diagonal-zeroed copy: subtracting sum(diag^2) from
    # sum(a^2) cancels catastrophically and floors near ||a||*sqrt(eps).
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.linalg.norm(b))


def sym_eigendecompose(x: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    x : symmetric float64 array.
    max_sweeps : sweep cap; exceeding it raises ConvergenceError carrying the
        residual off-diagonal norm.

    Returns
    -------
    EigenDecomposition with eigenvalues ascending and V columns orthonormal,
    satisfying ``V diag(w) V^T == x`` to round-off. Deterministic: identical
    input yields bit-identical output.
    """
    a = np.array(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return EigenDecomposition(values=a.diagonal().copy(), vectors=v)

    tol = JACOBI_TOL_FACTOR * float(np.linalg.norm(a))
    # Rotations on entries far below the convergence target are wasted work;
    # skipping them cannot stall convergence since n^2 such entries still sum
    # below tol^2.
    skip = tol / (10.0 * n)

    converged = _offdiag_norm(a) <= tol
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J applied as column then row updates.
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        converged = _offdiag_norm(a) <= tol
    if not converged:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps: "
            f"off-diagonal norm {_offdiag_norm(a):.3e} exceeds {tol:.3e}"
        )

    vals = a.diagonal().copy()
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(values=vals[order], vectors=v[:, order])


def apply_matrix_function(x: np.ndarray, f: Callable[[float], float]) -> np.ndarray:
    """Evaluate a scalar function of a symmetric matrix in its eigenbasis.

    Returns ``V diag(f(w)) V^T`` symmetrized. Raises ValueError naming the
    eigenvalue if f evaluates to a non-finite value there.
    """
    eig = sym_eigendecompose(x)
    fv = np.array([float(f(lam)) for lam in eig.values])
    bad = ~np.isfinite(fv)
    if np.any(bad):
        lam = eig.values[bad][0]
        raise ValueError(f"matrix function is not finite at eigenvalue {lam!r}")
    y = (eig.vectors * fv) @ eig.vectors.T
    return symmetrize(y)


def inverse_sqrt_factor(s: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root Z of an SPD matrix, with Z^T S Z = I.

    Raises ValueError reporting the offending eigenvalue when S is not
    positive definite to within SPD_RTOL of its largest eigenvalue.
    """
    eig = sym_eigendecompose(s)
    lmin = float(eig.values[0])
    lmax = float(eig.values[-1])
    if lmin <= SPD_RTOL * max(lmax, 0.0):
        raise ValueError(
            f"matrix is not positive definite: smallest eigenvalue {lmin:.6e} "
            f"(largest {lmax:.6e})"
        )
    z = (eig.vectors / np.sqrt(eig.values)) @ eig.vectors.T
    return symmetrize(z)


_CONGRUENCE_DIRECTIONS = ("to_orthogonal", "from_orthogonal", "density_from_orthogonal")


def congruence_transform(x: np.ndarray, z: np.ndarray, direction: str) -> np.ndarray:
    """Map operators and densities between overlapping and orthonormal bases.

    direction:
      * ``to_orthogonal``           -> Z^T X Z    (operators H, A)
      * ``density_from_orthogonal`` -> Z X Z^T    (densities, susceptibilities)
      * ``from_orthogonal``         -> Z^-T X Z^-1 (inverse map for operators)
    """
    if x.shape != z.shape or x.shape[0] != x.shape[1]:
        raise ValueError(f"dimension mismatch: X {x.shape} vs Z {z.shape}")
    if direction == "to_orthogonal":
        y = z.T @ x @ z
    elif direction == "density_from_orthogonal":
        y = z @ x @ z.T
    elif direction == "from_orthogonal":
        w = np.linalg.solve(z.T, x)  # Z^-T X
        y = np.linalg.solve(z.T, w.T).T  # (Z^-T X) Z^-1
    else:
        raise ValueError(
            f"unknown direction {direction!r}; expected one of {_CONGRUENCE_DIRECTIONS}"
        )
    return symmetrize(y)


def gershgorin_bounds(x: np.ndarray) -> SpectralBounds:
    """Disc bounds enclosing the spectrum: eps_min = min_i (x_ii - r_i),
    eps_max = max_i (x_ii + r_i) with r_i the off-diagonal row radius."""
    d = np.diagonal(x)
    r = np.sum(np.abs(x), axis=1) - np.abs(d)
    return SpectralBounds(float(np.min(d - r)), float(np.max(d + r)))
