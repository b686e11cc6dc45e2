"""Finite-temperature density matrices and canonical susceptibilities.

Fractional occupations are handled by evaluating the Fermi function, and its
exact directional derivatives, in a diagonal eigenbasis. The derivative of a
matrix function along a direction is the eigenbasis Hadamard product with the
divided-difference (Loewner) matrix; the chemical-potential response mu1 is
solved in closed form so that every susceptibility is exactly trace neutral.

This route requires a diagonalization, so it does not scale to large sparse
problems; at desk scale it doubles as the oracle for the recursive zero-T
expansions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .linalg import EigenDecomposition, sym_eigendecompose, symmetrize

# Relative eigenvalue-spacing below which divided differences switch to the
# midpoint derivative (avoids catastrophic cancellation).
DEGENERACY_DELTA = 1e-8

MU_TRACE_TOL = 1e-12
MU_MAX_BISECTIONS = 500


@dataclass(frozen=True)
class ThermalConfig:
    """Inverse temperature, occupation target, and (once solved) the
    chemical potential and its first-order response."""

    beta_t: float
    n_occ: float
    mu0: float | None = None
    mu1: float | None = None

    def __post_init__(self):
        if self.beta_t <= 0:
            raise ValueError("inverse temperature beta_t must be positive")


def fermi_function(eps, beta_t: float, mu: float):
    """Occupation 1 / (exp(beta_t (eps - mu)) + 1), overflow-safe."""
    return expit(-beta_t * (np.asarray(eps, dtype=np.float64) - mu))


def fermi_derivative(eps, beta_t: float, mu: float):
    """d/d eps of the occupation: -beta_t f (1 - f), always <= 0."""
    f = fermi_function(eps, beta_t, mu)
    return -beta_t * f * (1.0 - f)


def _solve_mu(values: np.ndarray, beta_t: float, n_occ: float) -> float:
    """Bisect the chemical potential so the total occupation hits n_occ."""
    lo = float(values[0]) - 10.0 / beta_t
    hi = float(values[-1]) + 10.0 / beta_t

    def occupation(mu):
        return float(np.sum(fermi_function(values, beta_t, mu))) - n_occ

    f_lo, f_hi = occupation(lo), occupation(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise ValueError(
            f"no chemical potential bracketed in [{lo:.6g}, {hi:.6g}] for "
            f"occupation target {n_occ}"
        )
    for _ in range(MU_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid = occupation(mid)
        if abs(f_mid) <= MU_TRACE_TOL:
            return mid
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * max(1.0, abs(mid)):
            break
    mid = 0.5 * (lo + hi)
    if abs(occupation(mid)) > 1e-10:
        raise ValueError(
            f"chemical potential bisection stalled in [{lo:.6g}, {hi:.6g}]: "
            f"occupation error {occupation(mid):.3e}"
        )
    return mid


def fermi_matrix_and_mu(h: np.ndarray, beta_t: float, n_occ: float):
    """Fermi-smeared density matrix with the chemical potential solved so
    that Tr[D] = n_occ.

    Returns (d, mu0); d is symmetric with eigenvalues in (0, 1).
    """
    if beta_t <= 0:
        raise ValueError("inverse temperature beta_t must be positive")
    n = h.shape[0]
    if not 0.0 < n_occ < n:
        raise ValueError(f"n_occ must lie in (0, {n}), got {n_occ}")
    eig = sym_eigendecompose(h)
    mu0 = _solve_mu(eig.values, beta_t, n_occ)
    occ = fermi_function(eig.values, beta_t, mu0)
    d = (eig.vectors * occ) @ eig.vectors.T
    return symmetrize(d), mu0


def loewner_matrix(
    values: np.ndarray,
    f: Callable,
    fprime: Callable,
    degeneracy_delta: float = DEGENERACY_DELTA,
) -> np.ndarray:
    """Divided-difference matrix of f over an eigenvalue list.

    L_ij = (f(li) - f(lj)) / (li - lj) wherever the spacing exceeds
    degeneracy_delta * max(1, |li|, |lj|); nearly degenerate pairs (and the
    diagonal) use f' at the midpoint. f and fprime must accept arrays.
    """
    lam = np.asarray(values, dtype=np.float64)
    li = lam[:, None]
    lj = lam[None, :]
    diff = li - lj
    scale = np.maximum(1.0, np.maximum(np.abs(li), np.abs(lj)))
    near = np.abs(diff) <= degeneracy_delta * scale
    fv = np.asarray(f(lam), dtype=np.float64)
    num = fv[:, None] - fv[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = num / np.where(near, 1.0, diff)
    mid = np.asarray(fprime(0.5 * (li + lj)), dtype=np.float64)
    return np.where(near, mid, quotient)


def loewner_directional_derivative(
    eig: EigenDecomposition,
    direction: np.ndarray,
    f: Callable,
    fprime: Callable,
    degeneracy_delta: float = DEGENERACY_DELTA,
) -> np.ndarray:
    """Exact derivative of a matrix function along a symmetric direction.

    Evaluates V (L o (V^T direction V)) V^T with L the divided-difference
    matrix of f on the eigenvalues of the unperturbed matrix.
    """
    if direction.shape != eig.vectors.shape:
        raise ValueError(
            f"dimension mismatch: direction {direction.shape} vs basis {eig.vectors.shape}"
        )
    ell = loewner_matrix(eig.values, f, fprime, degeneracy_delta)
    w = eig.vectors.T @ direction @ eig.vectors
    out = eig.vectors @ (ell * w) @ eig.vectors.T
    return symmetrize(out)


def trace_neutral_derivative(
    eig: EigenDecomposition, direction: np.ndarray, beta_t: float, mu0: float
):
    """Fermi-function derivative along (direction - mu1 * I), with mu1 solved
    in closed form so the result is traceless.

    By linearity of the derivative in its direction,
    mu1 = Tr[deriv(direction)] / Tr[deriv(I)]; the denominator is the sum of
    f' over the spectrum. Raises when that sum underflows to zero, which
    signals an ill-posed chemical-potential response.

    Returns (deriv, mu1).
    """

    def f(x):
        return fermi_function(x, beta_t, mu0)

    def fp(x):
        return fermi_derivative(x, beta_t, mu0)

    ell = loewner_matrix(eig.values, f, fp)
    w = eig.vectors.T @ direction @ eig.vectors
    r_dir = eig.vectors @ (ell * w) @ eig.vectors.T
    tr_dir = float(np.sum(np.diagonal(ell) * np.diagonal(w)))
    tr_ident = float(np.sum(fp(eig.values)))
    if tr_ident == 0.0:
        raise ValueError(
            "Tr[d f / d mu] vanished: the chemical-potential response is "
            "ill-posed at this temperature"
        )
    mu1 = tr_dir / tr_ident
    r_ident = (eig.vectors * fp(eig.values)) @ eig.vectors.T
    return symmetrize(r_dir - mu1 * r_ident), mu1


def canonical_susceptibility(h: np.ndarray, a: np.ndarray, beta_t: float, n_occ: float):
    """Finite-temperature susceptibility of an observable at fixed occupation.

    The chemical-potential response makes the result exactly trace neutral:
    contracting with any Hamiltonian perturbation gives the canonical-ensemble
    response of <A>.

    Returns (chi, mu1).
    """
    eig, mu0 = _eig_and_mu(h, beta_t, n_occ)
    return trace_neutral_derivative(eig, a, beta_t, mu0)


def canonical_dm_response(h: np.ndarray, h1: np.ndarray, beta_t: float, n_occ: float):
    """Finite-temperature density response to a Hamiltonian perturbation at
    fixed occupation (the dual of :func:`canonical_susceptibility`).

    Returns (d1, mu1).
    """
    eig, mu0 = _eig_and_mu(h, beta_t, n_occ)
    return trace_neutral_derivative(eig, h1, beta_t, mu0)


def _eig_and_mu(h, beta_t, n_occ):
    if beta_t <= 0:
        raise ValueError("inverse temperature beta_t must be positive")
    n = h.shape[0]
    if not 0.0 < n_occ < n:
        raise ValueError(f"n_occ must lie in (0, {n}), got {n_occ}")
    eig = sym_eigendecompose(h)
    mu0 = _solve_mu(eig.values, beta_t, n_occ)
    return eig, mu0
