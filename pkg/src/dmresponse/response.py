"""Linear response of the density matrix and observable susceptibilities.

The ground-state recursion of :mod:`dmresponse.sp2` is differentiated along a
chosen symmetric direction. Three equivalent routes are provided:

* forward density-matrix perturbation: seed with the Hamiltonian perturbation,
  evolve the derivative alongside the ground-state iterate (no stored
  sequence);
* forward susceptibility: the same recursion seeded with the observable,
  yielding the matrix that contracts with any Hamiltonian perturbation;
* backward susceptibility: reverse-mode differentiation of the expectation
  value, which requires the stored iterate sequence.

Also here: the position-derivative assembly for non-orthogonal (overlap)
representations, including the inverse-factor derivative and the
transformed-Hamiltonian derivative it feeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import symmetrize, trace_product
from .sp2 import Sp2Trace, _accept, _expand, _ops_for
from .sparse import SparseMatrix


@dataclass(frozen=True)
class ResponsePair:
    """Ground state plus whichever first-order objects a run produced.

    d1 is the density response to one specific Hamiltonian perturbation;
    chi is the susceptibility of one specific observable. Either may be
    absent.
    """

    d0: np.ndarray
    d1: np.ndarray | None = None
    chi: np.ndarray | None = None


def _as_dense(m):
    return m.to_dense() if isinstance(m, SparseMatrix) else m


def _check_same_kind(h0, other, name):
    if isinstance(h0, SparseMatrix) != isinstance(other, SparseMatrix):
        raise ValueError(f"{name} must be the same storage kind as h0")
    na = h0.dim if isinstance(h0, SparseMatrix) else h0.shape[0]
    nb = other.dim if isinstance(other, SparseMatrix) else other.shape[0]
    if na != nb:
        raise ValueError(f"dimension mismatch: h0 is {na}, {name} is {nb}")


def dm_perturbation_forward(h0, h1, n_occ, bounds=None, trace: Sp2Trace | None = None):
    """First-order density-matrix response to a Hamiltonian perturbation.

    Runs the merged recursion: the ground-state iterate is generated on the
    fly (never stored as a sequence) while its directional derivative along
    h1 evolves next to it, sharing every branch choice. Passing `trace`
    replays a previous run's branch sequence instead of re-deriving it.

    Returns (d0, d1, trace).
    """
    _check_same_kind(h0, h1, "h1")
    if trace is not None:
        bounds = trace.bounds
        x, y, trace_out, _ = _expand(h0, n_occ, bounds, y_seed=h1, replay_sigmas=trace.sigmas)
    else:
        x, y, trace_out, _ = _expand(h0, n_occ, bounds, y_seed=h1)
        _accept(_ops_for(h0), x, trace_out)
    return x, y, trace_out


def susceptibility_forward(h0, a, n_occ, bounds=None, trace: Sp2Trace | None = None):
    """Susceptibility of an observable by the forward expansion.

    Identical recursion to :func:`dm_perturbation_forward` with the
    observable in the seed position; the result contracts with any
    Hamiltonian perturbation to give the response of <A>.

    Returns (d0, chi, trace).
    """
    return dm_perturbation_forward(h0, a, n_occ, bounds=bounds, trace=trace)


def susceptibility_backward(h0, a, n_occ, bounds=None):
    """Susceptibility by reverse-mode differentiation of Tr[A D0].

    Mathematically equal to the forward route, but requires the full stored
    iterate sequence (m_steps matrices; for an N x N dense run the peak
    storage is m_steps * N^2 floats, recoverable from the returned trace).
    The derivative-scale factor is applied to the result rather than the
    seed.

    Returns (d0, chi, trace).
    """
    _check_same_kind(h0, a, "a")
    x, _, trace, stored = _expand(h0, n_occ, bounds, store_x=True)
    ops = _ops_for(h0)
    _accept(ops, x, trace)
    y = a
    for sigma, xn in zip(reversed(trace.sigmas), reversed(stored)):
        y = ops.pair_update(sigma, y, xn)
    chi = ops.scale(trace.beta_spec, y)
    return x, chi, trace


def linear_response_value(a, h1, pair: ResponsePair):
    """Ground-state expectation and first-order response of <A>.

    Returns (a0, a1_direct, a1_dual): a0 = Tr[A D0]; a1_direct = Tr[A D1]
    when the density response is present; a1_dual = Tr[chi H1] when the
    susceptibility is present. At least one first-order object is required.
    """
    if pair.d1 is None and pair.chi is None:
        raise ValueError("ResponsePair carries neither a density response nor a susceptibility")
    a_d = _as_dense(a)
    h1_d = _as_dense(h1)
    a0 = trace_product(a_d, _as_dense(pair.d0))
    a1_direct = trace_product(a_d, _as_dense(pair.d1)) if pair.d1 is not None else None
    a1_dual = trace_product(_as_dense(pair.chi), h1_d) if pair.chi is not None else None
    return a0, a1_direct, a1_dual


def z_position_derivative(s_inv: np.ndarray, s_tau: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Derivative of the inverse overlap factor: -(1/2) S^-1 S_tau Z.

    Exact in the factorization gauge where Z(R) is propagated by this very
    relation; for the symmetric (Loewdin) factor it agrees with the true
    derivative only up to a commutator term, which vanishes as S approaches
    the identity. The result is generally non-symmetric and is returned as
    is.
    """
    if not (s_inv.shape == s_tau.shape == z.shape):
        raise ValueError(
            f"dimension mismatch: {s_inv.shape} vs {s_tau.shape} vs {z.shape}"
        )
    return -0.5 * s_inv @ s_tau @ z


def orthogonal_hamiltonian_derivative(
    h: np.ndarray, h_tau: np.ndarray, z: np.ndarray, z_tau: np.ndarray
) -> np.ndarray:
    """Position derivative of the orthonormal-basis Hamiltonian Z^T H Z.

    Chain rule over the congruence: Z_tau^T H Z + Z^T H_tau Z + Z^T H Z_tau,
    symmetrized (the exact result is symmetric).
    """
    if not (h.shape == h_tau.shape == z.shape == z_tau.shape):
        raise ValueError("dimension mismatch between H, H_tau, Z, Z_tau")
    out = z_tau.T @ h @ z + z.T @ h_tau @ z + z.T @ h @ z_tau
    return symmetrize(out)


def observable_position_derivative(
    a: np.ndarray,
    a_tau: np.ndarray,
    d: np.ndarray,
    s_inv: np.ndarray,
    s_tau: np.ndarray,
    *,
    cross_term: float | None = None,
    chi_perp: np.ndarray | None = None,
    h_tau_perp: np.ndarray | None = None,
) -> float:
    """Position derivative of <A> in a non-orthogonal representation.

    Four contributions: the observable's own position dependence Tr[A_tau D],
    the density response term Tr[A_perp D_perp_tau], and two overlap (Pulay
    style) terms -(1/2) Tr[A S^-1 S_tau D] - (1/2) Tr[A D S_tau S^-1].

    The density response term is supplied either directly via `cross_term`
    or as the pair (chi_perp, h_tau_perp), contracted as
    Tr[chi_perp h_tau_perp]; the susceptibility form lets one converged
    chi_perp serve every atomic displacement.
    """
    if (cross_term is None) == (chi_perp is None and h_tau_perp is None):
        if cross_term is None:
            raise ValueError("supply either cross_term or the pair (chi_perp, h_tau_perp)")
        raise ValueError("cross_term and (chi_perp, h_tau_perp) are mutually exclusive")
    if cross_term is None:
        if chi_perp is None or h_tau_perp is None:
            raise ValueError("both chi_perp and h_tau_perp are required")
        cross = trace_product(chi_perp, h_tau_perp)
    else:
        cross = float(cross_term)
    shapes = {a.shape, a_tau.shape, d.shape, s_inv.shape, s_tau.shape}
    if len(shapes) != 1:
        raise ValueError("dimension mismatch among A, A_tau, D, S_inv, S_tau")
    pulay = -0.5 * trace_product(a @ s_inv @ s_tau, d) - 0.5 * trace_product(
        a @ d @ s_tau, s_inv
    )
    return trace_product(a_tau, d) + cross + pulay
