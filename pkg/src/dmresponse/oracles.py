"""Independent ground-truth generators for the recursive expansions.

Everything here is deliberately built on routes the recursions never take:
central finite differences, the exact eigenbasis derivative of the spectral
projector, and a bit-level binary16 encoder written directly against the
IEEE 754 layout. The recursive implementations are tested against these;
these never call the code they check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import EigenDecomposition, sym_eigendecompose, symmetrize, trace_product

GAP_GUARD = 1e-8


def finite_difference_response(
    builder: Callable[[np.ndarray], np.ndarray],
    h0: np.ndarray,
    direction: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central difference (builder(h0 + h dir) - builder(h0 - h dir)) / 2h.

    Second-order accurate in h for builders smooth along the direction.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    plus = builder(h0 + h * direction)
    minus = builder(h0 - h * direction)
    return (plus - minus) / (2.0 * h)


def projector_derivative_exact(
    eig: EigenDecomposition, direction: np.ndarray, mu: float
) -> np.ndarray:
    """Exact zero-temperature derivative of the occupied-space projector.

    Eigenbasis divided differences of the step function: occupied-virtual
    blocks carry 1/(li - lj), same-occupation blocks vanish. Requires an
    open gap: any eigenvalue within GAP_GUARD of mu is rejected.
    """
    lam = eig.values
    if np.min(np.abs(lam - mu)) <= GAP_GUARD:
        raise ValueError(
            f"eigenvalue within {GAP_GUARD:g} of mu = {mu}: the projector "
            "derivative is singular at a closing gap"
        )
    theta = (lam < mu).astype(np.float64)
    num = theta[:, None] - theta[None, :]
    diff = lam[:, None] - lam[None, :]
    ell = np.zeros_like(num)
    cross = num != 0.0
    ell[cross] = num[cross] / diff[cross]
    w = eig.vectors.T @ direction @ eig.vectors
    return symmetrize(eig.vectors @ (ell * w) @ eig.vectors.T)


def binary16_reference_bits(x) -> np.ndarray:
    """Encode finite float64 values to IEEE 754 binary16 bit patterns.

    Pure integer manipulation of the float64 layout with round-to-nearest,
    ties-to-even; normals, subnormals, signed zeros, and overflow to the
    infinity pattern are all handled explicitly. This is the root of trust
    for the half-precision emulation and shares no code with it.
    """
    xv = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    if not np.all(np.isfinite(xv)):
        raise ValueError("binary16 reference encoder requires finite inputs")
    bits = xv.view(np.uint64)
    sign = ((bits >> np.uint64(63)) & np.uint64(1)).astype(np.uint16) << np.uint16(15)
    exp = ((bits >> np.uint64(52)) & np.uint64(0x7FF)).astype(np.int64)
    frac = bits & np.uint64((1 << 52) - 1)

    out = sign.copy()  # covers +/-0 and everything rounding to zero
    mant53 = frac | np.uint64(1 << 52)
    e_unb = exp - 1023

    # Normal half-precision candidates: round 52 explicit bits down to 10.
    normal = (exp > 0) & (e_unb >= -15)
    # e_unb == -15 can round up into the smallest normal; treat it in the
    # subnormal branch below, which handles that promotion bit-exactly.
    normal &= e_unb >= -14
    if np.any(normal):
        keep = (frac[normal] >> np.uint64(42)).astype(np.uint64)
        rem = frac[normal] & np.uint64((1 << 42) - 1)
        half = np.uint64(1 << 41)
        up = (rem > half) | ((rem == half) & ((keep & np.uint64(1)) == np.uint64(1)))
        keep = keep + up.astype(np.uint64)
        e_out = e_unb[normal] + 15
        spill = keep == np.uint64(1024)
        keep = np.where(spill, np.uint64(0), keep)
        e_out = e_out + spill.astype(np.int64)
        overflow = e_out >= 31
        code = (
            (np.minimum(e_out, 31).astype(np.uint16) << np.uint16(10))
            | keep.astype(np.uint16)
        )
        code = np.where(overflow, np.uint16(0x7C00), code).astype(np.uint16)
        out[normal] |= code

    # Subnormal half-precision (or promotion to the smallest normal): place
    # the 53-bit significand on the 2^-24 grid and round.
    sub = (exp > 0) & (e_unb < -14) & (e_unb >= -26)
    if np.any(sub):
        shift = (np.int64(28) - e_unb[sub]).astype(np.uint64)  # in [43, 54]
        keep = mant53[sub] >> shift
        rem = mant53[sub] & ((np.uint64(1) << shift) - np.uint64(1))
        half = np.uint64(1) << (shift - np.uint64(1))
        up = (rem > half) | ((rem == half) & ((keep & np.uint64(1)) == np.uint64(1)))
        keep = keep + up.astype(np.uint64)
        # keep == 1024 spills into the exponent field and lands exactly on
        # the smallest normal's pattern.
        out[sub] |= keep.astype(np.uint16)

    # exp == 0 (float64 subnormals, < 2^-1022) and e_unb < -26 both round to
    # signed zero, already in `out`.
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return out[0]
    return out.reshape(np.asarray(x).shape)


@dataclass(frozen=True)
class DualityAuditReport:
    """All routes to one response value, with their pairwise deviations."""

    values: dict[str, float]
    max_abs_deviation: float
    max_rel_deviation: float
    details: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "values": dict(self.values),
            "max_abs_deviation": self.max_abs_deviation,
            "max_rel_deviation": self.max_rel_deviation,
            "details": dict(self.details),
        }


def _pairwise(values: dict[str, float]) -> tuple[float, float, dict[str, float]]:
    names = sorted(values)
    scale = max(max(abs(v) for v in values.values()), 1e-12)
    details = {}
    worst = 0.0
    for i, na in enumerate(names):
        for nb in names[i + 1 :]:
            dev = abs(values[na] - values[nb])
            details[f"{na}|{nb}"] = dev
            worst = max(worst, dev)
    return worst, worst / scale, details


def duality_audit(h0, a, h1, n_occ, thermal=None, fd_step: float = 1e-5) -> DualityAuditReport:
    """Compute one response value by every available route and report the
    pairwise deviations.

    Zero temperature (thermal None): forward density response, forward and
    backward susceptibilities, and the exact eigenbasis projector derivative.
    Finite temperature (thermal = ThermalConfig): both trace-neutral
    eigenbasis routes plus a finite-difference of the occupation-constrained
    Fermi matrix.
    """
    if thermal is None:
        from .response import dm_perturbation_forward, susceptibility_backward, susceptibility_forward

        _, d1, _ = dm_perturbation_forward(h0, h1, n_occ)
        _, chi_f, _ = susceptibility_forward(h0, a, n_occ)
        _, chi_b, _ = susceptibility_backward(h0, a, n_occ)
        eig = sym_eigendecompose(h0)
        mu = 0.5 * (eig.values[n_occ - 1] + eig.values[n_occ])
        oracle = projector_derivative_exact(eig, h1, mu)
        values = {
            "direct_forward": trace_product(a, d1),
            "dual_forward": trace_product(chi_f, h1),
            "dual_backward": trace_product(chi_b, h1),
            "oracle_eigenbasis": trace_product(a, oracle),
        }
    else:
        from .thermal import canonical_dm_response, canonical_susceptibility, fermi_matrix_and_mu

        d1, _ = canonical_dm_response(h0, h1, thermal.beta_t, thermal.n_occ)
        chi, _ = canonical_susceptibility(h0, a, thermal.beta_t, thermal.n_occ)

        def observable_at(hmat):
            d, _ = fermi_matrix_and_mu(hmat, thermal.beta_t, thermal.n_occ)
            return trace_product(a, d)

        fd = (observable_at(h0 + fd_step * h1) - observable_at(h0 - fd_step * h1)) / (
            2.0 * fd_step
        )
        values = {
            "direct_thermal": trace_product(a, d1),
            "dual_thermal": trace_product(chi, h1),
            "oracle_finite_difference": fd,
        }

    worst_abs, worst_rel, details = _pairwise(values)
    return DualityAuditReport(
        values=values,
        max_abs_deviation=worst_abs,
        max_rel_deviation=worst_rel,
        details=details,
    )
