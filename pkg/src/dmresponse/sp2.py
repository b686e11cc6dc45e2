"""Ground-state density matrices by second-order spectral projection (SP2).

The spectrum of H is mapped in reversed order onto [0, 1] by an affine
transform, then driven to {0, 1} by the recursion

    X_{n+1} = (1 - sigma_n) X_n + sigma_n X_n^2,   sigma_n = +/-1,

with each sigma_n picked so the trace of X_{n+1} lands as close as possible
to the target occupation. The full branch record (Sp2Trace) is returned so
any derivative expansion can replay the identical sequence.

Works on dense arrays and on thresholded SparseMatrix storage; the sparse
path makes its branch decisions from thresholded traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError
from .linalg import SpectralBounds, gershgorin_bounds
from .sparse import SparseMatrix, _canonical, _sym_threshold, sp_gershgorin

MAX_ITERATIONS = 120

# Stop once |Tr[X^2 - X]| falls below this per-dimension floor ...
IDEMPOTENCY_FLOOR = 1e-15
# ... or once it has ceased to decrease over two consecutive steps.

# Acceptance thresholds for a converged dense run.
TRACE_TOL = 1e-8
IDEMPOTENCY_TOL = 1e-7

# Entries this small are exact zeros for every purpose here, but if left in
# the iterates they (and their pairwise products) land in the subnormal
# range, where BLAS kernels slow down by an order of magnitude on chain-like
# systems with exponentially decaying density matrices.
DENORMAL_FLUSH = 1e-150


@dataclass(frozen=True)
class Sp2Trace:
    """Record of one ground-state expansion, sufficient to replay it.

    alpha, beta_spec : scalars of the initial affine spectral transform
        (beta_spec < 0: the mapping reverses the spectrum).
    sigmas : branch choices, one per applied recursion step.
    m_steps : number of applied steps (== len(sigmas)).
    idempotency_log : per-step |Tr[X_n^2 - X_n]| of the iterate each step
        consumed, n = 1 .. m_steps.
    bounds : spectral bounds the transform was built from.
    n_occ : occupation the branch choices targeted.
    """

    alpha: float
    beta_spec: float
    sigmas: tuple[int, ...]
    m_steps: int
    idempotency_log: tuple[float, ...]
    bounds: SpectralBounds
    n_occ: int


def _init_scalars(bounds: SpectralBounds) -> tuple[float, float]:
    width = bounds.width
    if not width > 0.0:
        raise ValueError(
            f"spectral bounds [{bounds.eps_min}, {bounds.eps_max}] have no width; "
            "the spectrum cannot be mapped onto [0, 1]"
        )
    return bounds.eps_max / width, -1.0 / width


class _DenseOps:
    """Dense kernel: plain float64 matrix algebra."""

    def __init__(self, h0: np.ndarray):
        self.n = h0.shape[0]

    @staticmethod
    def _flush(m: np.ndarray) -> np.ndarray:
        m[np.abs(m) < DENORMAL_FLUSH] = 0.0
        return m

    def seed(self, alpha: float, beta: float, h0: np.ndarray) -> np.ndarray:
        return self._flush(alpha * np.eye(self.n) + beta * h0)

    def scale(self, c: float, x: np.ndarray) -> np.ndarray:
        return c * x

    def square(self, x):
        return x @ x

    def trace(self, x) -> float:
        return float(np.trace(x))

    def combine(self, sigma: int, x, x2):
        # (1 - sigma) X + sigma X^2
        return self._flush(x2 if sigma == 1 else 2.0 * x - x2)

    def pair_update(self, sigma: int, y, x):
        # (1 - sigma) Y + sigma (YX + XY); XY = (YX)^T for symmetric X, Y.
        p = y @ x
        s = p + p.T
        return self._flush(s if sigma == 1 else 2.0 * y - s)

    def idempotency_residual(self, x, x2) -> float:
        return float(np.linalg.norm(x2 - x))


class _SparseOps:
    """Thresholded kernel: every product and combination re-thresholds."""

    def __init__(self, h0: SparseMatrix):
        self.n = h0.dim
        self.tau = h0.tau

    def seed(self, alpha: float, beta: float, h0: SparseMatrix) -> SparseMatrix:
        import scipy.sparse as sp

        raw = sp.identity(self.n, format="csr") * alpha + h0.csr * beta
        return SparseMatrix(_sym_threshold(raw, self.n, self.tau), self.tau)

    def scale(self, c: float, x: SparseMatrix) -> SparseMatrix:
        return SparseMatrix(_canonical(x.csr * c), self.tau)

    def square(self, x: SparseMatrix) -> SparseMatrix:
        return SparseMatrix(_sym_threshold(x.csr @ x.csr, self.n, self.tau), self.tau)

    def trace(self, x: SparseMatrix) -> float:
        return x.trace()

    def combine(self, sigma: int, x: SparseMatrix, x2: SparseMatrix) -> SparseMatrix:
        if sigma == 1:
            return x2
        raw = x.csr * 2.0 - x2.csr
        return SparseMatrix(_sym_threshold(raw, self.n, self.tau), self.tau)

    def pair_update(self, sigma: int, y: SparseMatrix, x: SparseMatrix) -> SparseMatrix:
        p = y.csr @ x.csr
        raw = p + p.T if sigma == 1 else y.csr * 2.0 - (p + p.T)
        return SparseMatrix(_sym_threshold(raw, self.n, self.tau), self.tau)

    def idempotency_residual(self, x: SparseMatrix, x2: SparseMatrix) -> float:
        d = x2.csr - x.csr
        return float(np.sqrt(np.sum(d.data**2)))


def _ops_for(h0):
    return _SparseOps(h0) if isinstance(h0, SparseMatrix) else _DenseOps(h0)


def _expand(h0, n_occ, bounds, y_seed=None, replay_sigmas=None, store_x=False):
    """Run the SP2 recursion, optionally coupled to a derivative iterate.

    Returns (x_final, y_final, trace, stored_x). With `replay_sigmas` the
    branch sequence is consumed verbatim for exactly that many steps instead
    of re-deriving it, which reproduces the originating run bit for bit.

    Fresh runs end with a two-step trace-neutral tail (branches +1 then -1).
    At idempotency both branches leave the iterate fixed and preserve the
    occupied-virtual blocks of the derivative iterate, while their product
    annihilates its same-band blocks; without the tail a run whose very
    first iterate is already idempotent would return the raw seed as the
    derivative, which is wrong for any direction commuting with h0.
    """
    ops = _ops_for(h0)
    n = ops.n
    if not 1 <= n_occ <= n - 1:
        raise ValueError(f"n_occ must lie in [1, {n - 1}], got {n_occ}")
    if bounds is None:
        bounds = sp_gershgorin(h0) if isinstance(h0, SparseMatrix) else gershgorin_bounds(h0)
    alpha, beta = _init_scalars(bounds)

    x = ops.seed(alpha, beta, h0)
    y = ops.scale(beta, y_seed) if y_seed is not None else None
    floor = IDEMPOTENCY_FLOOR * n

    sigmas: list[int] = []
    log: list[float] = []
    stored: list = []
    target = float(n_occ)

    def apply_step(sigma, x, y, x2):
        if store_x:
            stored.append(x)
        if y is not None:
            y = ops.pair_update(sigma, y, x)
        x = ops.combine(sigma, x, x2)
        sigmas.append(sigma)
        return x, y

    if replay_sigmas is not None:
        for sigma in replay_sigmas:
            x2 = ops.square(x)
            log.append(abs(ops.trace(x2) - ops.trace(x)))
            x, y = apply_step(sigma, x, y, x2)
    else:
        converged = False
        x2 = None
        for step in range(MAX_ITERATIONS + 1):
            x2 = ops.square(x)
            tr_x = ops.trace(x)
            tr_x2 = ops.trace(x2)
            err = abs(tr_x2 - tr_x)
            log.append(err)
            if err <= floor or (len(log) >= 3 and log[-1] >= log[-2] >= log[-3]):
                converged = True
                break
            if step == MAX_ITERATIONS:
                break
            d_plus = abs(tr_x2 - target)
            d_minus = abs(2.0 * tr_x - tr_x2 - target)
            sigma = 1 if d_plus <= d_minus else -1
            x, y = apply_step(sigma, x, y, x2)

        if not converged:
            raise ConvergenceError(
                f"SP2 did not converge within {MAX_ITERATIONS} iterations "
                f"(final idempotency error {log[-1]:.3e}); this usually signals a "
                "vanishing gap at the requested occupation or bad spectral bounds",
                log,
            )

        # Derivative-flattening tail; the first step reuses the square from
        # the detection pass, so the per-step multiply count stays uniform.
        x, y = apply_step(1, x, y, x2)
        x2 = ops.square(x)
        log.append(abs(ops.trace(x2) - ops.trace(x)))
        x, y = apply_step(-1, x, y, x2)

    trace = Sp2Trace(
        alpha=alpha,
        beta_spec=beta,
        sigmas=tuple(sigmas),
        m_steps=len(sigmas),
        idempotency_log=tuple(log),
        bounds=bounds,
        n_occ=n_occ,
    )
    return x, y, trace, stored


def _accept(ops, x, trace):
    """Reject runs whose converged iterate misses the dense tolerances.

    Sparse runs inherit tau-limited accuracy, so their thresholds are scaled
    by the drop tolerance; observable-level accuracy is the contract there.
    """
    n = ops.n
    tr_err = abs(ops.trace(x) - trace.n_occ)
    if isinstance(ops, _SparseOps):
        trace_tol = max(TRACE_TOL, 10.0 * ops.tau * n)
    else:
        trace_tol = TRACE_TOL
    if tr_err > trace_tol:
        raise ConvergenceError(
            f"SP2 occupation error |Tr[D] - N_occ| = {tr_err:.3e} exceeds {trace_tol:.3e}",
            trace.idempotency_log,
        )
    if isinstance(ops, _DenseOps):
        idem = ops.idempotency_residual(x, ops.square(x))
        if idem > IDEMPOTENCY_TOL:
            raise ConvergenceError(
                f"SP2 idempotency residual ||D^2 - D||_F = {idem:.3e} "
                f"exceeds {IDEMPOTENCY_TOL:.3e}",
                trace.idempotency_log,
            )


def sp2_ground_state(h0, n_occ: int, bounds: SpectralBounds | None = None):
    """Zero-temperature density matrix of a gapped symmetric Hamiltonian.

    Parameters
    ----------
    h0 : dense symmetric ndarray or SparseMatrix.
    n_occ : number of occupied states, 1 <= n_occ <= N-1. The spectrum must
        have a nonzero gap after the n_occ-th eigenvalue (detected only via
        non-convergence).
    bounds : optional spectral bounds; tighter bounds converge faster.
        Defaults to Gershgorin discs.

    Returns
    -------
    (d0, trace) : density matrix of the same kind as h0, and the Sp2Trace
    needed to replay the expansion for derivative calculations.
    """
    x, _, trace, _ = _expand(h0, n_occ, bounds)
    _accept(_ops_for(h0), x, trace)
    return x, trace
