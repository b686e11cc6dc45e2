"""Software emulation of half-precision tensor-core arithmetic.

A near-single-precision matrix is carried as two binary16 factors, a high
part and a low part holding the rounding remainder. Products are expanded
over the parts with the low*low term dropped, each elementary product taken
with binary16-exact factors and single-precision accumulation. For a
symmetric square the transpose of the high*low product replaces one
multiplication, so one iterate-square costs 2 elementary products and one
general symmetrized product costs 3: 5 per expansion step.

Values are stored widened (float32 arrays constrained to the binary16 grid);
nothing here dispatches to real low-precision hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError
from .linalg import gershgorin_bounds
from .sp2 import IDEMPOTENCY_FLOOR, MAX_ITERATIONS, Sp2Trace, _init_scalars

BINARY16_MAX = 65504.0


def round_binary16(x: float) -> float:
    """Round one finite value to the nearest binary16 (ties to even).

    Magnitudes beyond the largest binary16 normal raise OverflowError: the
    expansions this feeds keep their iterates inside [0, 1], so an overflow
    is a bug or bad spectral bounds, never something to saturate away.
    """
    if not np.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x!r} to binary16")
    if abs(x) > BINARY16_MAX:
        raise OverflowError(f"{x!r} exceeds the binary16 range (max {BINARY16_MAX})")
    return float(np.float16(x))


def _round_array16(x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot round non-finite values to binary16")
    if np.any(np.abs(x) > BINARY16_MAX):
        bad = float(np.max(np.abs(x)))
        raise OverflowError(f"entry magnitude {bad!r} exceeds the binary16 range")
    return np.float16(x).astype(np.float32)


@dataclass(frozen=True)
class SplitMatrix:
    """Two-term binary16 representation: high = fl16(X),
    low = fl16(X - fl32(high))."""

    high: np.ndarray
    low: np.ndarray

    def __post_init__(self):
        for name, part in (("high", self.high), ("low", self.low)):
            if part.dtype != np.float32:
                raise ValueError(f"{name} part must be float32 storage")
            if not np.all(np.float16(part) == part):
                raise ValueError(f"{name} part has entries off the binary16 grid")
            if not np.all(np.isfinite(part)):
                raise ValueError(f"{name} part has non-finite entries")

    @property
    def dim(self) -> int:
        return self.high.shape[0]

    def widened(self) -> np.ndarray:
        """high + low in float64."""
        return self.high.astype(np.float64) + self.low.astype(np.float64)


def split(x: np.ndarray) -> SplitMatrix:
    """Split a matrix into its two-term binary16 representation."""
    high = _round_array16(np.asarray(x, dtype=np.float64))
    low = _round_array16(np.asarray(x, dtype=np.float64) - high.astype(np.float64))
    return SplitMatrix(high=high, low=low)


@dataclass
class MultCounter:
    """Counts elementary half-precision matrix products."""

    count: int = 0

    def add(self, k: int = 1):
        self.count += k


def _gemm16(a: np.ndarray, b: np.ndarray, counter: MultCounter | None) -> np.ndarray:
    # binary16-exact float32 factors, float32 (BLAS sgemm) accumulation
    if counter is not None:
        counter.add()
    return a @ b


def mixed_gemm(
    x: SplitMatrix,
    y: SplitMatrix,
    symmetric_same: bool = False,
    *,
    include_low_low: bool = False,
    counter: MultCounter | None = None,
) -> np.ndarray:
    """Split-representation matrix product, widened to float64.

    General case: high*high + high*low + low*high, three elementary
    products. With `symmetric_same` (x is y and symmetric) the low*high term
    is the transpose of high*low, leaving two products. The dropped low*low
    term can be re-included for error studies via `include_low_low`.
    """
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if symmetric_same:
        p_hh = _gemm16(x.high, x.high, counter)
        p_hl = _gemm16(x.high, x.low, counter)
        out = p_hh + p_hl + p_hl.T
    else:
        out = (
            _gemm16(x.high, y.high, counter)
            + _gemm16(x.high, y.low, counter)
            + _gemm16(x.low, y.high, counter)
        )
    if include_low_low:
        out = out + _gemm16(x.low, y.low, counter)
    return out.astype(np.float64)


def _mixed_symmetrized_pair(
    y: SplitMatrix, x: SplitMatrix, counter: MultCounter | None
) -> np.ndarray:
    """YX + XY for symmetric X, Y in three elementary products.

    Expanding both orderings over the parts (low*low dropped) gives six
    terms that pair up as a product plus its transpose: Yh Xh, Yh Xl, and
    Xh Yl cover all of them.
    """
    q = (
        _gemm16(y.high, x.high, counter)
        + _gemm16(y.high, x.low, counter)
        + _gemm16(x.high, y.low, counter)
    )
    return q + q.T


@dataclass(frozen=True)
class MixedPipelineResult:
    """Split-precision expansion outputs: ground state, response matrix,
    replayable branch record, and the elementary-product count."""

    d0: np.ndarray
    response: np.ndarray
    trace: Sp2Trace
    mult_count: int


PIPELINE_MODES = ("perturbation", "susceptibility")


def _low_precision_expand(h0, seed, n_occ, bounds, use_split: bool) -> MixedPipelineResult:
    """Shared float32-iterate expansion loop.

    With `use_split` every product goes through the two-term binary16
    representation (2 elementary products per iterate-square, 3 per
    symmetrized pair: 5 per step); otherwise products are plain float32
    multiplies (1 + 1 per step), the pure single-precision reference.
    """
    n = h0.shape[0]
    if seed.shape != h0.shape:
        raise ValueError(f"dimension mismatch: h0 {h0.shape} vs seed {seed.shape}")
    if not 1 <= n_occ <= n - 1:
        raise ValueError(f"n_occ must lie in [1, {n - 1}], got {n_occ}")
    if bounds is None:
        bounds = gershgorin_bounds(h0)
    alpha, beta = _init_scalars(bounds)

    counter = MultCounter()
    x32 = (alpha * np.eye(n) + beta * h0).astype(np.float32)
    y32 = (beta * seed).astype(np.float32)
    floor = IDEMPOTENCY_FLOOR * n

    sigmas: list[int] = []
    log: list[float] = []

    def square(m32: np.ndarray) -> np.ndarray:
        if use_split:
            sp = split(m32)
            return mixed_gemm(sp, sp, symmetric_same=True, counter=counter).astype(np.float32)
        counter.add()
        return m32 @ m32

    def step(sigma: int, x2_32: np.ndarray):
        nonlocal x32, y32
        if use_split:
            pair = _mixed_symmetrized_pair(split(y32), split(x32), counter).astype(np.float32)
        else:
            counter.add()
            p = y32 @ x32
            pair = p + p.T
        y32 = pair if sigma == 1 else (2.0 * y32 - pair).astype(np.float32)
        x32 = x2_32 if sigma == 1 else (2.0 * x32 - x2_32).astype(np.float32)
        sigmas.append(sigma)

    converged = False
    x2_32 = None
    for it in range(MAX_ITERATIONS + 1):
        x2_32 = square(x32)
        tr_x = float(np.trace(x32.astype(np.float64)))
        tr_x2 = float(np.trace(x2_32.astype(np.float64)))
        err = abs(tr_x2 - tr_x)
        log.append(err)
        if err <= floor or (len(log) >= 3 and log[-1] >= log[-2] >= log[-3]):
            converged = True
            break
        if it == MAX_ITERATIONS:
            break
        d_plus = abs(tr_x2 - n_occ)
        d_minus = abs(2.0 * tr_x - tr_x2 - n_occ)
        step(1 if d_plus <= d_minus else -1, x2_32)

    if not converged:
        raise ConvergenceError(
            f"low-precision expansion did not converge within {MAX_ITERATIONS} "
            f"iterations (final idempotency error {log[-1]:.3e}); small gaps "
            "are often unresolvable at reduced precision",
            log,
        )

    # Same derivative-flattening tail as the double-precision engine; the
    # first tail step consumes the square from the detection pass.
    step(1, x2_32)
    x2_32 = square(x32)
    log.append(
        abs(float(np.trace(x2_32.astype(np.float64))) - float(np.trace(x32.astype(np.float64))))
    )
    step(-1, x2_32)

    trace = Sp2Trace(
        alpha=alpha,
        beta_spec=beta,
        sigmas=tuple(sigmas),
        m_steps=len(sigmas),
        idempotency_log=tuple(log),
        bounds=bounds,
        n_occ=n_occ,
    )
    return MixedPipelineResult(
        d0=x32.astype(np.float64),
        response=y32.astype(np.float64),
        trace=trace,
        mult_count=counter.count,
    )


def mixed_response_pipeline(
    h0: np.ndarray,
    seed: np.ndarray,
    n_occ: int,
    mode: str = "susceptibility",
    bounds=None,
) -> MixedPipelineResult:
    """Ground state plus first-order response, entirely in split precision.

    Every dense product is a split-representation multiply with float32
    accumulation; iterates are kept in float32 and re-split before each
    step. Branch decisions and trace comparisons run in float64 on the
    accumulated iterate. The elementary-product count is exactly 5 per
    recursion step. `mode` only labels the seed: "perturbation" treats it as
    a Hamiltonian perturbation, "susceptibility" as an observable.
    """
    if mode not in PIPELINE_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {PIPELINE_MODES}")
    return _low_precision_expand(h0, seed, n_occ, bounds, use_split=True)


def single_precision_pipeline(
    h0: np.ndarray,
    seed: np.ndarray,
    n_occ: int,
    mode: str = "susceptibility",
    bounds=None,
) -> MixedPipelineResult:
    """The same expansion with plain float32 products: the pure
    single-precision reference the split representation is judged against."""
    if mode not in PIPELINE_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {PIPELINE_MODES}")
    return _low_precision_expand(h0, seed, n_occ, bounds, use_split=False)
