"""Exception types shared across the package."""

from __future__ import annotations


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its acceptance tolerance.

    Carries the per-iteration residual (or idempotency-error) history so the
    caller can distinguish a vanishing gap from bad spectral bounds or an
    over-strong coupling kernel.
    """

    def __init__(self, message: str, history: list[float] | tuple[float, ...] = ()):
        super().__init__(message)
        self.history = tuple(float(v) for v in history)
