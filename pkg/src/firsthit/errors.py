"""Exception hierarchy shared by the pricing modules."""

from __future__ import annotations


class FirstHitError(Exception):
    """Base class for all library errors."""


class InputDomainError(FirstHitError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateDiffusionError(InputDomainError):
    """Raised when vol * sqrt(ttm) == 0 and d1/d2 are undefined."""


class ArbitrageError(FirstHitError):
    """A skew or forward-skew input produced a digital price outside [0, df]."""

    def __init__(self, message: str, **inputs):
        self.inputs = inputs
        if inputs:
            detail = ", ".join(f"{k}={v!r}" for k, v in inputs.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class ExtrapolationError(InputDomainError):
    """A curve was queried beyond its last node."""


class NegativeForwardError(InputDomainError):
    """Cash dividends exceed the present value of the spot."""


class NonInvertibleKernelError(ArbitrageError):
    """The diagonal unwind value of the recursion fell below the kernel floor."""


class NegativeDensityError(FirstHitError):
    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"negative hitting density at step {step}: {value!r}")


class IntegrityError(FirstHitError):
    """Cumulative hitting probability exceeded one."""
