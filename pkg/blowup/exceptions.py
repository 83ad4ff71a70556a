"""Exception hierarchy shared by the numerical modules and the CLI."""

from typing import Optional, Sequence

import numpy as np


class CycleToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class DomainError(CycleToolkitError, ValueError):
    """Argument outside the domain where the model is defined."""


class PreconditionError(CycleToolkitError, ValueError):
    """A documented precondition of an operation does not hold."""


class NotBracketedError(CycleToolkitError):
    """No sign change of the bisection function on the given interval."""


class IntegrationError(CycleToolkitError, RuntimeError):
    """The integrator could not advance the solution."""


class BlowUpError(IntegrationError):
    """Step size underflow or state-norm overflow.

    The branch continuation reads this as the orbit escaping to infinity.
    """

    def __init__(self, message: str, t: float, state: np.ndarray):
        super().__init__(message)
        self.t = float(t)
        self.state = np.array(state, dtype=float)


class NoReturnError(CycleToolkitError, RuntimeError):
    """The trajectory did not come back to the Poincare section in time."""


class ConvergenceError(CycleToolkitError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class CycleNotFoundError(ConvergenceError):
    """Secant iteration on the return-map displacement failed."""


class DegeneracyError(ConvergenceError):
    """Newton met a (numerically) singular Jacobian."""


class NonContractionError(ConvergenceError):
    """Picard iteration exceeded its budget."""

    def __init__(self, message: str, estimate: float, last_iterate=None):
        super().__init__(message, last_iterate)
        self.estimate = float(estimate)


class SeedError(CycleToolkitError):
    """No cycle could be found to start a continuation from."""


class InconclusiveBoxError(CycleToolkitError):
    """The sublevel set is not enclosed by the search box."""


class ResonanceError(CycleToolkitError, ArithmeticError):
    """L(inw; lambda) vanishes for a represented harmonic n."""

    def __init__(self, n: int, modulus: float):
        super().__init__(
            f"resonance at harmonic n={n}: |L(inw;lambda)| = {modulus:.3e}"
        )
        self.n = int(n)
        self.modulus = float(modulus)


class OutOfBallError(CycleToolkitError):
    """Iterate left the ball ||(u, v, y)|| <= q."""

    def __init__(self, norm: float, q: float):
        super().__init__(
            f"state norm {norm:.6g} exceeds ball radius q={q:.6g}; "
            "reduce the nonlinearity size or the r-range"
        )
        self.norm = float(norm)
        self.q = float(q)


class BranchSweepError(CycleToolkitError):
    """A point of an r-sweep failed; the points solved so far are kept."""

    def __init__(self, message: str, partial: Sequence, r: Optional[float] = None):
        super().__init__(message)
        self.partial = list(partial)
        self.r = r


class InputFileError(CycleToolkitError, ValueError):
    """A system catalog or symbol file is missing or malformed."""
