"""Lotka-Volterra predator-prey family with a competition-cooperation term.

    x' = x (a - b y),    y' = y (-c + d x + f(y; lambda)),    x, y > 0

The term f(y; lambda) sits in the predator equation. The positive
equilibrium is (x*, y*) = ((c - f(a/b; lambda)) / d, a/b); its stability is
decided by the sign of f'_y(y*; lambda), so the Hopf point is where that
derivative changes sign.
"""

import logging
import math
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import bisect

from .exceptions import DomainError, NotBracketedError, PreconditionError
from .schemas import ConditionReport, ConditionViolation, EquilibriumInfo

logger = logging.getLogger(__name__)

TermFn = Callable[[np.ndarray, float], np.ndarray]

HOPF_TOL = 1e-12
FD_REL_STEP = 1e-6


class TermKind(str, Enum):
    ARCTAN_LINEAR = "arctan_linear"
    QUAD_LOGISTIC = "quad_logistic"
    CUBIC_LOGISTIC = "cubic_logistic"
    CUSTOM = "custom"


class InteractionTerm:
    """The competition-cooperation function f(y; lambda) and its y-derivative.

    Custom terms pass ``value(y, lam)`` and optionally ``derivative(y, lam)``;
    without a derivative a central finite difference with step
    1e-6 * max(1, |y|) is used and reports flag it.
    """

    def __init__(
        self,
        kind: TermKind,
        value: Optional[TermFn] = None,
        derivative: Optional[TermFn] = None,
        label: Optional[str] = None,
    ):
        kind = TermKind(kind)
        if kind is TermKind.CUSTOM and value is None:
            raise PreconditionError("custom interaction term needs a value function")
        self.kind = kind
        self._value = value
        self._derivative = derivative
        self.label = label or kind.value

    @classmethod
    def arctan_linear(cls) -> "InteractionTerm":
        return cls(TermKind.ARCTAN_LINEAR)

    @classmethod
    def quad_logistic(cls) -> "InteractionTerm":
        return cls(TermKind.QUAD_LOGISTIC)

    @classmethod
    def cubic_logistic(cls) -> "InteractionTerm":
        return cls(TermKind.CUBIC_LOGISTIC)

    @classmethod
    def custom(
        cls,
        value: TermFn,
        derivative: Optional[TermFn] = None,
        label: str = "custom",
    ) -> "InteractionTerm":
        return cls(TermKind.CUSTOM, value=value, derivative=derivative, label=label)

    @classmethod
    def polynomial(
        cls, coeffs: Sequence[float], lambda_coeffs: Sequence[float]
    ) -> "InteractionTerm":
        """f(y; lambda) = P(y) - lambda Q(y), coefficients in ascending powers of y."""
        p = Polynomial(list(coeffs) or [0.0])
        q = Polynomial(list(lambda_coeffs) or [0.0])
        dp, dq = p.deriv(), q.deriv()

        def value(y, lam):
            return p(y) - lam * q(y)

        def derivative(y, lam):
            return dp(y) - lam * dq(y)

        return cls.custom(value, derivative, label="polynomial")

    @property
    def uses_finite_difference(self) -> bool:
        return self.kind is TermKind.CUSTOM and self._derivative is None

    def value(self, y, lam: float):
        if self.kind is TermKind.ARCTAN_LINEAR:
            return np.arctan(y) - lam * y
        if self.kind is TermKind.QUAD_LOGISTIC:
            return y - lam * y * y
        if self.kind is TermKind.CUBIC_LOGISTIC:
            return y * y - lam * y * y * y
        return self._value(y, lam)

    def dy(self, y, lam: float):
        if self.kind is TermKind.ARCTAN_LINEAR:
            return 1.0 / (1.0 + y * y) - lam
        if self.kind is TermKind.QUAD_LOGISTIC:
            return 1.0 - 2.0 * lam * y
        if self.kind is TermKind.CUBIC_LOGISTIC:
            return 2.0 * y - 3.0 * lam * y * y
        if self._derivative is not None:
            return self._derivative(y, lam)
        h = FD_REL_STEP * np.maximum(1.0, np.abs(y))
        return (self._value(y + h, lam) - self._value(y - h, lam)) / (2.0 * h)

    def evaluate(self, y, lam: float):
        return self.value(y, lam), self.dy(y, lam)

    def __repr__(self):
        return f"<InteractionTerm(kind='{self.kind.value}', label='{self.label}')>"


class LVSystem(BaseModel):
    """Per-capita rates a, b, c, d and the interaction term."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: float = Field(..., gt=0)
    b: float = Field(..., gt=0)
    c: float = Field(..., gt=0)
    d: float = Field(..., gt=0)
    term: InteractionTerm
    name: str = Field(default="system", min_length=1)

    @property
    def y_star(self) -> float:
        # independent of lambda
        return self.a / self.b


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError(f"lambda={lam} outside [0, 1]")


def _check_extinction(sys: LVSystem, lam: float) -> float:
    f_star = float(sys.term.value(sys.y_star, lam))
    if not sys.c > f_star:
        raise PreconditionError(
            f"extinction condition c > f(a/b; lambda) violated at lambda={lam}: "
            f"c={sys.c}, f(a/b; lambda)={f_star:.6g}"
        )
    return f_star


def eval_rhs(sys: LVSystem, x: float, y: float, lam: float) -> Tuple[float, float]:
    if x <= 0 or y <= 0:
        raise DomainError(f"system is defined on x, y > 0, got ({x}, {y})")
    _check_lambda(lam)
    return (
        x * (sys.a - sys.b * y),
        y * (-sys.c + sys.d * x + sys.term.value(y, lam)),
    )


def eval_rhs_log(sys: LVSystem, u: float, v: float, lam: float) -> Tuple[float, float]:
    """Vector field in (u, v) = (ln x, ln y): (x'/x, y'/y)."""
    _check_lambda(lam)
    ev = math.exp(v)
    return (
        sys.a - sys.b * ev,
        -sys.c + sys.d * math.exp(u) + float(sys.term.value(ev, lam)),
    )


def log_vector_field(sys: LVSystem, lam: float) -> Callable[[float, np.ndarray], np.ndarray]:
    """rhs(t, z) for the integrator; lambda and extinction are checked once here."""
    _check_lambda(lam)
    _check_extinction(sys, lam)
    a, b, c, d = sys.a, sys.b, sys.c, sys.d
    value = sys.term.value

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        ev = math.exp(z[1])
        return np.array([a - b * ev, -c + d * math.exp(z[0]) + value(ev, lam)])

    return rhs


def jacobian(sys: LVSystem, x: float, y: float, lam: float) -> np.ndarray:
    if x <= 0 or y <= 0:
        raise DomainError(f"system is defined on x, y > 0, got ({x}, {y})")
    f, df = sys.term.evaluate(y, lam)
    return np.array(
        [
            [sys.a - sys.b * y, -sys.b * x],
            [sys.d * y, -sys.c + sys.d * x + f + y * df],
        ]
    )


def _eigenpair(trace: float, det: float):
    disc = trace * trace - 4.0 * det
    if disc < 0:
        im = math.sqrt(-disc) / 2.0
        return [(trace / 2.0, im), (trace / 2.0, -im)]
    root = math.sqrt(disc)
    return [((trace + root) / 2.0, 0.0), ((trace - root) / 2.0, 0.0)]


def equilibrium(sys: LVSystem, lam: float) -> EquilibriumInfo:
    _check_lambda(lam)
    f_star = _check_extinction(sys, lam)
    y_star = sys.y_star
    x_star = (sys.c - f_star) / sys.d
    df = float(sys.term.dy(y_star, lam))
    jac = [[0.0, -sys.b * x_star], [sys.d * y_star, y_star * df]]
    trace = y_star * df
    det = sys.b * sys.d * x_star * y_star
    return EquilibriumInfo(
        lam=lam,
        x_star=x_star,
        y_star=y_star,
        jacobian=jac,
        trace=trace,
        det=det,
        eigenvalues=_eigenpair(trace, det),
        derivative=df,
        stability_sign=int(np.sign(df)),
    )


def hopf_locate(
    sys: LVSystem, lambda_lo: float = 0.0, lambda_hi: float = 1.0, tol: float = HOPF_TOL
) -> float:
    """Bisection for the zero of f'_y(a/b; lambda) on [lambda_lo, lambda_hi]."""
    y_star = sys.y_star

    def slope(lam: float) -> float:
        return float(sys.term.dy(y_star, lam))

    g_lo, g_hi = slope(lambda_lo), slope(lambda_hi)
    if g_lo == 0.0:
        return lambda_lo
    if g_hi == 0.0:
        return lambda_hi
    if g_lo * g_hi > 0:
        raise NotBracketedError(
            f"f'_y(a/b; lambda) keeps sign {np.sign(g_lo):+.0f} on "
            f"[{lambda_lo}, {lambda_hi}]"
        )
    lam_h = bisect(slope, lambda_lo, lambda_hi, xtol=tol, maxiter=400)
    logger.debug("Hopf point of %s at lambda=%.15g", sys.name, lam_h)
    return float(lam_h)


def lyapunov_rate(sys: LVSystem, lam: float, y):
    """dV/dt = b (y - y*) (f(y; lambda) - f(y*; lambda))."""
    if np.any(np.asarray(y) <= 0):
        raise DomainError("lyapunov_rate needs y > 0")
    y_star = sys.y_star
    return sys.b * (y - y_star) * (sys.term.value(y, lam) - sys.term.value(y_star, lam))


def lyapunov_function(sys: LVSystem, lam: float, x: float, y: float) -> float:
    """V = (x - x* ln x) d + (y - y* ln y) b."""
    if x <= 0 or y <= 0:
        raise DomainError(f"system is defined on x, y > 0, got ({x}, {y})")
    eq = equilibrium(sys, lam)
    return (x - eq.x_star * math.log(x)) * sys.d + (y - eq.y_star * math.log(y)) * sys.b


def default_probe_grid(sys: LVSystem, points: int = 200) -> np.ndarray:
    return sys.y_star * np.logspace(-2.0, 2.0, points)


def check_proposition_conditions(
    sys: LVSystem, y_grid: Optional[Sequence[float]] = None
) -> ConditionReport:
    """Check the sign conditions that give a branch of cycles from the equilibrium.

    (3a) f'_y(y*; 0) > 0, (3b) f'_y(y*; 1) < 0, and on the probe grid
    (4) dV/dt > 0 at lambda = 0, (5) dV/dt < 0 at lambda = 1.
    """
    y_star = sys.y_star
    grid = default_probe_grid(sys) if y_grid is None else np.asarray(y_grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError("probe grid must be positive")
    grid = grid[np.abs(grid - y_star) > 1e-12 * y_star]
    if grid.size == 0:
        raise DomainError("probe grid is empty once y* is excluded")

    d0 = float(sys.term.dy(y_star, 0.0))
    d1 = float(sys.term.dy(y_star, 1.0))
    rate0 = np.asarray(lyapunov_rate(sys, 0.0, grid), dtype=float)
    rate1 = np.asarray(lyapunov_rate(sys, 1.0, grid), dtype=float)

    cond_4 = bool(np.all(rate0 > 0))
    cond_5 = bool(np.all(rate1 < 0))

    violation = None
    if not d0 > 0:
        violation = ConditionViolation(condition="3a", y=y_star)
    elif not d1 < 0:
        violation = ConditionViolation(condition="3b", y=y_star)
    elif not cond_4:
        violation = ConditionViolation(condition="4", y=float(grid[np.argmax(rate0 <= 0)]))
    elif not cond_5:
        violation = ConditionViolation(condition="5", y=float(grid[np.argmax(rate1 >= 0)]))

    if sys.term.uses_finite_difference:
        logger.warning("%s: f'_y taken by finite differences", sys.name)

    return ConditionReport(
        system=sys.name,
        cond_3a=d0 > 0,
        cond_3b=d1 < 0,
        cond_4=cond_4,
        cond_5=cond_5,
        derivative_at_0=d0,
        derivative_at_1=d1,
        margin_4=float(rate0.min()),
        margin_5=float(-rate1.max()),
        extinction_at_0=bool(sys.c > sys.term.value(y_star, 0.0)),
        extinction_at_1=bool(sys.c > sys.term.value(y_star, 1.0)),
        grid_size=int(grid.size),
        grid_min=float(grid.min()),
        grid_max=float(grid.max()),
        first_violation=violation,
        finite_difference_derivative=sys.term.uses_finite_difference,
    )
