"""Periodic solutions of L(d/dt; lambda) x = f(x; lambda) by a contraction on Fourier triples.

A solution is sought as x(t) = r (pi^{-1/2} sin t + h(t)) in the rescaled time
t = w * tau, with h free of the first harmonic. The first harmonic of f fixes
(u, v) = (Re L(wi; lambda), Im L(wi; lambda)); inverting that planar map gives
(w, lambda), and h solves L(w d/dt; lambda) h = y on the remaining modes.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import ndimage

from .exceptions import (
    BranchSweepError,
    ConvergenceError,
    CycleToolkitError,
    DegeneracyError,
    DomainError,
    InconclusiveBoxError,
    NonContractionError,
    OutOfBallError,
    PreconditionError,
    ResonanceError,
)
from .odecore import integrate
from .schemas import (
    HBBranch,
    HBBranchPoint,
    LipschitzReport,
    SearchBox,
    TheoremReport,
    TripleRecord,
    ValidationReport,
)

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
N_HARMONICS = 32
M_GRID = 128
M_CHECK = 512
FIXED_POINT_TOL = 1e-12
NEWTON_TOL = 1e-13
RESONANCE_GUARD = 1e-12
DEGENERACY_TOL = 1e-12
BALL_RADIUS = 0.5
GRID_DENSITY = 201
MAX_EXPANSIONS = 2
BOX_GROWTH = 1.5

CoefficientFn = Callable[[float], Tuple[np.ndarray, np.ndarray]]


class SymbolPolynomial:
    """L(p; lambda) = p^l + a_{l-1}(lambda) p^{l-1} + ... + a_0(lambda).

    ``lambda_coeffs[k]`` lists the coefficients of a_k(lambda) in ascending
    powers of lambda. Programmatic symbols may instead pass an ``evaluator``
    returning the arrays (a_k(lambda), a_k'(lambda)) for k = 0..l-1.
    """

    def __init__(
        self,
        lambda_coeffs: Optional[Sequence[Sequence[float]]] = None,
        evaluator: Optional[CoefficientFn] = None,
        degree: Optional[int] = None,
        label: str = "symbol",
    ):
        if (lambda_coeffs is None) == (evaluator is None):
            raise PreconditionError("give either lambda_coeffs or an evaluator")
        if lambda_coeffs is not None:
            self._coeffs = [
                np.asarray(c, dtype=float) if len(c) else np.zeros(1)
                for c in lambda_coeffs
            ]
            self._dcoeffs = [
                npoly.polyder(c) if c.size > 1 else np.zeros(1) for c in self._coeffs
            ]
            degree = len(self._coeffs)
        elif degree is None:
            raise PreconditionError("custom symbols must state their degree")
        if degree < 2:
            raise PreconditionError(f"symbol degree must be at least 2, got {degree}")
        self.degree = int(degree)
        self._evaluator = evaluator
        self.label = label

    @classmethod
    def custom(cls, degree: int, evaluator: CoefficientFn, label: str = "custom"):
        return cls(evaluator=evaluator, degree=degree, label=label)

    def coefficients(self, lam: float) -> Tuple[np.ndarray, np.ndarray]:
        """(a_k(lambda), a_k'(lambda)) for k = 0..l-1."""
        if self._evaluator is not None:
            a, da = self._evaluator(lam)
            return np.asarray(a, dtype=float), np.asarray(da, dtype=float)
        a = np.array([npoly.polyval(lam, c) for c in self._coeffs])
        da = np.array([npoly.polyval(lam, c) for c in self._dcoeffs])
        return a, da

    def __repr__(self):
        return f"<SymbolPolynomial(degree={self.degree}, label='{self.label}')>"


def L_eval(poly: SymbolPolynomial, p, lam: float):
    """Horner evaluation of L, dL/dp and dL/dlambda at p (scalar or array)."""
    a, da = poly.coefficients(lam)
    p = np.asarray(p, dtype=complex)
    value = np.ones_like(p)
    d_p = np.zeros_like(p)
    d_lam = np.zeros_like(p)
    for k in range(poly.degree - 1, -1, -1):
        d_p = d_p * p + value
        value = value * p + a[k]
        d_lam = d_lam * p + da[k]
    if value.ndim == 0:
        return complex(value), complex(d_p), complex(d_lam)
    return value, d_p, d_lam


def J_matrix(poly: SymbolPolynomial, w: float, lam: float) -> Tuple[np.ndarray, float]:
    """Jacobian of (w, lambda) -> (Re L(wi), Im L(wi)), columns ordered (lambda, w)."""
    _, d_p, d_lam = L_eval(poly, 1j * w, lam)
    jac = np.array(
        [
            [d_lam.real, -d_p.imag],
            [d_lam.imag, d_p.real],
        ]
    )
    det = d_lam.real * d_p.real + d_p.imag * d_lam.imag
    return jac, float(det)


def _newton(
    poly: SymbolPolynomial,
    target: Tuple[float, float],
    w: float,
    lam: float,
    tol: float,
    max_iter: int,
) -> Tuple[float, float, int]:
    u, v = target

    def residual(w_, lam_):
        value = L_eval(poly, 1j * w_, lam_)[0]
        return np.array([value.real - u, value.imag - v])

    res = residual(w, lam)
    norm = float(np.hypot(*res))
    for it in range(max_iter + 1):
        scaled = tol * max(1.0, abs(w) ** poly.degree)
        if norm <= scaled:
            return w, lam, it
        if it == max_iter:
            break
        jac, det = J_matrix(poly, w, lam)
        if abs(det) < DEGENERACY_TOL:
            raise DegeneracyError(
                f"det J = {det:.3e} at (w, lambda) = ({w:.6g}, {lam:.6g})",
                last_iterate=(w, lam),
            )
        try:
            d_lam, d_w = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError(
                f"Newton step undefined at (w, lambda) = ({w:.6g}, {lam:.6g}): {exc}",
                last_iterate=(w, lam),
            ) from exc
        step = 1.0
        while True:
            w_try, lam_try = w + step * d_w, lam + step * d_lam
            res_try = residual(w_try, lam_try)
            norm_try = float(np.hypot(*res_try))
            if norm_try < norm or step < 1.0 / 64:
                break
            step *= 0.5
        logger.debug("newton: w=%.15g lambda=%.15g |F|=%.3e", w_try, lam_try, norm_try)
        if not math.isfinite(norm_try):
            raise ConvergenceError(
                f"Newton diverged from (w, lambda) = ({w:.6g}, {lam:.6g})",
                last_iterate=(w, lam),
            )
        w, lam, res, norm = w_try, lam_try, res_try, norm_try
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations, |F| = {norm:.3e}",
        last_iterate=(w, lam),
    )


def find_root(
    poly: SymbolPolynomial,
    w_seed: float,
    lambda_seed: float,
    tol: float = NEWTON_TOL,
    max_iter: int = 50,
) -> Tuple[float, float]:
    """Damped Newton for L(wi; lambda) = 0."""
    w, lam, _ = _newton(poly, (0.0, 0.0), w_seed, lambda_seed, tol, max_iter)
    return w, lam


def uv_to_wlambda(
    poly: SymbolPolynomial,
    u: float,
    v: float,
    seed: Tuple[float, float],
    tol: float = NEWTON_TOL,
    max_iter: int = 50,
) -> Tuple[float, float]:
    """Invert (w, lambda) -> (Re L(wi), Im L(wi)) near ``seed`` = (w, lambda)."""
    w, lam, _ = _newton(poly, (u, v), seed[0], seed[1], tol, max_iter)
    return w, lam


@dataclass(frozen=True)
class QSeries:
    """Real Fourier series with the first harmonic removed.

    y(t) = cos0 + sum_{n=2}^{N} (cos[n-2] cos nt + sin[n-2] sin nt)
    """

    cos0: float
    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        if len(self.cos) != len(self.sin):
            raise PreconditionError("cos and sin coefficient arrays differ in length")

    @classmethod
    def zeros(cls, n_harmonics: int) -> "QSeries":
        if n_harmonics < 2:
            raise PreconditionError("QSeries needs N >= 2")
        return cls(0.0, np.zeros(n_harmonics - 1), np.zeros(n_harmonics - 1))

    @property
    def n_harmonics(self) -> int:
        return len(self.cos) + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(2, self.n_harmonics + 1)

    def norm(self) -> float:
        return math.sqrt(
            2 * math.pi * self.cos0**2
            + math.pi * float(np.sum(self.cos**2) + np.sum(self.sin**2))
        )

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        nt = np.multiply.outer(t, self.modes)
        return self.cos0 + np.cos(nt) @ self.cos + np.sin(nt) @ self.sin

    def to_complex(self) -> Tuple[complex, np.ndarray]:
        """(y_0, [y_n for n = 2..N]) with y(t) = sum over n of y_n e^{int}."""
        return complex(self.cos0), 0.5 * (self.cos - 1j * self.sin)

    @classmethod
    def from_complex(cls, zero: complex, modes: np.ndarray) -> "QSeries":
        modes = np.asarray(modes, dtype=complex)
        return cls(float(np.real(zero)), 2.0 * modes.real, -2.0 * modes.imag)

    def scaled(self, factor: float) -> "QSeries":
        return QSeries(self.cos0 * factor, self.cos * factor, self.sin * factor)


@dataclass(frozen=True)
class TripleState:
    u: float
    v: float
    y: QSeries

    @classmethod
    def zeros(cls, n_harmonics: int = N_HARMONICS) -> "TripleState":
        return cls(0.0, 0.0, QSeries.zeros(n_harmonics))

    def as_vector(self) -> np.ndarray:
        """Coordinates whose Euclidean norm is the triple norm."""
        return np.concatenate(
            (
                [self.u, self.v, math.sqrt(2 * math.pi) * self.y.cos0],
                SQRT_PI * self.y.cos,
                SQRT_PI * self.y.sin,
            )
        )

    def norm(self) -> float:
        return math.sqrt(self.u**2 + self.v**2 + self.y.norm() ** 2)

    def distance(self, other: "TripleState") -> float:
        return float(np.linalg.norm(self.as_vector() - other.as_vector()))

    def to_record(self) -> TripleRecord:
        return TripleRecord(
            u=self.u,
            v=self.v,
            cos0=self.y.cos0,
            cos=self.y.cos.tolist(),
            sin=self.y.sin.tolist(),
        )

    @classmethod
    def from_record(cls, record: TripleRecord) -> "TripleState":
        y = QSeries(record.cos0, np.array(record.cos), np.array(record.sin))
        return cls(record.u, record.v, y)


class NonlinearityKind(str, Enum):
    ZERO = "zero"
    LINEAR = "linear"
    SATURATING_CUBIC = "saturating_cubic"
    DAMPED_SINE = "damped_sine"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Nonlinearity:
    """f(x; lambda) with declared Lipschitz constants k (in x) and l (in lambda)."""

    func: Callable[[np.ndarray, float], np.ndarray]
    k_lip: float
    l_lip: float
    kind: NonlinearityKind = NonlinearityKind.CUSTOM
    label: str = "custom"
    lambda_range: Tuple[float, float] = (-1.0, 1.0)

    def evaluate(self, x, lam: float):
        return self.func(x, lam)

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls(lambda x, lam: np.zeros_like(x, dtype=float), 0.0, 0.0, NonlinearityKind.ZERO, "zero")

    @classmethod
    def linear(cls, epsilon: float) -> "Nonlinearity":
        return cls(
            lambda x, lam: epsilon * x,
            abs(epsilon),
            0.0,
            NonlinearityKind.LINEAR,
            f"linear(eps={epsilon:g})",
        )

    @classmethod
    def saturating_cubic(cls, epsilon: float) -> "Nonlinearity":
        # sup of |d/dx x^3/(1+x^2)| is 9/8, attained at x^2 = 3
        return cls(
            lambda x, lam: epsilon * x**3 / (1.0 + x * x),
            1.125 * abs(epsilon),
            0.0,
            NonlinearityKind.SATURATING_CUBIC,
            f"saturating_cubic(eps={epsilon:g})",
        )

    @classmethod
    def damped_sine(cls, epsilon: float, lambda_bound: float = 1.0) -> "Nonlinearity":
        return cls(
            lambda x, lam: epsilon * lam * np.sin(x),
            abs(epsilon) * lambda_bound,
            abs(epsilon),
            NonlinearityKind.DAMPED_SINE,
            f"damped_sine(eps={epsilon:g})",
            (-lambda_bound, lambda_bound),
        )

    @classmethod
    def from_kind(cls, kind: str, epsilon: float = 0.0, lambda_bound: float = 1.0) -> "Nonlinearity":
        kind = NonlinearityKind(kind)
        if kind is NonlinearityKind.ZERO:
            return cls.zero()
        if kind is NonlinearityKind.LINEAR:
            return cls.linear(epsilon)
        if kind is NonlinearityKind.SATURATING_CUBIC:
            return cls.saturating_cubic(epsilon)
        if kind is NonlinearityKind.DAMPED_SINE:
            return cls.damped_sine(epsilon, lambda_bound)
        raise PreconditionError("custom nonlinearities are built programmatically")


def check_lipschitz(
    nl: Nonlinearity, probes: int = 256, seed: int = 0, x_scale: float = 10.0
) -> LipschitzReport:
    """Spot-check f(0; lambda) = 0 and the declared Lipschitz constants on random probes."""
    rng = np.random.default_rng(seed)
    lo, hi = nl.lambda_range
    x1 = rng.uniform(-x_scale, x_scale, probes)
    x2 = rng.uniform(-x_scale, x_scale, probes)
    lam1 = rng.uniform(lo, hi, probes)
    lam2 = rng.uniform(lo, hi, probes)

    at_zero = np.array([nl.evaluate(np.zeros(1), lam)[0] for lam in lam1])
    zero_ok = bool(np.all(np.abs(at_zero) <= 1e-15))

    f1 = np.array([nl.evaluate(np.array([a]), lam)[0] for a, lam in zip(x1, lam1)])
    f2 = np.array([nl.evaluate(np.array([b]), lam)[0] for b, lam in zip(x2, lam1)])
    dx = np.abs(x1 - x2)
    keep = dx > 1e-12
    k_obs = float(np.max(np.abs(f1 - f2)[keep] / dx[keep])) if keep.any() else 0.0

    g2 = np.array([nl.evaluate(np.array([a]), lam)[0] for a, lam in zip(x1, lam2)])
    denom = np.abs(x1) * np.abs(lam1 - lam2)
    keep = denom > 1e-12
    l_obs = float(np.max(np.abs(f1 - g2)[keep] / denom[keep])) if keep.any() else 0.0

    def within(observed, declared):
        return observed <= declared * (1.0 + 1e-9) + 1e-15

    return LipschitzReport(
        label=nl.label,
        probes=probes,
        zero_ok=zero_ok,
        k_declared=nl.k_lip,
        k_observed=k_obs,
        l_declared=nl.l_lip,
        l_observed=l_obs,
        k_ok=within(k_obs, nl.k_lip),
        l_ok=within(l_obs, nl.l_lip),
    )


def _symbol_on_modes(poly, w, lam, n_harmonics):
    """L(inw; lambda) for n = 0 and n = 2..N."""
    zero = L_eval(poly, 0j, lam)[0]
    modes = np.arange(2, n_harmonics + 1)
    values = L_eval(poly, 1j * w * modes, lam)[0]
    return zero, values


def solve_Q(
    poly: SymbolPolynomial,
    w: float,
    lam: float,
    y: QSeries,
    guard: float = RESONANCE_GUARD,
) -> QSeries:
    """Solve L(w d/dt; lambda) h = y mode by mode on the Q subspace."""
    l_zero, l_modes = _symbol_on_modes(poly, w, lam, y.n_harmonics)
    if abs(l_zero) < guard:
        raise ResonanceError(0, abs(l_zero))
    small = np.abs(l_modes) < guard
    if small.any():
        i = int(np.argmax(small))
        raise ResonanceError(i + 2, abs(l_modes[i]))
    y_zero, y_modes = y.to_complex()
    return QSeries.from_complex(y_zero / l_zero, y_modes / l_modes)


def apply_symbol(poly: SymbolPolynomial, w: float, lam: float, h: QSeries) -> QSeries:
    """L(w d/dt; lambda) h on the Q subspace."""
    l_zero, l_modes = _symbol_on_modes(poly, w, lam, h.n_harmonics)
    h_zero, h_modes = h.to_complex()
    return QSeries.from_complex(h_zero * l_zero, h_modes * l_modes)


def _check_grid(n_harmonics: int, M: int) -> None:
    if M < 2 * n_harmonics + 2:
        raise PreconditionError(f"grid of {M} points cannot resolve N={n_harmonics}; need M >= 2N + 2")


def _x_spectrum(r: float, h: QSeries, M: int) -> np.ndarray:
    """rfft-normalised spectrum (length M//2 + 1) of x = r (pi^{-1/2} sin t + h)."""
    _check_grid(h.n_harmonics, M)
    spectrum = np.zeros(M // 2 + 1, dtype=complex)
    h_zero, h_modes = h.to_complex()
    spectrum[0] = r * h_zero
    spectrum[1] = -0.5j * r / SQRT_PI
    spectrum[2 : h.n_harmonics + 1] = r * h_modes
    return spectrum


def synth_x(r: float, h: QSeries, M: int) -> Tuple[np.ndarray, float]:
    """x_j = r (pi^{-1/2} sin t_j + h(t_j)) on t_j = 2 pi j / M, and max_j |x_j|."""
    x = np.fft.irfft(M * _x_spectrum(r, h, M), n=M)
    return x, float(np.max(np.abs(x)))


def collocation_grid(M: int) -> np.ndarray:
    return 2 * math.pi * np.arange(M) / M


def _apply(poly, nl, r, state: TripleState, M, seed, q):
    norm = state.norm()
    if norm > q:
        raise OutOfBallError(norm, q)
    w, lam = uv_to_wlambda(poly, state.u, state.v, seed)
    if w <= 0:
        raise DomainError(f"frequency w = {w:.6g} is not positive; seed the root with w > 0")
    h = solve_Q(poly, w, lam, state.y)
    x, sup = synth_x(r, h, M)
    fx = np.asarray(nl.evaluate(x, lam), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise DomainError(f"nonlinearity is not finite on x_r at r={r:.6g}")
    spec = np.fft.rfft(fx) / M
    n = state.y.n_harmonics
    u_new = SQRT_PI * (-2.0 * spec[1].imag) / r
    v_new = SQRT_PI * (2.0 * spec[1].real) / r
    y_new = QSeries.from_complex(spec[0], spec[2 : n + 1]).scaled(1.0 / r)
    return TripleState(float(u_new), float(v_new), y_new), w, lam, sup


def apply_Ar(
    poly: SymbolPolynomial,
    nl: Nonlinearity,
    r: float,
    state: TripleState,
    M: int,
    seed: Tuple[float, float],
    q: float = BALL_RADIUS,
) -> Tuple[TripleState, float, float]:
    """One application of A_r; returns the image and the (w, lambda) it used."""
    if r <= 0:
        raise PreconditionError(f"r must be positive, got {r}")
    image, w, lam, _ = _apply(poly, nl, r, state, M, seed, q)
    return image, w, lam


def _contraction_estimate(increments: Sequence[float]) -> float:
    ratios = [
        increments[i] / increments[i - 1]
        for i in range(max(1, len(increments) - 3), len(increments))
        if increments[i - 1] > 1e-14
    ]
    return max(ratios) if ratios else 0.0


def fixed_point_Ar(
    poly: SymbolPolynomial,
    nl: Nonlinearity,
    r: float,
    init: Optional[TripleState] = None,
    M: int = M_GRID,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = 200,
    seed: Tuple[float, float] = (1.0, 0.0),
    q: float = BALL_RADIUS,
    n_harmonics: int = N_HARMONICS,
) -> HBBranchPoint:
    """Picard iteration z <- A_r(z) until ||A_r(z) - z|| <= tol.

    The returned point is the last z fed to A_r, so (w, lambda) and x_r
    are exactly the ones that z encodes and the residual is ||A_r(z) - z||.
    """
    if r <= 0:
        raise PreconditionError(f"r must be positive, got {r}")
    z = TripleState.zeros(n_harmonics) if init is None else init
    increments: List[float] = []
    for k in range(1, max_iter + 1):
        image, w, lam, sup = _apply(poly, nl, r, z, M, seed, q)
        increments.append(z.distance(image))
        logger.debug("picard r=%.6g k=%d increment=%.3e", r, k, increments[-1])
        if increments[-1] <= tol:
            estimate = _contraction_estimate(increments)
            if estimate >= 1.0:
                logger.warning("r=%.6g: contraction estimate %.3f >= 1", r, estimate)
            return HBBranchPoint(
                r=r,
                lam=lam,
                w=w,
                triple=z.to_record(),
                sup_norm_x=sup,
                residual=increments[-1],
                contraction_estimate=estimate,
                contracting=estimate < 1.0,
                iterations=k,
            )
        z, seed = image, (w, lam)

    estimate = _contraction_estimate(increments)
    raise NonContractionError(
        f"Picard iteration at r={r:.6g} did not reach {tol:.1e} in {max_iter} "
        f"iterations (last increment {increments[-1]:.3e}, estimate {estimate:.3f})",
        estimate=estimate,
        last_iterate=z,
    )


def default_r_grid(points: int = 61, r_min: float = 1e-3, r_max: float = 1e3) -> np.ndarray:
    return np.geomspace(r_min, r_max, points)


def _max_quotient(values: np.ndarray, r: np.ndarray) -> float:
    if len(r) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values)) / np.diff(r)))


def sweep_branch(
    poly: SymbolPolynomial,
    nl: Nonlinearity,
    r_grid: Optional[Sequence[float]] = None,
    M: int = M_GRID,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = 200,
    root: Tuple[float, float] = (1.0, 0.0),
    q: float = BALL_RADIUS,
    n_harmonics: int = N_HARMONICS,
) -> HBBranch:
    """Warm-started fixed points along an increasing r-grid."""
    grid = default_r_grid() if r_grid is None else np.asarray(r_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise PreconditionError("r_grid must be positive and strictly increasing")

    points: List[HBBranchPoint] = []
    samples: List[np.ndarray] = []
    z = TripleState.zeros(n_harmonics)
    seed = root
    decade = None
    for r in grid:
        try:
            point = fixed_point_Ar(poly, nl, float(r), z, M, tol, max_iter, seed, q, n_harmonics)
        except CycleToolkitError as exc:
            raise BranchSweepError(
                f"sweep failed at r={r:.6g}: {exc}", partial=points, r=float(r)
            ) from exc
        points.append(point)
        z = TripleState.from_record(point.triple)
        seed = (point.w, point.lam)
        samples.append(synth_x(point.r, solve_Q(poly, point.w, point.lam, z.y), M)[0])
        current = math.floor(math.log10(r))
        if current != decade:
            decade = current
            logger.info(
                "r=%.3g: lambda=%.12g w=%.12g |x|=%.4g (%d iterations)",
                r,
                point.lam,
                point.w,
                point.sup_norm_x,
                point.iterations,
            )

    r_values = np.array([p.r for p in points])
    x_steps = [np.max(np.abs(b - a)) for a, b in zip(samples, samples[1:])]
    x_quotient = float(np.max(np.array(x_steps) / np.diff(r_values))) if x_steps else 0.0
    return HBBranch(
        root_w=root[0],
        root_lambda=root[1],
        points=points,
        lambda_lipschitz=_max_quotient(np.array([p.lam for p in points]), r_values),
        w_lipschitz=_max_quotient(np.array([p.w for p in points]), r_values),
        x_lipschitz=x_quotient,
    )


def validate_solution(
    poly: SymbolPolynomial,
    nl: Nonlinearity,
    point: HBBranchPoint,
    M_check: int = M_CHECK,
    rtol: float = 1e-11,
) -> ValidationReport:
    """Spectral residual of L(w d/dt) x - f(x) and a one-period time-domain return check."""
    z = TripleState.from_record(point.triple)
    n = z.y.n_harmonics
    h = solve_Q(poly, point.w, point.lam, z.y)
    spectrum = _x_spectrum(point.r, h, M_check)

    modes = np.arange(spectrum.size)
    symbol = L_eval(poly, 1j * point.w * modes, point.lam)[0]
    lx = np.fft.irfft(M_check * symbol * spectrum, n=M_check)
    x = np.fft.irfft(M_check * spectrum, n=M_check)
    fx = np.asarray(nl.evaluate(x, point.lam), dtype=float)
    spectral_residual = float(np.max(np.abs(lx - fx)))

    # derivatives in real time tau = t / w at tau = 0
    ell = poly.degree
    a, _ = poly.coefficients(point.lam)
    weights = np.where(modes == 0, 1.0, 2.0)
    state0 = np.array(
        [
            point.w**k * float(np.sum(weights * ((1j * modes) ** k * spectrum)).real)
            for k in range(ell)
        ]
    )

    def rhs(t, y):
        top = float(nl.evaluate(np.array([y[0]]), point.lam)[0]) - float(np.dot(a, y))
        return np.append(y[1:], top)

    period = 2 * math.pi / point.w
    scale = max(float(np.linalg.norm(state0)), 1e-300)
    traj = integrate(rhs, state0, period, rtol=rtol, atol=rtol * 1e-2 * scale)
    mismatch = float(np.linalg.norm(traj.final_state - state0)) / scale

    return ValidationReport(
        r=point.r,
        lam=point.lam,
        w=point.w,
        n_harmonics=n,
        m_check=M_check,
        spectral_residual=spectral_residual,
        time_domain_mismatch=mismatch,
        period=period,
    )


def _expand(box: SearchBox) -> SearchBox:
    wc, lc = 0.5 * (box.w_lo + box.w_hi), 0.5 * (box.lam_lo + box.lam_hi)
    half_w = 0.5 * BOX_GROWTH * (box.w_hi - box.w_lo)
    half_l = 0.5 * BOX_GROWTH * (box.lam_hi - box.lam_lo)
    w_lo = wc - half_w
    if box.w_lo > 0:
        w_lo = max(w_lo, 0.5 * box.w_lo)
    return SearchBox(w_lo=w_lo, w_hi=wc + half_w, lam_lo=lc - half_l, lam_hi=lc + half_l)


def _touches_boundary(mask: np.ndarray) -> bool:
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


def _count_holes(mask: np.ndarray) -> int:
    outside, count = ndimage.label(~mask)
    if count == 0:
        return 0
    border = set(np.unique(np.concatenate((outside[0], outside[-1], outside[:, 0], outside[:, -1]))))
    return sum(1 for label in range(1, count + 1) if label not in border)


def _grid_roots(poly, w_axis, lam_axis, values) -> List[Tuple[float, float]]:
    """Cells where Re L and Im L both change sign, refined with Newton and deduplicated."""
    re, im = values.real, values.imag

    def spans(a):
        corners = np.stack((a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]))
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    roots: List[Tuple[float, float]] = []
    for i, j in zip(*np.nonzero(spans(re) & spans(im))):
        w_seed = 0.5 * (w_axis[j] + w_axis[j + 1])
        lam_seed = 0.5 * (lam_axis[i] + lam_axis[i + 1])
        try:
            w, lam = find_root(poly, w_seed, lam_seed)
        except ConvergenceError:
            continue
        if not (w_axis[0] <= w <= w_axis[-1] and lam_axis[0] <= lam <= lam_axis[-1]):
            continue
        if all(abs(w - w0) > 1e-8 or abs(lam - l0) > 1e-8 for w0, l0 in roots):
            roots.append((w, lam))
    return roots


def check_theorem_conditions(
    poly: SymbolPolynomial,
    q: float,
    box: SearchBox,
    n_harmonics: int = 16,
    grid_density: int = GRID_DENSITY,
    max_expansions: int = MAX_EXPANSIONS,
) -> TheoremReport:
    """Grid diagnostics for the domain D_q = {|L(wi; lambda)| <= q} inside ``box``.

    Checks that D_q is one hole-free grid component clear of the box edge,
    holds exactly one root, keeps det J away from zero, and has
    L(inw; lambda) != 0 for n = 0, 2..N.
    """
    if q <= 0:
        raise PreconditionError("q must be positive")
    if grid_density < 5:
        raise PreconditionError("grid_density must be at least 5")

    expansions = 0
    while True:
        w_axis = np.linspace(box.w_lo, box.w_hi, grid_density)
        lam_axis = np.linspace(box.lam_lo, box.lam_hi, grid_density)
        rows = [L_eval(poly, 1j * w_axis, lam) for lam in lam_axis]
        values = np.array([row[0] for row in rows])
        mask = np.abs(values) <= q
        if not mask.any():
            raise InconclusiveBoxError(
                f"no grid point of the box has |L(wi; lambda)| <= {q:g}; move the box or raise q"
            )
        if not _touches_boundary(mask):
            break
        if expansions >= max_expansions:
            raise InconclusiveBoxError(
                f"sublevel set |L| <= {q:g} still touches the box after {expansions} "
                "enlargements; enlarge the box or shrink q"
            )
        box = _expand(box)
        expansions += 1
        logger.info("sublevel set touches the box; enlarged to %s", box)

    _, components = ndimage.label(mask)
    holes = _count_holes(mask)
    edge = np.concatenate((values[0], values[-1], values[:, 0], values[:, -1]))
    boundary_margin = float(np.min(np.abs(edge)) - q)

    roots = _grid_roots(poly, w_axis, lam_axis, values)

    d_p = np.array([row[1] for row in rows])
    d_lam = np.array([row[2] for row in rows])
    det = d_lam.real * d_p.real + d_p.imag * d_lam.imag
    det_margin = float(np.min(np.abs(det[mask])))

    worst_n, worst = 0, math.inf
    for n in [0] + list(range(2, n_harmonics + 1)):
        moduli = np.abs(np.array([L_eval(poly, 1j * n * w_axis, lam)[0] for lam in lam_axis]))
        low = float(moduli[mask].min())
        if low < worst:
            worst_n, worst = n, low

    return TheoremReport(
        q=q,
        n_harmonics=n_harmonics,
        grid_density=grid_density,
        effective_box=box,
        expansions=expansions,
        sublevel_points=int(mask.sum()),
        components=int(components),
        holes=holes,
        boundary_margin=boundary_margin,
        root_count=len(roots),
        root_w=roots[0][0] if len(roots) == 1 else None,
        root_lambda=roots[0][1] if len(roots) == 1 else None,
        det_margin=det_margin,
        worst_resonant_n=worst_n,
        nonresonance_margin=worst,
        domain_ok=components == 1 and holes == 0,
        root_ok=len(roots) == 1,
        jacobian_ok=det_margin > DEGENERACY_TOL,
        nonresonance_ok=worst > RESONANCE_GUARD,
    )
