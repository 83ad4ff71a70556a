import math

import numpy as np
import pytest
from scipy.integrate import quad as quadrature

from blowup.exceptions import (
    BranchSweepError,
    DegeneracyError,
    DomainError,
    InconclusiveBoxError,
    NonContractionError,
    OutOfBallError,
    PreconditionError,
    ResonanceError,
)
from blowup.hbcore import (
    J_matrix,
    L_eval,
    Nonlinearity,
    QSeries,
    SymbolPolynomial,
    TripleState,
    apply_Ar,
    apply_symbol,
    check_lipschitz,
    check_theorem_conditions,
    collocation_grid,
    default_r_grid,
    find_root,
    fixed_point_Ar,
    solve_Q,
    sweep_branch,
    synth_x,
    uv_to_wlambda,
    validate_solution,
)
from blowup.schemas import SearchBox


@pytest.fixture
def quad_symbol():
    # p^2 + lambda p + 1
    return SymbolPolynomial([[1.0], [0.0, 1.0]], label="quad")


@pytest.fixture
def cubic_symbol():
    # p^3 + p^2 + p + 1 + lambda
    return SymbolPolynomial([[1.0, 1.0], [1.0], [1.0]], label="cubic")


def random_series(n_harmonics, seed=3):
    rng = np.random.default_rng(seed)
    return QSeries(
        float(rng.normal()), rng.normal(size=n_harmonics - 1), rng.normal(size=n_harmonics - 1)
    )


class TestSymbol:
    def test_horner_matches_direct_evaluation(self, cubic_symbol):
        p, lam = 0.3 + 1.7j, 0.25
        value, d_p, d_lam = L_eval(cubic_symbol, p, lam)
        assert value == pytest.approx(p**3 + p**2 + p + 1 + lam)
        assert d_p == pytest.approx(3 * p**2 + 2 * p + 1)
        assert d_lam == pytest.approx(1.0)

    def test_custom_symbol_needs_degree(self):
        with pytest.raises(PreconditionError):
            SymbolPolynomial(evaluator=lambda lam: ([1.0, lam], [0.0, 1.0]))

    def test_degree_one_rejected(self):
        with pytest.raises(PreconditionError):
            SymbolPolynomial([[1.0]])

    def test_quad_root_from_offset_seed(self, quad_symbol):
        w, lam = find_root(quad_symbol, 1.2, 0.3)
        assert w == pytest.approx(1.0, abs=1e-12)
        assert lam == pytest.approx(0.0, abs=1e-12)

    def test_quad_jacobian_at_root(self, quad_symbol):
        jac, det = J_matrix(quad_symbol, 1.0, 0.0)
        np.testing.assert_allclose(jac, [[0.0, -2.0], [1.0, 0.0]], atol=1e-15)
        assert det == pytest.approx(2.0)

    def test_cubic_root_and_jacobian(self, cubic_symbol):
        w, lam = find_root(cubic_symbol, 1.1, 0.1)
        assert (w, lam) == pytest.approx((1.0, 0.0), abs=1e-12)
        jac, det = J_matrix(cubic_symbol, w, lam)
        np.testing.assert_allclose(jac, [[1.0, -2.0], [0.0, -2.0]], atol=1e-12)
        assert det == pytest.approx(-2.0)

    def test_singular_jacobian(self, quad_symbol):
        with pytest.raises(DegeneracyError):
            find_root(quad_symbol, 0.0, 0.3)

    def test_uv_inversion(self, quad_symbol):
        # Re L = 1 - w^2, Im L = lambda w
        w, lam = uv_to_wlambda(quad_symbol, 0.1, 0.05, seed=(1.0, 0.0))
        assert w == pytest.approx(math.sqrt(0.9), abs=1e-12)
        value = L_eval(quad_symbol, 1j * w, lam)[0]
        assert abs(value - (0.1 + 0.05j)) <= 1e-13

    def test_negative_frequency_is_rejected(self, quad_symbol):
        with pytest.raises(DomainError):
            apply_Ar(quad_symbol, Nonlinearity.zero(), 1.0, TripleState.zeros(8), 32, (-1.0, 0.0))


class TestFourier:
    def test_parseval_on_the_collocation_grid(self):
        y = random_series(8)
        M = 18
        samples = y.evaluate(collocation_grid(M))
        assert np.sum(samples**2) * 2 * math.pi / M == pytest.approx(y.norm() ** 2, rel=1e-13)

    def test_triple_norm_matches_vector(self):
        state = TripleState(0.2, -0.1, random_series(6))
        assert np.linalg.norm(state.as_vector()) == pytest.approx(state.norm(), rel=1e-14)

    def test_complex_form_reproduces_samples(self):
        y = random_series(5)
        t = np.linspace(0.0, 2 * math.pi, 13)
        zero, modes = y.to_complex()
        n = y.modes
        direct = zero.real + 2 * np.real(np.exp(1j * np.multiply.outer(t, n)) @ modes)
        np.testing.assert_allclose(direct, y.evaluate(t), atol=1e-13)

    def test_solve_inverts_symbol(self, quad_symbol):
        y = random_series(10)
        h = solve_Q(quad_symbol, 1.0, 0.1, y)
        back = apply_symbol(quad_symbol, 1.0, 0.1, h)
        assert back.cos0 == pytest.approx(y.cos0)
        np.testing.assert_allclose(back.cos, y.cos, atol=1e-12)
        np.testing.assert_allclose(back.sin, y.sin, atol=1e-12)

    def test_resonant_mode_zero(self):
        # L = p^3 + (1 + lambda) p^2 + p vanishes at p = 0
        resonant = SymbolPolynomial([[0.0], [1.0], [1.0, 1.0]])
        with pytest.raises(ResonanceError) as info:
            solve_Q(resonant, 1.0, -1.0, QSeries.zeros(4))
        assert info.value.n == 0

    def test_synth_pure_sine(self):
        x, sup = synth_x(2.0, QSeries.zeros(8), 64)
        np.testing.assert_allclose(x, 2.0 / math.sqrt(math.pi) * np.sin(collocation_grid(64)), atol=1e-14)
        assert sup == pytest.approx(2.0 / math.sqrt(math.pi))

    def test_grid_too_coarse(self):
        with pytest.raises(PreconditionError):
            synth_x(1.0, QSeries.zeros(8), 16)


class TestNonlinearity:
    @pytest.mark.parametrize(
        "nl",
        [
            Nonlinearity.linear(0.3),
            Nonlinearity.saturating_cubic(0.05),
            Nonlinearity.damped_sine(0.2),
        ],
    )
    def test_declared_constants_hold(self, nl):
        report = check_lipschitz(nl)
        assert report.zero_ok and report.k_ok and report.l_ok

    def test_understated_constant_is_caught(self):
        liar = Nonlinearity(lambda x, lam: 2.0 * x, k_lip=1.0, l_lip=0.0)
        assert not check_lipschitz(liar).k_ok


class TestFixedPoint:
    def test_first_iterate_matches_quadrature(self, quad_symbol):
        eps, r = 0.05, 1.3
        nl = Nonlinearity.saturating_cubic(eps)
        image, w, lam = apply_Ar(quad_symbol, nl, r, TripleState.zeros(16), 128, (1.0, 0.0))
        assert (w, lam) == pytest.approx((1.0, 0.0), abs=1e-12)

        def f_of_sine(t):
            x = r * math.sin(t) / math.sqrt(math.pi)
            return eps * x**3 / (1 + x * x)

        u_ref, _ = quadrature(
            lambda t: f_of_sine(t) * math.sin(t) / math.sqrt(math.pi), 0, 2 * math.pi,
            epsabs=1e-14, limit=200,
        )
        v_ref, _ = quadrature(
            lambda t: f_of_sine(t) * math.cos(t) / math.sqrt(math.pi), 0, 2 * math.pi,
            epsabs=1e-14, limit=200,
        )
        assert image.u == pytest.approx(u_ref / r, abs=1e-11)
        assert image.v == pytest.approx(v_ref / r, abs=1e-11)

    def test_zero_nonlinearity_keeps_the_linear_cycle(self, quad_symbol):
        point = fixed_point_Ar(quad_symbol, Nonlinearity.zero(), 2.0, n_harmonics=8, M=32)
        assert point.lam == pytest.approx(0.0, abs=1e-13)
        assert point.w == pytest.approx(1.0, abs=1e-13)
        assert point.sup_norm_x == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-13)
        assert point.iterations == 1

    def test_linear_nonlinearity_shifts_frequency(self, quad_symbol):
        point = fixed_point_Ar(quad_symbol, Nonlinearity.linear(0.1), 5.0, n_harmonics=8, M=32)
        assert point.w == pytest.approx(math.sqrt(0.9), abs=1e-12)
        assert point.lam == pytest.approx(0.0, abs=1e-12)
        assert point.residual <= 1e-12

    def test_out_of_ball(self, quad_symbol):
        start = TripleState(1.0, 0.0, QSeries.zeros(8))
        with pytest.raises(OutOfBallError):
            apply_Ar(quad_symbol, Nonlinearity.zero(), 1.0, start, 32, (1.0, 0.0), q=0.5)

    def test_iteration_budget(self, quad_symbol):
        with pytest.raises(NonContractionError) as info:
            fixed_point_Ar(quad_symbol, Nonlinearity.linear(0.1), 1.0, max_iter=1, n_harmonics=8, M=32)
        assert info.value.last_iterate is not None

    def test_validated_solution(self, quad_symbol):
        nl = Nonlinearity.saturating_cubic(0.05)
        point = fixed_point_Ar(quad_symbol, nl, 1.0)
        assert point.contracting
        report = validate_solution(quad_symbol, nl, point)
        assert report.spectral_residual <= 1e-9
        assert report.time_domain_mismatch <= 1e-6
        assert report.period == pytest.approx(2 * math.pi / point.w)


class TestSweep:
    def test_trivial_branch(self, quad_symbol):
        grid = np.geomspace(1e-2, 1e2, 5)
        branch = sweep_branch(quad_symbol, Nonlinearity.zero(), grid, M=32, n_harmonics=8)
        assert [p.r for p in branch.points] == pytest.approx(list(grid))
        assert branch.lambda_lipschitz == pytest.approx(0.0, abs=1e-12)
        for p in branch.points:
            assert p.sup_norm_x == pytest.approx(p.r / math.sqrt(math.pi), rel=1e-12)

    def test_lambda_moves_along_a_lipschitz_branch(self, cubic_symbol):
        nl = Nonlinearity.saturating_cubic(0.05)
        branch = sweep_branch(cubic_symbol, nl, np.geomspace(0.1, 10.0, 9), M=64, n_harmonics=16)
        lams = np.array([p.lam for p in branch.points])
        assert np.max(np.abs(lams)) > 1e-4
        assert branch.lambda_lipschitz < 1.0
        assert all(p.contracting for p in branch.points)
        sups = [p.sup_norm_x for p in branch.points]
        assert sups[-1] / sups[0] > 50.0

    def test_failure_keeps_partial_results(self, quad_symbol):
        with pytest.raises(BranchSweepError) as info:
            sweep_branch(quad_symbol, Nonlinearity.linear(0.6), [0.5, 1.0], M=32, n_harmonics=8)
        assert info.value.partial == []
        assert info.value.r == 0.5

    def test_rejects_unordered_grid(self, quad_symbol):
        with pytest.raises(PreconditionError):
            sweep_branch(quad_symbol, Nonlinearity.zero(), [1.0, 0.5])


class TestTheoremConditions:
    def test_quadratic_symbol_passes(self, quad_symbol):
        box = SearchBox(w_lo=0.5, w_hi=1.5, lam_lo=-0.5, lam_hi=0.5)
        report = check_theorem_conditions(quad_symbol, 0.5, box, n_harmonics=16)
        assert report.all_passed
        assert report.root_count == 1
        assert (report.root_w, report.root_lambda) == pytest.approx((1.0, 0.0), abs=1e-10)
        assert report.det_margin > 0.5
        assert report.worst_resonant_n == 0
        assert report.nonresonance_margin == pytest.approx(1.0, abs=1e-12)
        assert report.boundary_margin > 0

    def test_resonant_symbol_is_flagged(self):
        resonant = SymbolPolynomial([[0.0], [1.0], [1.0, 1.0]])
        box = SearchBox(w_lo=0.5, w_hi=1.5, lam_lo=-1.5, lam_hi=-0.5)
        report = check_theorem_conditions(resonant, 0.1, box, n_harmonics=4)
        assert report.root_ok
        assert report.jacobian_ok
        assert not report.nonresonance_ok
        assert report.worst_resonant_n == 0
        assert not report.all_passed

    def test_huge_q_swallows_the_box(self, quad_symbol):
        box = SearchBox(w_lo=0.5, w_hi=1.5, lam_lo=-0.5, lam_hi=0.5)
        with pytest.raises(InconclusiveBoxError):
            check_theorem_conditions(quad_symbol, 1e6, box, n_harmonics=16)


class TestContraction:
    def test_estimate_grows_with_epsilon(self, quad_symbol):
        estimates = [
            fixed_point_Ar(quad_symbol, Nonlinearity.saturating_cubic(eps), 1.0).contraction_estimate
            for eps in (0.01, 0.05, 0.1)
        ]
        assert estimates == sorted(estimates)
        assert estimates[-1] < 1.0

    def test_two_harmonics_leave_a_larger_residual(self, quad_symbol):
        nl = Nonlinearity.saturating_cubic(0.05)
        fine = fixed_point_Ar(quad_symbol, nl, 1.0)
        coarse = fixed_point_Ar(quad_symbol, nl, 1.0, M=8, n_harmonics=2)
        fine_residual = validate_solution(quad_symbol, nl, fine).spectral_residual
        coarse_residual = validate_solution(quad_symbol, nl, coarse).spectral_residual
        assert fine_residual <= 1e-9
        assert coarse_residual > 1e-6
        assert coarse_residual > 1e3 * fine_residual


# sup |x_r| / (r / sqrt(pi)) saturates just below 1 at the large-r end,
# so six decades are reached only to within this slack
DECADE_SLACK = 1e-6


@pytest.mark.slow
class TestBranchFromZeroToInfinity:
    @pytest.fixture(scope="class")
    def symbol(self):
        return SymbolPolynomial([[1.0], [0.0, 1.0]], label="quad")

    @pytest.fixture(scope="class")
    def nonlinearity(self):
        return Nonlinearity.saturating_cubic(0.05)

    @pytest.fixture(scope="class")
    def branch(self, symbol, nonlinearity):
        return sweep_branch(symbol, nonlinearity, default_r_grid())

    def test_every_point_converges(self, branch):
        assert len(branch.points) == 61
        assert branch.points[0].r == pytest.approx(1e-3)
        assert branch.points[-1].r == pytest.approx(1e3)
        assert all(p.contracting for p in branch.points)

    def test_sup_norm_increases_over_six_decades(self, branch):
        sups = np.array([p.sup_norm_x for p in branch.points])
        assert np.all(np.diff(sups) > 0)
        assert math.log10(sups[-1] / sups[0]) >= 6.0 - DECADE_SLACK

    def test_sup_norm_tracks_the_sine_at_both_ends(self, branch):
        for p in (branch.points[0], branch.points[-1]):
            ratio = p.sup_norm_x / (p.r / math.sqrt(math.pi))
            assert 0.5 <= ratio <= 1.5

    def test_small_r_returns_to_the_root(self, branch):
        first = branch.points[0]
        assert abs(first.lam - 0.0) <= 1e-2
        assert abs(first.w - 1.0) <= 1e-2

    def test_lambda_quotient_is_stable_under_refinement(self, branch, symbol, nonlinearity):
        refined = sweep_branch(symbol, nonlinearity, default_r_grid(121))
        coarse, fine = branch.lambda_lipschitz, refined.lambda_lipschitz
        assert coarse > 0
        assert 0.5 < fine / coarse < 2.0
