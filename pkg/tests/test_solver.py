import numpy as np
import pytest

from sigfit import models, solver
from sigfit.errors import (
    InvalidParamsError,
    LengthMismatchError,
    NonFiniteValueError,
    SingularNormalMatrixError,
    TooFewPointsError,
)
from tests.conftest import make_series


class TestChiSquare:
    def test_perfect_fit_is_zero(self):
        x = np.arange(10.0)
        params = models.Polynomial((2.0, 1.0))
        series = make_series(x, models.evaluate(params, x))
        assert solver.chi_square(series, params) == 0.0

    def test_hand_sum(self):
        series = make_series([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        assert solver.chi_square(series, models.Polynomial((1.0,))) == pytest.approx(5.0)

    def test_sigma_weights_divide(self):
        series = make_series([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        weighted = solver.chi_square(series, models.Polynomial((1.0,)), weights=np.full(3, 2.0))
        assert weighted == pytest.approx(5.0 / 4.0)

    def test_length_mismatch(self):
        series = make_series([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(LengthMismatchError):
            solver.chi_square(series, models.Polynomial((1.0,)), weights=np.ones(3))


class TestChiSquareGradient:
    def test_zero_at_exact_interpolant(self):
        x = np.arange(12.0)
        params = models.Polynomial((0.5, -1.0, 2.0))
        series = make_series(x, models.evaluate(params, x))
        np.testing.assert_allclose(solver.chi_square_gradient(series, params), 0.0, atol=1e-9)

    def test_linear_model_closed_form(self):
        # data y = 2x, model a*x + b: gradient at (2, 0) vanishes; away from
        # the optimum it is -2 * sum(residual * [x, 1])
        x = np.arange(1.0, 6.0)
        series = make_series(x, 2.0 * x)
        at_truth = solver.chi_square_gradient(series, models.Polynomial((2.0, 0.0)))
        np.testing.assert_allclose(at_truth, 0.0, atol=1e-10)
        off = solver.chi_square_gradient(series, models.Polynomial((0.5, 0.0)))
        np.testing.assert_allclose(off, [-2.0 * np.sum(1.5 * x * x), -2.0 * np.sum(1.5 * x)])

    def test_matches_finite_differences(self):
        # central differences of chi_square itself as the oracle
        rng = np.random.default_rng(3)
        x = np.linspace(0.0, 10.0, 40)
        series = make_series(x, rng.normal(2.0, 1.0, 40))
        for _ in range(20):
            params = models.SumOfSines(
                tuple((rng.uniform(0.5, 2), rng.uniform(0.2, 1), rng.uniform(-2, 2))
                      for _ in range(2))
            )
            grad = solver.chi_square_gradient(series, params)
            vec = params.param_vector()
            for i in range(len(vec)):
                h = 1e-6 * max(abs(vec[i]), 1.0)
                up, down = vec.copy(), vec.copy()
                up[i] += h
                down[i] -= h
                fd = (
                    solver.chi_square(series, params.with_vector(up))
                    - solver.chi_square(series, params.with_vector(down))
                ) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestLmStep:
    def test_zero_residual_gives_zero_step(self):
        jac = np.random.default_rng(0).normal(size=(10, 3))
        np.testing.assert_array_equal(solver.lm_step(jac, np.zeros(10), 0.5), np.zeros(3))

    def test_scalar_case(self):
        d = solver.lm_step(np.array([[1.0]]), np.array([3.0]), 0.25)
        assert d[0] == pytest.approx(-3.0 / 1.25)

    def test_damped_solve_residual(self):
        # residual check on the linear solve
        rng = np.random.default_rng(8)
        for mu in (0.0, 1e-3, 10.0):
            jac = rng.normal(size=(30, 6))
            f = rng.normal(size=30)
            d = solver.lm_step(jac, f, mu)
            lhs = (jac.T @ jac + mu * np.eye(6)) @ d + jac.T @ f
            assert np.linalg.norm(lhs) <= 1e-10 * np.linalg.norm(jac.T @ f)

    def test_rank_deficiency_at_zero_mu(self):
        col = np.arange(10.0)
        jac = np.column_stack([col, 2.0 * col])
        with pytest.raises(SingularNormalMatrixError):
            solver.lm_step(jac, np.ones(10), 0.0)
        d = solver.lm_step(jac, np.ones(10), 1e-6)  # damping restores solvability
        assert np.all(np.isfinite(d))

    def test_mu_zero_is_gauss_newton_bitwise(self):
        rng = np.random.default_rng(2)
        jac = rng.normal(size=(25, 4))
        f = rng.normal(size=25)
        via_lm = solver.lm_step(jac, f, 0.0)
        via_gn_path = solver._solve_normal(jac.T @ jac, -(jac.T @ f), True)
        np.testing.assert_array_equal(via_lm, via_gn_path)

    def test_negative_mu_rejected(self):
        with pytest.raises(InvalidParamsError):
            solver.lm_step(np.ones((3, 1)), np.ones(3), -1.0)


def _perturbed(params, rng, size=0.1):
    vec = params.param_vector()
    return params.with_vector(vec * (1.0 + size * rng.uniform(-1, 1, len(vec))))


class TestFit:
    @pytest.mark.parametrize("algorithm", solver.ALGORITHMS)
    def test_sum_of_sines_recovery(self, algorithm):
        # synthetic-recovery oracle: exact data, start perturbed +-10%.
        # The span keeps a 10% frequency error inside the main lobe
        # (|dB| * N < pi); further out lie sidelobe minima that no local
        # method crosses, and global search is out of scope.
        rng = np.random.default_rng(10)
        x = np.arange(60.0)
        true = models.SumOfSines(((2.0, 0.3, 0.5),))
        y = models.evaluate(true, x)
        series = make_series(x, y)
        result = solver.fit(
            solver.FitProblem(series, _perturbed(true, rng)),
            solver.SolverConfig(algorithm=algorithm),
        )
        rel = np.max(
            np.abs(result.params.param_vector() - true.param_vector())
            / np.abs(true.param_vector())
        )
        assert rel <= 1e-6
        assert result.chi2 <= 1e-12 * float(y @ y)

    def test_fourier_recovery(self):
        rng = np.random.default_rng(11)
        x = np.arange(150.0)
        true = models.Fourier(5.0, ((1.2, -0.7), (0.4, 0.9)), 0.21)
        series = make_series(x, models.evaluate(true, x))
        result = solver.fit(solver.FitProblem(series, _perturbed(true, rng)))
        rel = np.max(
            np.abs(result.params.param_vector() - true.param_vector())
            / np.abs(true.param_vector())
        )
        assert rel <= 1e-6

    def test_polynomial_first_acceptance_reaches_optimum(self):
        rng = np.random.default_rng(12)
        x = np.linspace(-5.0, 5.0, 60)
        y = rng.normal(size=60) + 0.5 * x**2
        series = make_series(x, y)
        start = models.Polynomial((10.0, -4.0, 3.0))
        result = solver.fit(solver.FitProblem(series, start))
        design = np.vander(x, 3)
        best, *_ = np.linalg.lstsq(design, y, rcond=None)
        chi2_star = float(np.sum((y - design @ best) ** 2))
        # the first accepted (damped) step lands at the optimum to solve tolerance
        assert result.trace[1] - chi2_star <= 1e-4 * (result.trace[0] - chi2_star)
        assert result.converged
        assert result.chi2 == pytest.approx(chi2_star, rel=1e-12)

    def test_gauss_newton_one_step_on_linear_family(self):
        rng = np.random.default_rng(13)
        x = np.linspace(0.0, 3.0, 40)
        y = rng.normal(size=40)
        series = make_series(x, y)
        result = solver.fit(
            solver.FitProblem(series, models.Polynomial((5.0, 5.0, 5.0))),
            solver.SolverConfig(algorithm=solver.GAUSS_NEWTON),
        )
        best, *_ = np.linalg.lstsq(np.vander(x, 3), y, rcond=None)
        chi2_star = float(np.sum((y - np.vander(x, 3) @ best) ** 2))
        assert result.trace[1] == pytest.approx(chi2_star, rel=1e-12)
        assert result.converged

    @pytest.mark.parametrize("algorithm", solver.ALGORITHMS)
    def test_accepted_chi2_non_increasing(self, algorithm, reference_series):
        result = solver.fit_series(
            reference_series, "sum-of-sines", 5, solver.SolverConfig(algorithm=algorithm)
        )
        trace = np.asarray(result.trace)
        assert np.all(np.diff(trace) <= 0.0)

    def test_stationarity_at_convergence(self):
        rng = np.random.default_rng(14)
        x = np.arange(120.0)
        true = models.SumOfSines(((2.0, 0.31, 0.4), (0.7, 0.83, -0.2)))
        y = models.evaluate(true, x) + rng.normal(0, 0.01, 120)
        series = make_series(x, y)
        result = solver.fit(solver.FitProblem(series, _perturbed(true, rng, 0.05)))
        assert result.converged
        grad = solver.chi_square_gradient(series, result.params)
        assert np.linalg.norm(grad) <= 1e-4 * (1.0 + result.chi2)

    def test_perfect_start_converges_immediately(self):
        x = np.arange(30.0)
        params = models.Polynomial((1.5, -2.0))
        series = make_series(x, models.evaluate(params, x))
        result = solver.fit(solver.FitProblem(series, params))
        assert result.converged
        assert result.chi2 == 0.0

    def test_weights_shrink_chi2(self):
        x = np.arange(20.0)
        series = make_series(x, x + 1.0)
        params = models.Polynomial((0.0,))
        loose = solver.fit(
            solver.FitProblem(series, params, weights=np.full(20, 10.0)),
            solver.SolverConfig(max_iterations=5),
        )
        tight = solver.fit(
            solver.FitProblem(series, params), solver.SolverConfig(max_iterations=5)
        )
        assert loose.trace[0] == pytest.approx(tight.trace[0] / 100.0)

    def test_non_finite_initial_raises(self):
        x = np.arange(0.0, 800.0)
        series = make_series(x, np.ones(800))
        with pytest.raises(NonFiniteValueError):
            solver.fit(solver.FitProblem(series, models.ScaledExponential(1.0, 5.0)))

    def test_too_few_points(self):
        series = make_series([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(TooFewPointsError):
            solver.fit(solver.FitProblem(series, models.Polynomial((1.0, 1.0, 1.0))))

    def test_infeasible_trials_are_rejected_not_fatal(self):
        # a Weibull fit whose trial steps cross gamma/alpha <= 0 must survive
        rng = np.random.default_rng(15)
        x = np.arange(0.0, 60.0)
        y = 40.0 * np.exp(-(((x - 5.0) / 12.0) ** 2)) + rng.normal(0, 0.5, 60)
        series = make_series(x, y)
        guess = models.initial_guess("weibull", series, 4)
        result = solver.fit(solver.FitProblem(series, guess))
        result.params.validate()
        assert np.isfinite(result.chi2)

    def test_fixed_curve_returns_immediately(self):
        x = np.linspace(0.0, 1.0, 10)
        series = make_series(x, np.sin(x))
        result = solver.fit(solver.FitProblem(series, models.Sine()))
        assert result.converged
        assert result.iterations == 0
        assert result.chi2 == pytest.approx(0.0, abs=1e-20)

    def test_reduced_chi2_uses_dof(self):
        rng = np.random.default_rng(16)
        x = np.arange(50.0)
        series = make_series(x, 3.0 * x + rng.normal(0, 1, 50))
        result = solver.fit(solver.FitProblem(series, models.Polynomial((2.0, 0.0))))
        assert result.reduced_chi2 == pytest.approx(result.chi2 / (50 - 2))

    def test_converged_means_two_small_deltas(self):
        rng = np.random.default_rng(17)
        x = np.arange(80.0)
        series = make_series(x, np.sin(0.2 * x) + rng.normal(0, 0.05, 80))
        config = solver.SolverConfig()
        result = solver.fit(
            solver.FitProblem(series, models.SumOfSines(((0.9, 0.21, 0.1),))), config
        )
        assert result.converged
        tail = np.asarray(result.trace[-3:])
        deltas = -np.diff(tail)
        assert np.all(deltas <= config.chi2_abs_tol + config.chi2_rel_tol * tail[1:])


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(InvalidParamsError):
            solver.SolverConfig(algorithm="newton").validate()
        with pytest.raises(InvalidParamsError):
            solver.SolverConfig(max_iterations=0).validate()
        with pytest.raises(InvalidParamsError):
            solver.SolverConfig(mu_increase=0.5).validate()
        with pytest.raises(InvalidParamsError):
            solver.SolverConfig(chi2_abs_tol=0.0).validate()
        solver.SolverConfig().validate()

    def test_weights_validation(self):
        series = make_series([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        problem = solver.FitProblem(series, models.Polynomial((1.0,)), weights=np.zeros(3))
        with pytest.raises(InvalidParamsError):
            problem.sigma()
