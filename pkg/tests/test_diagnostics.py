"""
Identity checks and chi-square utilities.
Monte Carlo sizes here are far below the acceptance runs; those are marked slow.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.core import parallel
from app.core.exceptions import DegenerateTestError, DomainError
from app.models import ModelParams, RandomSource, Window
from app.services.diagnostics import (
    DEFAULT_GRID,
    McEstimate,
    RunningMoments,
    TestFunction,
    check_integral_equation,
    check_laplace,
    check_palm,
    chi_square_gof,
    chi_square_two_sample,
    distribution_check,
    estimate_campbell,
    grid_test_functions,
    judge,
    laplace_closed_form,
    pool_cells,
    step_integral,
    verify_grid,
)
from app.services.sampler import sample_poisson_control_batch


class TestTestFunctions:
    def test_step_values(self):
        f = TestFunction.step(2.0, 0.5, 1.0)
        assert f(np.array([0.2, 0.5, 0.99, 1.0])).tolist() == [0.0, 2.0, 2.0, 0.0]
        assert f.to_dict() == {"kind": "step", "level": 2.0, "sub": {"lo": 0.5, "hi": 1.0}}
        with pytest.raises(DomainError):
            TestFunction.step(-1.0, 0.0, 1.0)

    def test_average(self):
        f = TestFunction.step(1.0, 0.0, 1.0)
        assert f.average(lambda v: v, Window(0.0, 4.0)) == pytest.approx(0.25)
        assert TestFunction.zero(Window(0.0, 1.0)).average(math.exp, Window(0.0, 1.0)) == 1.0

    def test_step_integral_breakpoints(self):
        window = Window(0.0, 2.0)
        f = TestFunction.step(math.log(2.0), 0.0, 1.0)
        g = TestFunction.weight(1.0, 0.5, 2.0)
        # int_B g e^{-f} = 0.5 * 1/2 + 1 * 1
        value = step_integral(window, 3.0, (g, lambda v: v), (f, lambda v: math.exp(-v)))
        assert value == pytest.approx(3.0 * 1.25)

    def test_grid_functions(self):
        f, g = grid_test_functions(Window(0.0, 2.0))
        assert f.sub == Window(0.0, 1.0) and f.level == pytest.approx(math.log(2.0))
        assert g.sub == Window(0.5, 2.0) and g.level == 1.0


class TestMoments:
    def test_merge_matches_numpy(self):
        values = np.random.default_rng(0).normal(3.0, 2.0, 10_001)
        merged = RunningMoments()
        for part in np.array_split(values, 7):
            merged.merge(RunningMoments().update(part))
        assert merged.count == values.size
        assert merged.mean == pytest.approx(values.mean())
        assert merged.variance == pytest.approx(values.var(ddof=1))
        assert merged.estimate().se == pytest.approx(values.std(ddof=1) / math.sqrt(values.size))

    def test_empty(self):
        assert RunningMoments().update(np.array([])).count == 0
        assert RunningMoments().estimate().se == 0.0

    def test_judge(self):
        lhs = McEstimate(1.00, 0.01, 100)
        assert judge("x", lhs, McEstimate.exact(1.02), 0.05).passed
        assert not judge("x", lhs, McEstimate.exact(1.05), 0.05).passed
        assert not judge("x", lhs, McEstimate.exact(1.02), 0.01).passed
        report = judge("x", lhs, McEstimate.exact(1.02), 0.05)
        assert report.pooled_se == pytest.approx(0.01)
        assert report.to_dict()["rhs"] == {"mean": 1.02, "se": 0.0, "n": 0}


class TestChiSquare:
    def test_pool_cells(self):
        obs, exp = pool_cells(np.array([1, 2, 10, 1, 1]), np.array([2.0, 3.0, 9.0, 1.0, 1.0]))
        assert obs.tolist() == [3, 12]
        assert exp.tolist() == [5.0, 11.0]

    def test_gof_perfect_fit(self):
        result = chi_square_gof([50, 30, 20], [0.5, 0.3, 0.2])
        assert result.statistic == pytest.approx(0.0)
        assert result.p_value == pytest.approx(1.0)
        assert result.dof == 2

    def test_gof_adds_tail_cell(self):
        result = chi_square_gof([50, 50], [0.25, 0.25])
        assert result.cells == 3
        assert result.p_value < 1e-10

    def test_degenerate(self):
        with pytest.raises(DegenerateTestError):
            chi_square_gof([3, 1], [0.5, 0.5])
        with pytest.raises(DegenerateTestError):
            chi_square_two_sample([1] * 20, [1] * 20)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            chi_square_gof([1, 2, 3], [0.5, 0.5])

    def test_two_sample(self):
        gen = np.random.default_rng(1)
        a = gen.integers(0, 4, 5_000).tolist()
        b = gen.integers(0, 4, 5_000).tolist()
        assert chi_square_two_sample(a, b).p_value > 1e-3
        c = gen.integers(0, 3, 5_000).tolist()
        assert chi_square_two_sample(a, c).p_value < 1e-6


class TestIdentityChecks:
    """Campbell integral equation, Palm kernel and Laplace functional at moderate N"""

    @classmethod
    def setup_class(cls):
        parallel.set_threads(2)
        cls.params = ModelParams(0.5, 1.0)
        cls.window = Window(0.0, 1.0)
        cls.f, cls.g = grid_test_functions(cls.window)

    @classmethod
    def teardown_class(cls):
        parallel.set_threads(None)

    def test_laplace_closed_form(self):
        assert laplace_closed_form(TestFunction.zero(self.window), self.params, self.window) == 1.0
        # f = infinity-like level on B gives P(mu(B) = 0) = (1-z)^rho(B)
        big = TestFunction.step(60.0, 0.0, 1.0)
        assert laplace_closed_form(big, self.params, self.window) == pytest.approx(0.5, rel=1e-12)

    def test_integral_equation(self):
        report = check_integral_equation(self.f, self.g, self.params, self.window, 200_000, RandomSource(1))
        assert report.passed, report.to_dict()

    def test_palm(self):
        report = check_palm(self.f, self.g, self.params, self.window, 200_000, RandomSource(2))
        assert report.passed, report.to_dict()

    def test_laplace(self):
        report = check_laplace(self.f, self.params, self.window, 200_000, RandomSource(3))
        assert report.passed, report.to_dict()

    def test_poisson_control_fails(self):
        window = Window(0.0, 2.0)
        f, g = grid_test_functions(window)
        report = check_integral_equation(f, g, self.params, window, 200_000, RandomSource(4),
                                         sampler=sample_poisson_control_batch)
        assert not report.passed
        assert report.lhs.mean > report.rhs.mean

    def test_campbell_mean_with_unit_functions(self):
        # f = 0, g = 1 gives E[zeta_B] = z/(1-z) rho(B)
        estimate = estimate_campbell(TestFunction.zero(self.window), TestFunction.one(self.window),
                                     self.params, self.window, 100_000, RandomSource(5))
        assert abs(estimate.mean - 1.0) <= 4 * estimate.se

    def test_thread_count_does_not_change_results(self):
        a = check_laplace(self.f, self.params, self.window, 250_000, RandomSource(6))
        parallel.set_threads(1)
        b = check_laplace(self.f, self.params, self.window, 250_000, RandomSource(6))
        parallel.set_threads(2)
        assert a.lhs == b.lhs

    def test_empty_process(self):
        empty = ModelParams.empty()
        assert check_integral_equation(self.f, self.g, empty, self.window, 10, RandomSource(1)).passed
        assert check_laplace(self.f, empty, self.window, 10, RandomSource(1)).lhs.mean == 1.0


class TestDistributionCheck:
    def test_all_pass(self):
        reports = distribution_check(ModelParams(0.5, 1.0), Window(0.0, 2.0), 20_000, RandomSource(7),
                                     alpha=1e-3, urn_size=10_000)
        names = [r["name"] for r in reports]
        assert names == ["zeta_negative_binomial", "xi_poisson", "multiplicity_logarithmic",
                         "profile_1_2_independent_poisson", "levy_vs_urn_xi_zeta_profile1"]
        assert all(r["passed"] for r in reports), reports

    def test_empty_process(self):
        with pytest.raises(DomainError):
            distribution_check(ModelParams.empty(), Window(0.0, 1.0), 100, RandomSource(1))


def test_verify_grid_small():
    result = verify_grid([(0.5, 1.0)], 200_000, RandomSource(8))
    assert len(result["checks"]) == 3
    assert result["control_detected"]
    assert result["passed"]


@pytest.mark.slow
def test_verify_default_grid_acceptance():
    result = verify_grid(DEFAULT_GRID, 1_000_000, RandomSource(20240601))
    assert result["passed"], [c.to_dict() for c in result["checks"] if not c.passed]
