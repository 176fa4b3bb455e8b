"""
Conditional kernels inside a window: exact partition laws, samplers against
rejection oracles, the closed-form Laplace functionals and consistency.
"""

import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.core.combinatorics import enumerate_partitions
from app.core.exceptions import ConditionMismatchError, DomainError, IdentityCheckError
from app.models import Configuration, ModelParams, OccupationProfile, RandomSource, Window
from app.services.diagnostics import TestFunction, chi_square_gof, chi_square_two_sample
from app.services.ensembles import (
    EnsembleCondition,
    EnsembleKind,
    PartitionLaw,
    assert_rho_free,
    assert_z_cancellation,
    kernel_apply,
    kernel_laplace_functional,
    partition_law_size_height,
    partition_law_total_height,
    rejection_sample,
    sample_occupied_sites,
    sample_size_height,
    sample_total_height,
    size_height_from_total_height,
    total_height_law_from_profile_weights,
)
from app.services.sampler import NegBinomialDist, sample_levy_batch

P_MIN = 1e-3


def gamma(**kwargs):
    return OccupationProfile.from_mapping({int(k[1:]): v for k, v in kwargs.items()})


def frequencies(law: PartitionLaw, profiles):
    support = [g for g, _ in law.support]
    observed = np.array([sum(1 for p in profiles if p == g) for g in support], dtype=float)
    pmf = np.array([float(p) for _, p in law.support])
    return observed, pmf


class TestEnsembleCondition:
    def test_validation(self):
        window = Window(0.0, 1.0)
        with pytest.raises(DomainError):
            EnsembleCondition.occupied_sites(-1, window)
        with pytest.raises(DomainError):
            EnsembleCondition.total_height(-2, window)
        with pytest.raises(DomainError):
            EnsembleCondition.size_and_height(3, 4, window)
        with pytest.raises(DomainError):
            EnsembleCondition.size_and_height(3, 0, window)
        assert EnsembleCondition.size_and_height(0, 0, window).k == 0

    def test_observed_and_matches(self):
        window = Window(0.0, 1.0)
        cfg = Configuration(((0.2, 2), (0.4, 1), (1.5, 7)))
        cond = EnsembleCondition.observed("both", cfg, window)
        assert (cond.m, cond.k) == (3, 2)
        assert cond.matches(cfg.occupation_profile(window))
        assert EnsembleCondition.observed(EnsembleKind.SITES, cfg, window).n == 2
        assert cond.to_dict() == {"kind": "both", "window": {"lo": 0.0, "hi": 1.0}, "m": 3, "k": 2}


class TestPartitionLaws:
    @pytest.mark.parametrize("m", range(0, 9))
    @pytest.mark.parametrize("rho_b", [Fraction(1, 2), 1, Fraction(7, 3)])
    def test_total_height_sums_to_one(self, m, rho_b):
        law = partition_law_total_height(m, rho_b)
        assert sum(p for _, p in law.support) == 1

    def test_known_values(self):
        assert partition_law_total_height(3, 1).probability(gamma(j1=1, j2=1)) == Fraction(1, 2)
        assert partition_law_size_height(4, 2).probability(gamma(j2=2)) == Fraction(3, 11)
        assert partition_law_size_height(4, 2).probability(gamma(j1=1, j3=1)) == Fraction(8, 11)

    @pytest.mark.parametrize("m", range(1, 8))
    def test_z_cancels(self, m):
        assert_z_cancellation(m, Fraction(3, 2))
        assert total_height_law_from_profile_weights(m, 2, Fraction(1, 7)).as_dict() == \
            partition_law_total_height(m, 2).as_dict()

    @pytest.mark.parametrize("m", range(1, 8))
    def test_size_height_is_rho_free(self, m):
        for k in range(1, m + 1):
            assert_rho_free(m, k)
            law = size_height_from_total_height(m, k, Fraction(5, 3))
            assert law.as_dict() == partition_law_size_height(m, k).as_dict()

    def test_k_marginal_of_total_height(self):
        # P(gamma(N) = k | m) = [m k] rho^k / rho^[m]
        law = partition_law_total_height(4, 2)
        assert law.k_marginal() == {1: Fraction(12, 120), 2: Fraction(44, 120), 3: Fraction(48, 120),
                                    4: Fraction(16, 120)}

    def test_law_must_normalize(self):
        with pytest.raises(IdentityCheckError):
            PartitionLaw(((gamma(j1=1), Fraction(1, 2)),))

    def test_impossible_condition(self):
        with pytest.raises(DomainError):
            partition_law_size_height(3, 0)


class TestSamplers:
    def test_occupied_sites(self):
        window = Window(0.0, 2.0)
        cfg = sample_occupied_sites(5, 0.5, window, RandomSource(1))
        assert cfg.xi(window) == 5
        assert all(m >= 1 for m in cfg.multiplicities)
        assert sample_occupied_sites(0, 0.5, window, RandomSource(1)) == Configuration.empty()

    def test_total_height_frequencies(self):
        window = Window(0.0, 1.0)
        gen = RandomSource(2).generator()
        profiles = [sample_total_height(4, 0.5, 1.0, window, gen).occupation_profile() for _ in range(20_000)]
        assert all(p.m == 4 for p in profiles)
        observed, pmf = frequencies(partition_law_total_height(4, 1), profiles)
        assert chi_square_gof(observed, pmf).p_value > P_MIN

    @pytest.mark.parametrize("method", ["exact", "sequential"])
    def test_size_height_frequencies(self, method):
        window = Window(0.0, 1.0)
        gen = RandomSource(3).generator()
        profiles = [sample_size_height(6, 3, window, gen, method).occupation_profile() for _ in range(20_000)]
        assert all(p.m == 6 and p.k == 3 for p in profiles)
        observed, pmf = frequencies(partition_law_size_height(6, 3), profiles)
        assert chi_square_gof(observed, pmf).p_value > P_MIN

    def test_exact_value_by_frequency(self):
        window = Window(0.0, 1.0)
        gen = RandomSource(4).generator()
        n = 20_000
        hits = sum(1 for _ in range(n) if sample_size_height(4, 2, window, gen).occupation_profile() == gamma(j2=2))
        p = 3 / 11
        assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_sequential_large_m(self):
        gen = RandomSource(5).generator()
        cfg = sample_size_height(200, 17, Window(0.0, 1.0), gen, method="sequential")
        profile = cfg.occupation_profile()
        assert profile.m == 200
        assert profile.k == 17

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            sample_size_height(3, 2, Window(0.0, 1.0), RandomSource(1), method="gibbs")


class TestKernelsAgainstRejection:
    """Conditional samplers against the rejection oracle on gamma_B"""

    @classmethod
    def setup_class(cls):
        cls.params = ModelParams(0.5, 1.0)
        cls.window = Window(0.0, 1.0)

    @pytest.mark.parametrize("z", [0.3, 0.5])
    @pytest.mark.parametrize("rho_b", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("kind", ["sites", "height", "both"])
    def test_two_sample(self, kind, rho_b, z):
        params = ModelParams(z, 1.0)
        window = Window(0.0, rho_b)
        cond = {
            "sites": EnsembleCondition.occupied_sites(2, window),
            "height": EnsembleCondition.total_height(3, window),
            "both": EnsembleCondition.size_and_height(4, 2, window),
        }[kind]
        source = RandomSource(40)
        gen = source.child(0).generator()
        kernel = [kernel_apply(cond, Configuration.empty(), params, gen).occupation_profile()
                  for _ in range(3_000)]
        oracle = rejection_sample(cond, params, 3_000, source.child(1))
        assert all(cond.matches(g) for g in kernel + oracle)
        key = lambda g: tuple(g.vector(4)) + (g.k - int(g.vector(4).sum()),)
        result = chi_square_two_sample([key(g) for g in kernel], [key(g) for g in oracle])
        assert result.p_value > P_MIN

    def test_outside_is_kept(self):
        cond = EnsembleCondition.total_height(2, self.window)
        outside = Configuration(((1.5, 3),))
        cfg = kernel_apply(cond, outside, self.params, RandomSource(1))
        assert cfg.outside(self.window) == outside
        assert cfg.zeta(self.window) == 2

    def test_mismatch(self):
        cond = EnsembleCondition.total_height(2, self.window)
        with pytest.raises(ConditionMismatchError):
            kernel_apply(cond, Configuration(((0.5, 1),)), self.params, RandomSource(1))

    def test_consistency_of_nested_windows(self):
        """Resampling a sub-window under its own condition leaves the kernel's law unchanged"""
        outer = EnsembleCondition.size_and_height(5, 3, self.window)
        inner_window = Window(0.0, 0.5)
        source = RandomSource(41)
        gen_a, gen_b = source.child(0).generator(), source.child(1).generator()
        first, twice = [], []
        for _ in range(5_000):
            first.append(kernel_apply(outer, Configuration.empty(), self.params, gen_a))
            cfg = kernel_apply(outer, Configuration.empty(), self.params, gen_b)
            inner = EnsembleCondition.observed(EnsembleKind.BOTH, cfg, inner_window)
            twice.append(kernel_apply(inner, cfg.outside(inner_window), self.params, gen_b))
        key = lambda c: (str(c.occupation_profile(self.window)), c.zeta(inner_window))
        assert chi_square_two_sample([key(c) for c in first], [key(c) for c in twice]).p_value > P_MIN


class TestTowerProperty:
    def test_mixing_total_height_over_negbin_gives_levy(self):
        params = ModelParams(0.5, 1.0)
        window = Window(0.0, 1.5)
        source = RandomSource(42)
        gen = source.child(0).generator()
        heights = NegBinomialDist(window.length, params.z).sample(source.child(1), 6_000)
        mixed = [sample_total_height(int(m), params.z, window.length, window, gen).occupation_profile()
                 for m in heights]
        levy = sample_levy_batch(params, window, 6_000, source.child(2))
        direct = [levy.configuration(i).occupation_profile() for i in range(levy.size)]
        assert chi_square_two_sample([str(g) for g in mixed], [str(g) for g in direct]).p_value > P_MIN


class TestKernelLaplace:
    @classmethod
    def setup_class(cls):
        cls.params = ModelParams(0.5, 1.0)
        cls.window = Window(0.0, 2.0)
        cls.f = TestFunction.step(math.log(2.0), 0.0, 1.0)

    def test_zero_function_gives_one(self):
        zero = TestFunction.zero(self.window)
        for cond in [EnsembleCondition.occupied_sites(3, self.window),
                     EnsembleCondition.total_height(4, self.window),
                     EnsembleCondition.size_and_height(4, 2, self.window)]:
            assert kernel_laplace_functional(cond, zero, self.params) == pytest.approx(1.0)

    @pytest.mark.parametrize("cond", [
        EnsembleCondition.occupied_sites(3, Window(0.0, 2.0)),
        EnsembleCondition.total_height(4, Window(0.0, 2.0)),
        EnsembleCondition.size_and_height(4, 2, Window(0.0, 2.0)),
    ])
    def test_matches_monte_carlo(self, cond):
        gen = RandomSource(50).generator()
        values = np.array([
            math.exp(-kernel_apply(cond, Configuration.empty(), self.params, gen).integrate(self.f))
            for _ in range(20_000)
        ])
        exact = kernel_laplace_functional(cond, self.f, self.params)
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - exact) <= 4 * se

    def test_empty_sites_condition(self):
        cond = EnsembleCondition.occupied_sites(0, self.window)
        assert kernel_laplace_functional(cond, self.f, self.params) == 1.0


def test_enumeration_feeds_laws():
    # every partition of 6 into 3 blocks carries positive mass
    law = partition_law_size_height(6, 3)
    assert {g for g, _ in law.support} == set(enumerate_partitions(6, 3))
