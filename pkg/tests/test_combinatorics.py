"""
Exact combinatorics: partitions, cycle counts, Stirling numbers, the alpha
recursion and the rising-factorial and series identities.
"""

import math
import os
import sys
from fractions import Fraction

import pytest
from sympy.combinatorics import Permutation
from sympy.functions.combinatorial.numbers import stirling
from sympy.ntheory import npartitions
from sympy.utilities.iterables import partitions

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.core.combinatorics import (
    alpha_recursion,
    composition_expansion,
    cycle_type,
    cycle_weight,
    enumerate_partitions,
    permutation_count,
    permutation_cycle_counts,
    rising_factorial,
    rising_factorial_identity,
    selfcheck,
    series_identity_check,
    stirling_cycle,
    stirling_row,
)
from app.core.exceptions import DomainError, EnumerationBoundError
from app.models import OccupationProfile


def profile(**kwargs):
    return OccupationProfile.from_mapping({int(k[1:]): v for k, v in kwargs.items()})


class TestPartitions:
    """Enumeration of M_(m)(N)"""

    def test_partition_counts(self):
        # p(m) for m = 0..10
        expected = [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
        assert [len(enumerate_partitions(m)) for m in range(11)] == expected

    def test_order_for_m3(self):
        assert enumerate_partitions(3) == [
            OccupationProfile.from_mapping({3: 1}),
            OccupationProfile.from_mapping({1: 1, 2: 1}),
            OccupationProfile.from_mapping({1: 3}),
        ]

    def test_empty_partition(self):
        assert enumerate_partitions(0) == [OccupationProfile()]

    def test_filter_by_k(self):
        parts = enumerate_partitions(6, k=2)
        assert {str(g) for g in parts} == {"{1:1, 5:1}", "{2:1, 4:1}", "{3:2}"}
        assert all(g.m == 6 and g.k == 2 for g in parts)

    def test_bound(self):
        with pytest.raises(EnumerationBoundError):
            enumerate_partitions(41)
        with pytest.raises(EnumerationBoundError):
            enumerate_partitions(5, bound=4)
        with pytest.raises(DomainError):
            enumerate_partitions(-1)


class TestCycleCounts:
    """m!/c(gamma) against brute-force permutation enumeration"""

    def test_cycle_weight(self):
        assert cycle_weight(profile(j1=2, j2=1)) == 2 * 2
        assert cycle_weight(profile(j3=2)) == 9 * 2
        assert cycle_weight(OccupationProfile()) == 1

    def test_cycle_type(self):
        assert cycle_type([1, 2, 0, 3]) == profile(j1=1, j3=1)
        assert cycle_type([0, 1, 2]) == profile(j1=3)
        assert cycle_type([]) == OccupationProfile()

    @pytest.mark.parametrize("m", range(0, 8))
    def test_against_permutations(self, m):
        oracle = permutation_cycle_counts(m)
        for gamma in enumerate_partitions(m):
            assert permutation_count(gamma) == oracle[gamma]
        assert sum(oracle.values()) == math.factorial(m)

    def test_oracle_bound(self):
        with pytest.raises(EnumerationBoundError):
            permutation_cycle_counts(9)


class TestStirling:
    def test_known_rows(self):
        assert [stirling_cycle(5, k) for k in range(6)] == [0, 24, 50, 35, 10, 1]
        assert stirling_cycle(4, 2) == 11
        assert stirling_cycle(0, 0) == 1
        assert stirling_cycle(3, 5) == 0

    @pytest.mark.parametrize("m", range(1, 9))
    def test_row_sums_to_factorial(self, m):
        assert sum(stirling_cycle(m, k) for k in range(m + 1)) == math.factorial(m)

    def test_negative(self):
        with pytest.raises(DomainError):
            stirling_cycle(-1, 0)


class TestIdentities:
    def test_rising_factorial(self):
        assert rising_factorial(2, 3) == 24
        assert rising_factorial(Fraction(1, 2), 2) == Fraction(3, 4)
        assert rising_factorial(5, 0) == 1

    @pytest.mark.parametrize("x", [Fraction(1, 2), 1, Fraction(7, 3)])
    @pytest.mark.parametrize("m", range(0, 9))
    def test_rising_factorial_identity(self, x, m):
        lhs, rhs = rising_factorial_identity(x, m)
        assert lhs == rhs

    def test_alpha_recursion_matches_cycle_counts(self):
        alpha = alpha_recursion(8)
        for m in range(1, 9):
            for gamma in enumerate_partitions(m):
                assert alpha[(m, gamma)] == permutation_count(gamma)

    @pytest.mark.parametrize("m,k", [(3, 2), (4, 2), (5, 3), (6, 1), (6, 6)])
    def test_composition_expansion(self, m, k):
        expansion = composition_expansion(m, k)
        assert expansion == {g: permutation_count(g) for g in enumerate_partitions(m, k)}

    @pytest.mark.parametrize("z,rho_b,q", [
        (Fraction(1, 2), 1, 1),
        (Fraction(1, 2), 1, Fraction(1, 2)),
        (Fraction(1, 3), Fraction(7, 3), Fraction(2, 5)),
    ])
    def test_series_identity_degreewise(self, z, rho_b, q):
        result = series_identity_check(z, rho_b, q, 6)
        assert result.degreewise_equal
        assert result.lhs_sum == result.rhs_sum
        assert all(isinstance(t, Fraction) for t in result.lhs_terms)

    def test_series_identity_domain(self):
        with pytest.raises(DomainError):
            series_identity_check(Fraction(3, 2), 1, 1, 4)
        with pytest.raises(DomainError):
            series_identity_check(Fraction(1, 2), 1, 2, 4)

    def test_selfcheck_report(self):
        report = selfcheck(6)
        assert {e["identity"] for e in report} == {
            "alpha_recursion_equals_cycle_count",
            "cycle_counts_and_stirling_match_permutation_enumeration",
            "rising_factorial_identity",
            "composition_expansion_collapses_to_cycle_counts",
            "series_identity_degreewise",
        }
        assert all(e["status"] == "pass" for e in report)
        assert all(e["m_range"] == [0, 6] for e in report)


class TestAgainstSympy:
    """Independent reference values from sympy"""

    @pytest.mark.parametrize("m", range(1, 13))
    def test_partitions(self, m):
        reference = {OccupationProfile.from_mapping(dict(p)) for p in partitions(m)}
        ours = enumerate_partitions(m)
        assert len(ours) == len(reference) == npartitions(m)
        assert set(ours) == reference

    @pytest.mark.parametrize("m", [1, 2, 7, 15, 30])
    def test_stirling_rows(self, m):
        row = stirling_row(m)
        assert row == [int(stirling(m, k, kind=1, signed=False)) for k in range(m + 1)]

    def test_stirling_large(self):
        assert stirling_cycle(60, 17) == int(stirling(60, 17, kind=1, signed=False))

    @pytest.mark.parametrize("perm", [[1, 2, 0, 3], [4, 3, 2, 1, 0], [0], [2, 0, 1, 4, 5, 3, 6]])
    def test_cycle_type(self, perm):
        structure = Permutation(perm).cycle_structure
        assert cycle_type(perm) == OccupationProfile.from_mapping(structure)
