"""
Exact combinatorics of the iterated Polya sum kernels
Partitions, cycle weights c(gamma), Stirling cycle numbers, the alpha recursion
and the polynomial/series identities, all in exact rational arithmetic
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from sympy.combinatorics import Permutation
from sympy.utilities.iterables import partitions

from app.core.exceptions import DomainError, EnumerationBoundError, IdentityCheckError
from app.core.utils import Number, as_fraction, get_env_int
from app.models import OccupationProfile

logger = logging.getLogger(__name__)

ENUMERATION_BOUND = get_env_int("POLYA_ENUMERATION_BOUND", 40)
PERMUTATION_ORACLE_BOUND = get_env_int("POLYA_PERMUTATION_ORACLE_BOUND", 8)


def _check_bound(m: int, bound: Optional[int] = None):
    bound = ENUMERATION_BOUND if bound is None else bound
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    if m > bound:
        raise EnumerationBoundError(f"m={m} exceeds the enumeration bound {bound}")


def _descending_key(gamma: OccupationProfile) -> Tuple[int, ...]:
    return tuple(reversed(gamma.parts()))


@lru_cache(maxsize=None)
def _partitions_cached(m: int) -> Tuple[OccupationProfile, ...]:
    if m == 0:
        return (OccupationProfile(),)
    # sympy reuses the yielded dict, so each one is copied into a profile right away
    profiles = [OccupationProfile.from_mapping(p) for p in partitions(m)]
    return tuple(sorted(profiles, key=_descending_key, reverse=True))


def enumerate_partitions(m: int, k: Optional[int] = None, bound: Optional[int] = None) -> List[OccupationProfile]:
    """
    All gamma in M_(m)(N), optionally with gamma(N) = k.

    Ordered by decreasing largest part, then lexicographically on the
    descending part sequence: m=3 gives {3:1}, {1:1,2:1}, {1:3}.
    """
    _check_bound(m, bound)
    profiles = _partitions_cached(m)
    if k is None:
        return list(profiles)
    return [g for g in profiles if g.k == k]


def cycle_weight(gamma: OccupationProfile) -> Fraction:
    """c(gamma) = prod_j j^gamma(j) * gamma(j)!"""
    out = 1
    for j, c in gamma.counts:
        out *= j ** c * math.factorial(c)
    return Fraction(out)


def permutation_count(gamma: OccupationProfile) -> Fraction:
    """m!/c(gamma), the number of permutations of m elements with cycle type gamma"""
    return Fraction(math.factorial(gamma.m)) / cycle_weight(gamma)


_STIRLING_ROWS: List[List[int]] = [[1]]


def stirling_row(m: int) -> List[int]:
    """[m 0], ..., [m m] as Python integers, via [m k] = [m-1 k-1] + (m-1)[m-1 k]"""
    if m < 0:
        raise DomainError(f"Stirling numbers need m >= 0, got {m}")
    while len(_STIRLING_ROWS) <= m:
        n = len(_STIRLING_ROWS)
        prev = _STIRLING_ROWS[-1] + [0]
        row = [0] * (n + 1)
        for k in range(1, n + 1):
            row[k] = prev[k - 1] + (n - 1) * prev[k]
        _STIRLING_ROWS.append(row)
    return _STIRLING_ROWS[m]


def stirling_cycle(m: int, k: int) -> Fraction:
    """Unsigned Stirling number of the first kind [m k]"""
    if m < 0 or k < 0:
        raise DomainError(f"Stirling numbers need m, k >= 0, got ({m}, {k})")
    if k > m:
        return Fraction(0)
    return Fraction(stirling_row(m)[k])


def rising_factorial(x: Number, m: int) -> Fraction:
    """x^[m] = x (x+1) ... (x+m-1); x^[0] = 1"""
    if m < 0:
        raise DomainError(f"rising factorial needs m >= 0, got {m}")
    x = as_fraction(x)
    out = Fraction(1)
    for i in range(m):
        out *= x + i
    return out


def alpha_recursion(m_max: int) -> Dict[Tuple[int, OccupationProfile], Fraction]:
    """
    Constants alpha^(m)_gamma of the iterated kernels, built by the recursion

        alpha^(m+1)_gamma = sum_j j (gamma(j)+1) alpha^(m)_{gamma + delta_j - delta_{j+1}} 1{gamma(j+1) >= 1}
                          + alpha^(m)_{gamma - delta_1} 1{gamma(1) >= 1}

    from alpha^(1)_{delta_1} = 1. Every entry is checked against m!/c(gamma).
    """
    _check_bound(m_max)
    alpha: Dict[Tuple[int, OccupationProfile], Fraction] = {}
    if m_max < 1:
        return alpha
    alpha[(1, OccupationProfile.from_mapping({1: 1}))] = Fraction(1)
    for m in range(1, m_max):
        for gamma in enumerate_partitions(m + 1):
            value = Fraction(0)
            for j in range(1, gamma.largest_part):
                if gamma[j + 1] >= 1:
                    smaller = gamma.shifted(j + 1, -1).shifted(j, 1)
                    value += j * (gamma[j] + 1) * alpha[(m, smaller)]
            if gamma[1] >= 1:
                value += alpha[(m, gamma.shifted(1, -1))]
            alpha[(m + 1, gamma)] = value

    for (m, gamma), value in alpha.items():
        if value != permutation_count(gamma):
            raise IdentityCheckError(f"alpha^({m})_{gamma} = {value} != m!/c(gamma) = {permutation_count(gamma)}")
    return alpha


def cycle_type(permutation: Sequence[int]) -> OccupationProfile:
    """Cycle structure of a permutation of 0..m-1 given in one-line notation"""
    if len(permutation) == 0:
        return OccupationProfile()
    structure = Permutation(list(permutation)).cycle_structure
    return OccupationProfile.from_mapping({int(j): int(c) for j, c in structure.items()})


def permutation_cycle_counts(m: int) -> Dict[OccupationProfile, int]:
    """Brute-force oracle: number of permutations of m elements per cycle type"""
    _check_bound(m, PERMUTATION_ORACLE_BOUND)
    counts: Dict[OccupationProfile, int] = {}
    for perm in itertools.permutations(range(m)):
        gamma = cycle_type(perm)
        counts[gamma] = counts.get(gamma, 0) + 1
    return counts


def _compositions(m: int, k: int) -> Iterator[Tuple[int, ...]]:
    if k == 0:
        if m == 0:
            yield ()
        return
    for first in range(1, m - k + 2):
        for rest in _compositions(m - first, k - 1):
            yield (first,) + rest


def composition_expansion(m: int, k: int) -> Dict[OccupationProfile, Fraction]:
    """
    (m!/k!) * sum over compositions (i'_1, ..., i'_k) of m of 1/(i'_1 ... i'_k),
    grouped by the multiset of parts. Equals m!/c(gamma) for each gamma with gamma(N) = k.
    """
    _check_bound(m, PERMUTATION_ORACLE_BOUND)
    scale = Fraction(math.factorial(m), math.factorial(k))
    grouped: Dict[OccupationProfile, Fraction] = {}
    for comp in _compositions(m, k):
        gamma = OccupationProfile.from_parts(comp)
        grouped[gamma] = grouped.get(gamma, Fraction(0)) + scale / math.prod(comp)
    return grouped


def rising_factorial_identity(x: Number, m: int) -> Tuple[Fraction, Fraction]:
    """(sum_k x^k sum_{gamma(N)=k} m!/c(gamma), x^[m])"""
    x = as_fraction(x)
    lhs = Fraction(0)
    for gamma in enumerate_partitions(m):
        lhs += x ** gamma.k * permutation_count(gamma)
    return lhs, rising_factorial(x, m)


@dataclass(frozen=True)
class SeriesIdentityResult:
    """Degree-wise coefficients and partial sums of both sides of the z-series identity"""
    lhs_terms: Tuple[Fraction, ...]
    rhs_terms: Tuple[Fraction, ...]
    lhs_sum: Fraction
    rhs_sum: Fraction

    @property
    def residual(self) -> Tuple[Fraction, Fraction]:
        return self.lhs_sum, self.rhs_sum

    @property
    def degreewise_equal(self) -> bool:
        return self.lhs_terms == self.rhs_terms


def series_identity_check(z: Number, rho_b: Number, damping: Number, m_max: int) -> SeriesIdentityResult:
    """
    Both sides of

        sum_m z^m/m! pi^(m)_B(0, phi) = sum_k 1/k! sum_{i_1..i_k} prod z^i/i * int phi(...) rho^k

    for phi(mu) = exp(-f zeta_B mu) with a constant level f on B, passed through its
    exponential `damping` = e^{-f} so that every term stays rational.
    Term d of each side is its coefficient of z^d times z^d.
    """
    z, rho_b, q = as_fraction(z), as_fraction(rho_b), as_fraction(damping)
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z}")
    if not 0 <= q <= 1:
        raise DomainError(f"damping e^-f must lie in [0, 1], got {q}")
    if m_max < 1:
        raise DomainError(f"m_max must be >= 1, got {m_max}")

    # lhs: phi is the constant q^m on m points, so pi^(m)(0, phi) = q^m rho(B)^[m]
    lhs_terms = tuple(
        z ** m / math.factorial(m) * q ** m * rising_factorial(rho_b, m)
        for m in range(1, m_max + 1)
    )

    # rhs: c[k][d] = sum over compositions of d into k parts of prod 1/i
    c = [[Fraction(0)] * (m_max + 1) for _ in range(m_max + 1)]
    c[0][0] = Fraction(1)
    for k in range(1, m_max + 1):
        for d in range(k, m_max + 1):
            c[k][d] = sum((c[k - 1][d - i] / i for i in range(1, d - k + 2)), Fraction(0))
    rhs_terms = tuple(
        sum((rho_b ** k / math.factorial(k) * c[k][d] for k in range(1, d + 1)), Fraction(0)) * z ** d * q ** d
        for d in range(1, m_max + 1)
    )
    return SeriesIdentityResult(lhs_terms, rhs_terms, sum(lhs_terms, Fraction(0)), sum(rhs_terms, Fraction(0)))


def selfcheck(m_max: int = 8, x_values: Sequence[Number] = (Fraction(1, 2), 1, Fraction(7, 3))) -> List[Dict]:
    """Run every exact identity up to m_max and report one entry per identity"""
    m_max = min(m_max, PERMUTATION_ORACLE_BOUND)
    report: List[Dict] = []

    def record(identity: str, ok: bool, detail: str = ""):
        entry = {"identity": identity, "m_range": [0, m_max], "status": "pass" if ok else "fail"}
        if detail:
            entry["detail"] = detail
        report.append(entry)
        if ok:
            logger.info(f"✅ {identity}")
        else:
            logger.error(f"❌ {identity}: {detail}")

    try:
        alpha_recursion(m_max)
        record("alpha_recursion_equals_cycle_count", True)
    except IdentityCheckError as e:
        record("alpha_recursion_equals_cycle_count", False, str(e))

    bad = []
    for m in range(m_max + 1):
        oracle = permutation_cycle_counts(m)
        total = sum((permutation_count(g) for g in enumerate_partitions(m)), Fraction(0))
        if total != math.factorial(m):
            bad.append(f"sum m!/c(gamma) != {m}!")
        for gamma in enumerate_partitions(m):
            if permutation_count(gamma) != oracle.get(gamma, 0):
                bad.append(f"cycle count of {gamma}")
        for k in range(m + 1):
            brute = sum(v for g, v in oracle.items() if g.k == k)
            if stirling_cycle(m, k) != brute:
                bad.append(f"[{m} {k}]")
            if m >= 1 and k >= 1 and stirling_cycle(m, k) != stirling_cycle(m - 1, k - 1) + (m - 1) * stirling_cycle(m - 1, k):
                bad.append(f"recurrence at [{m} {k}]")
    record("cycle_counts_and_stirling_match_permutation_enumeration", not bad, "; ".join(bad))

    bad = []
    for x in x_values:
        for m in range(m_max + 1):
            lhs, rhs = rising_factorial_identity(x, m)
            if lhs != rhs:
                bad.append(f"x={x}, m={m}")
    record("rising_factorial_identity", not bad, "; ".join(bad))

    bad = []
    for m in range(1, min(m_max, 6) + 1):
        for k in range(1, m + 1):
            expansion = composition_expansion(m, k)
            expected = {g: permutation_count(g) for g in enumerate_partitions(m, k)}
            if expansion != expected:
                bad.append(f"m={m}, k={k}")
    record("composition_expansion_collapses_to_cycle_counts", not bad, "; ".join(bad))

    bad = []
    for z, rho_b, q in [(Fraction(1, 2), 1, 1), (Fraction(1, 2), 1, Fraction(1, 2)),
                        (Fraction(1, 3), Fraction(7, 3), Fraction(2, 5))]:
        result = series_identity_check(z, rho_b, q, 6)
        if not result.degreewise_equal:
            bad.append(f"z={z}, rho={rho_b}, q={q}")
    record("series_identity_degreewise", not bad, "; ".join(bad))
    return report
