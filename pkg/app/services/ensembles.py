"""
Conditional kernels of the Polya sum process inside a window:
occupied sites (xi_B fixed), total height (zeta_B fixed) and size-and-height
(both fixed). Exact partition laws, exact samplers and rejection oracles.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.combinatorics import (
    ENUMERATION_BOUND,
    enumerate_partitions,
    permutation_count,
    rising_factorial,
    stirling_cycle,
    stirling_row,
)
from app.core.exceptions import ConditionMismatchError, DomainError, IdentityCheckError
from app.core.utils import Number, as_fraction
from app.models import (
    Configuration,
    GroundIntensity,
    ModelParams,
    OccupationProfile,
    RandomLike,
    Window,
    as_generator,
)
from app.services.diagnostics import TestFunction
from app.services.sampler import LogarithmicDist, sample_levy_batch

logger = logging.getLogger(__name__)


class EnsembleKind(str, Enum):
    SITES = "sites"
    HEIGHT = "height"
    BOTH = "both"


@dataclass(frozen=True)
class EnsembleCondition:
    """
    Conditioning event inside a window:
    SITES fixes xi_B = n, HEIGHT fixes zeta_B = m, BOTH fixes zeta_B = m and xi_B = k.
    """
    kind: EnsembleKind
    window: Window
    n: Optional[int] = None
    m: Optional[int] = None
    k: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.kind == EnsembleKind.SITES:
            if self.n is None or self.n < 0:
                raise DomainError(f"occupied-sites condition needs n >= 0, got {self.n}")
        elif self.kind == EnsembleKind.HEIGHT:
            if self.m is None or self.m < 0:
                raise DomainError(f"total-height condition needs m >= 0, got {self.m}")
        else:
            if self.m is None or self.k is None or not 0 <= self.k <= self.m:
                raise DomainError(f"size-and-height condition needs 0 <= k <= m, got m={self.m}, k={self.k}")
            if (self.k == 0) != (self.m == 0):
                raise DomainError(f"k = 0 exactly when m = 0, got m={self.m}, k={self.k}")

    @classmethod
    def occupied_sites(cls, n: int, window: Window) -> 'EnsembleCondition':
        return cls(EnsembleKind.SITES, window, n=n)

    @classmethod
    def total_height(cls, m: int, window: Window) -> 'EnsembleCondition':
        return cls(EnsembleKind.HEIGHT, window, m=m)

    @classmethod
    def size_and_height(cls, m: int, k: int, window: Window) -> 'EnsembleCondition':
        return cls(EnsembleKind.BOTH, window, m=m, k=k)

    @classmethod
    def observed(cls, kind: EnsembleKind, cfg: Configuration, window: Window) -> 'EnsembleCondition':
        """The condition a configuration satisfies on the window"""
        kind = EnsembleKind(kind)
        if kind == EnsembleKind.SITES:
            return cls.occupied_sites(cfg.xi(window), window)
        if kind == EnsembleKind.HEIGHT:
            return cls.total_height(cfg.zeta(window), window)
        return cls.size_and_height(cfg.zeta(window), cfg.xi(window), window)

    def matches(self, profile: OccupationProfile) -> bool:
        if self.kind == EnsembleKind.SITES:
            return profile.k == self.n
        if self.kind == EnsembleKind.HEIGHT:
            return profile.m == self.m
        return profile.m == self.m and profile.k == self.k

    def to_dict(self) -> Dict:
        out = {"kind": self.kind.value, "window": self.window.to_dict()}
        for name in ("n", "m", "k"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class PartitionLaw:
    """Finite law on occupation profiles with exact rational probabilities"""
    support: Tuple[Tuple[OccupationProfile, Fraction], ...]

    def __post_init__(self):
        total = sum((p for _, p in self.support), Fraction(0))
        if total != 1:
            raise IdentityCheckError(f"partition law sums to {total}, not 1")
        if any(p < 0 for _, p in self.support):
            raise IdentityCheckError("partition law has negative mass")

    @classmethod
    def from_weights(cls, weights: Dict[OccupationProfile, Fraction]) -> 'PartitionLaw':
        total = sum(weights.values(), Fraction(0))
        if total <= 0:
            raise DomainError("partition law has empty support")
        return cls(tuple((g, w / total) for g, w in weights.items() if w != 0))

    def probability(self, gamma: OccupationProfile) -> Fraction:
        for g, p in self.support:
            if g == gamma:
                return p
        return Fraction(0)

    def as_dict(self) -> Dict[OccupationProfile, Fraction]:
        return dict(self.support)

    def k_marginal(self) -> Dict[int, Fraction]:
        """Law of gamma(N)"""
        out: Dict[int, Fraction] = {}
        for g, p in self.support:
            out[g.k] = out.get(g.k, Fraction(0)) + p
        return out

    def sample(self, rng: RandomLike, size: int = 1) -> List[OccupationProfile]:
        gen = as_generator(rng)
        probs = np.array([float(p) for _, p in self.support])
        idx = gen.choice(len(self.support), size=size, p=probs / probs.sum())
        return [self.support[i][0] for i in idx]

    def to_json(self) -> List[Dict]:
        return [{"profile": g.to_json(), "probability": str(p)} for g, p in self.support]


def _place(parts: Sequence[int], window: Window, gen: np.random.Generator) -> Configuration:
    """i.i.d. uniform sites carrying the given multiplicities"""
    if not len(parts):
        return Configuration.empty()
    return Configuration.from_arrays(window.uniform_sites(gen, len(parts)), np.asarray(parts, dtype=np.int64))


def sample_occupied_sites(n: int, z: float, window: Window, rng: RandomLike) -> Configuration:
    """n uniform sites in B, each with an independent logarithmic(z) multiplicity"""
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    gen = as_generator(rng)
    if n == 0:
        return Configuration.empty()
    mults = LogarithmicDist(z).sample(gen, n)
    return _place(mults, window, gen)


def partition_law_total_height(m: int, rho_b: Number) -> PartitionLaw:
    """P(gamma | zeta_B = m) = (m!/c(gamma)) rho(B)^gamma(N) / rho(B)^[m]"""
    rho_b = as_fraction(rho_b)
    if rho_b <= 0:
        raise DomainError(f"rho(B) must be positive, got {rho_b}")
    if m == 0:
        return PartitionLaw(((OccupationProfile(), Fraction(1)),))
    norm = rising_factorial(rho_b, m)
    return PartitionLaw(tuple(
        (g, permutation_count(g) * rho_b ** g.k / norm) for g in enumerate_partitions(m)
    ))


def total_height_law_from_profile_weights(m: int, rho_b: Number, z: Number) -> PartitionLaw:
    """
    The same conditional law built from the unconditioned Poisson profile weights
    prod_j (z^j/j rho(B))^gamma(j) / gamma(j)!, normalized over gamma(id) = m.
    """
    z, rho_b = as_fraction(z), as_fraction(rho_b)
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z}")
    weights: Dict[OccupationProfile, Fraction] = {}
    for g in enumerate_partitions(m):
        weight = Fraction(1)
        for j, c in g.counts:
            weight *= (z ** j / j * rho_b) ** c / math.factorial(c)
        weights[g] = weight
    return PartitionLaw.from_weights(weights)


def assert_z_cancellation(m: int, rho_b: Number, z_values: Sequence[Number] = (Fraction(1, 3), Fraction(3, 5))):
    """Raise unless the z-weighted conditional law is the closed form at every z"""
    closed = partition_law_total_height(m, rho_b).as_dict()
    for z in z_values:
        weighted = total_height_law_from_profile_weights(m, rho_b, z).as_dict()
        if weighted != closed:
            raise IdentityCheckError(f"total-height law depends on z at m={m}, rho={rho_b}, z={z}")


def urn_blocks(m: int, rho_b: float, gen: np.random.Generator) -> List[int]:
    """Block sizes of the sequential urn: element i+1 opens a block w.p. rho/(rho+i)"""
    blocks: List[int] = []
    for i in range(m):
        u = gen.random() * (rho_b + i)
        if u < rho_b or not blocks:
            blocks.append(1)
        else:
            idx = int(np.searchsorted(np.cumsum(blocks), u - rho_b, side="right"))
            blocks[min(idx, len(blocks) - 1)] += 1
    return blocks


def sample_total_height(m: int, z: Optional[float], rho_b: float, window: Window, rng: RandomLike) -> Configuration:
    """
    pi^H on B with zeta_B = m. z is accepted for symmetry with the other kernels and
    ignored: conditioning on the total count removes it.
    """
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    if rho_b <= 0:
        raise DomainError(f"rho(B) must be positive, got {rho_b}")
    gen = as_generator(rng)
    return _place(urn_blocks(m, float(rho_b), gen), window, gen)


def partition_law_size_height(m: int, k: int) -> PartitionLaw:
    """P(gamma | zeta_B = m, xi_B = k) = (m!/c(gamma)) / [m k], free of rho(B)"""
    if not 0 <= k <= m or (k == 0) != (m == 0):
        raise DomainError(f"no partition of {m} into {k} blocks")
    if m == 0:
        return PartitionLaw(((OccupationProfile(), Fraction(1)),))
    norm = stirling_cycle(m, k)
    return PartitionLaw(tuple((g, permutation_count(g) / norm) for g in enumerate_partitions(m, k)))


def size_height_from_total_height(m: int, k: int, rho_b: Number) -> PartitionLaw:
    """Total-height law conditioned further on gamma(N) = k"""
    law = partition_law_total_height(m, rho_b)
    return PartitionLaw.from_weights({g: p for g, p in law.support if g.k == k})


def assert_rho_free(m: int, k: int, rho_values: Sequence[Number] = (Fraction(1, 2), 2)):
    expected = partition_law_size_height(m, k).as_dict()
    for rho_b in rho_values:
        if size_height_from_total_height(m, k, rho_b).as_dict() != expected:
            raise IdentityCheckError(f"size-and-height law depends on rho(B) at m={m}, k={k}, rho={rho_b}")


def size_height_blocks(m: int, k: int, gen: np.random.Generator) -> List[int]:
    """
    Urn conditioned on ending with k blocks. Backward pass: element n opens a block
    with probability [n-1 r-1]/[n r] when r blocks remain among elements 1..n.
    Forward pass: every other element joins the block of a uniform earlier element.
    """
    opens = [False] * (m + 1)
    r = k
    for n in range(m, 0, -1):
        if r == 0:
            break
        p_new = stirling_row(n - 1)[r - 1] / stirling_row(n)[r]
        if gen.random() < p_new:
            opens[n] = True
            r -= 1
    owner = [0] * (m + 1)
    blocks: List[int] = []
    for n in range(1, m + 1):
        if opens[n]:
            owner[n] = len(blocks)
            blocks.append(1)
        else:
            owner[n] = owner[int(gen.integers(1, n))]
            blocks[owner[n]] += 1
    return blocks


def sample_size_height(m: int, k: int, window: Window, rng: RandomLike, method: str = "auto") -> Configuration:
    """
    pi^E on B with zeta_B = m and xi_B = k.
    method: "exact" draws from the enumerated law, "sequential" uses the Stirling DP,
    "auto" enumerates up to the enumeration bound.
    """
    if not 0 <= k <= m or (k == 0) != (m == 0):
        raise DomainError(f"no partition of {m} into {k} blocks")
    gen = as_generator(rng)
    if method == "auto":
        method = "exact" if m <= ENUMERATION_BOUND else "sequential"
    if method == "exact":
        parts = partition_law_size_height(m, k).sample(gen, 1)[0].parts()
    elif method == "sequential":
        parts = size_height_blocks(m, k, gen)
    else:
        raise DomainError(f"unknown size-and-height method '{method}'")
    return _place(parts, window, gen)


def _inside_sample(cond: EnsembleCondition, params: ModelParams, rng: RandomLike,
                   ground: Optional[GroundIntensity] = None) -> Configuration:
    rho_b = params.mass(cond.window, ground) if not params.is_empty else 0.0
    if cond.kind == EnsembleKind.SITES:
        if cond.n and params.is_empty:
            raise ConditionMismatchError("occupied-sites kernel with n > 0 needs z in (0, 1)")
        return sample_occupied_sites(cond.n, params.z, cond.window, rng)
    if cond.kind == EnsembleKind.HEIGHT:
        if cond.m and params.is_empty:
            raise ConditionMismatchError("total-height kernel with m > 0 needs a positive ground mass")
        return sample_total_height(cond.m, params.z, rho_b or 1.0, cond.window, rng)
    return sample_size_height(cond.m, cond.k, cond.window, rng)


def kernel_apply(cond: EnsembleCondition, outside: Configuration, params: ModelParams, rng: RandomLike,
                 ground: Optional[GroundIntensity] = None) -> Configuration:
    """Resample the inside of B under the condition, keep the outside configuration untouched"""
    if outside.xi(cond.window) > 0:
        raise ConditionMismatchError(f"outside configuration has atoms inside [{cond.window.lo}, {cond.window.hi})")
    return _inside_sample(cond, params, rng, ground) + outside


def rejection_sample(cond: EnsembleCondition, params: ModelParams, size: int, rng: RandomLike,
                     ground: Optional[GroundIntensity] = None, chunk: int = 20_000,
                     max_draws: int = 50_000_000) -> List[OccupationProfile]:
    """Oracle: draw Poy_{z, w rho} on B and keep the profiles satisfying the condition"""
    if params.is_empty:
        raise DomainError("rejection sampling needs a nonempty process")
    gen = as_generator(rng)
    accepted: List[OccupationProfile] = []
    drawn = 0
    while len(accepted) < size:
        if drawn >= max_draws:
            raise DomainError(f"rejection sampler accepted {len(accepted)} of {size} after {drawn} draws")
        batch = sample_levy_batch(params, cond.window, chunk, gen, ground)
        drawn += chunk
        zeta, xi = batch.zeta(), batch.xi()
        if cond.kind == EnsembleKind.SITES:
            hits = np.flatnonzero(xi == cond.n)
        elif cond.kind == EnsembleKind.HEIGHT:
            hits = np.flatnonzero(zeta == cond.m)
        else:
            hits = np.flatnonzero((zeta == cond.m) & (xi == cond.k))
        for i in hits[: size - len(accepted)]:
            accepted.append(batch.configuration(int(i)).occupation_profile())
    logger.debug(f"📊 rejection oracle kept {size} of {drawn} draws for {cond.to_dict()}")
    return accepted


def kernel_laplace_functional(cond: EnsembleCondition, f: TestFunction, params: ModelParams,
                              ground: Optional[GroundIntensity] = None) -> float:
    """
    E[exp(-mu(f))] under the kernel for a step function f, in closed form:
    sites are uniform so every site contributes an average over B.
    """
    window = cond.window
    if cond.kind == EnsembleKind.SITES:
        if cond.n == 0:
            return 1.0
        z = params.z
        per_site = f.average(lambda v: -np.log1p(-z * np.exp(-v)), window) / params.tau_mass
        return float(per_site ** cond.n)

    law = partition_law_total_height(cond.m, as_fraction(params.mass(window, ground))) \
        if cond.kind == EnsembleKind.HEIGHT else partition_law_size_height(cond.m, cond.k)
    total = 0.0
    for g, p in law.support:
        term = float(p)
        for j, c in g.counts:
            term *= f.average(lambda v, j=j: np.exp(-j * v), window) ** c
        total += term
    return total
