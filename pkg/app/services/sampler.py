"""
Exact samplers for the Polya sum process on a window
Levy (compound Poisson) representation, sequential urn representation,
and the elementary laws they are built from
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import gammaln

from app.core.exceptions import DomainError
from app.core.utils import get_env_float, neg_log1m
from app.models import (
    Configuration,
    ConfigurationBatch,
    GroundIntensity,
    ModelParams,
    OccupationProfile,
    RandomLike,
    Window,
    as_generator,
)

logger = logging.getLogger(__name__)

LEVY_TAIL_TOL = get_env_float("POLYA_LEVY_TAIL_TOL", 1e-12)
PMF_TAIL_TOL = 1e-12


def _check_z(z: float):
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z}")


def negbin_pmf(r: float, z: float, m) -> np.ndarray:
    """
    (1-z)^r z^m r^[m] / m!, evaluated in log space through
    log r^[m] = lgamma(r + m) - lgamma(r).
    """
    _check_z(z)
    if r <= 0:
        raise DomainError(f"negative binomial shape must be positive, got {r}")
    m = np.asarray(m)
    log_pmf = r * math.log1p(-z) + m * math.log(z) + gammaln(r + m) - gammaln(r) - gammaln(m + 1.0)
    out = np.where(m >= 0, np.exp(log_pmf), 0.0)
    return out if out.ndim else float(out)


def _inversion_table(pmf_fn, start: int, tol: float = PMF_TAIL_TOL, chunk: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Support and cumulative sums of a pmf, extended until the cdf reaches 1 - tol"""
    support = np.arange(start, start + chunk)
    pmf = pmf_fn(support)
    while pmf.sum() < 1.0 - tol:
        # past the mode with a vanishing last term: float rounding keeps the sum below 1 - tol
        peak = int(np.argmax(pmf))
        if pmf[peak] > 0 and peak < pmf.size - 1 and pmf[-1] <= pmf[peak] * 1e-20:
            break
        if support.size > 10_000_000:
            logger.warning(f"⚠️ inversion table truncated at {support.size} entries")
            break
        more = np.arange(support[-1] + 1, support[-1] + 1 + chunk)
        support = np.concatenate([support, more])
        pmf = np.concatenate([pmf, pmf_fn(more)])
    return support, np.cumsum(pmf)


def _invert(u: np.ndarray, support: np.ndarray, cdf: np.ndarray, pmf_fn) -> np.ndarray:
    idx = np.searchsorted(cdf, u, side="right")
    out = np.empty(u.shape, dtype=np.int64)
    inside = idx < support.size
    out[inside] = support[idx[inside]]
    # uniforms beyond the tabulated mass: scan forward from the table end
    for pos in np.flatnonzero(~inside):
        value, acc = int(support[-1]), float(cdf[-1])
        while acc <= u[pos]:
            value += 1
            step = float(pmf_fn(np.array([value]))[0])
            if step <= 0.0:
                break
            acc += step
        out[pos] = value
    return out


@dataclass(frozen=True)
class LogarithmicDist:
    """pmf(j) = z^j / (j * (-log(1-z))), j >= 1"""
    z: float

    def __post_init__(self):
        _check_z(self.z)

    def pmf(self, j) -> np.ndarray:
        return stats.logser.pmf(j, self.z)

    @property
    def mean(self) -> float:
        return self.z / (1.0 - self.z) / neg_log1m(self.z)

    def sample(self, rng: RandomLike, size: int = 1) -> np.ndarray:
        """Inversion on cumulative sums"""
        gen = as_generator(rng)
        support, cdf = _inversion_table(self.pmf, start=1)
        return _invert(gen.random(size), support, cdf, self.pmf)


@dataclass(frozen=True)
class NegBinomialDist:
    """Law of zeta_B: shape r = rho(B), parameter z"""
    r: float
    z: float

    def __post_init__(self):
        _check_z(self.z)
        if not self.r > 0:
            raise DomainError(f"negative binomial shape must be positive, got {self.r}")

    def pmf(self, m) -> np.ndarray:
        return negbin_pmf(self.r, self.z, m)

    @property
    def mean(self) -> float:
        return self.r * self.z / (1.0 - self.z)

    def sample(self, rng: RandomLike, size: int = 1) -> np.ndarray:
        """
        Inversion through the exact quantile function. The cdf is the regularized
        incomplete beta, so large shapes (pmf underflowing near 0) stay exact.
        """
        gen = as_generator(rng)
        draws = stats.nbinom.ppf(gen.random(size), self.r, 1.0 - self.z)
        # ppf(0) is -1 by convention
        return np.maximum(draws, 0).astype(np.int64)


def logarithmic_sample(z: float, rng: RandomLike, size: Optional[int] = None):
    """One logarithmic(z) draw, or an array of `size` draws"""
    draws = LogarithmicDist(z).sample(rng, 1 if size is None else size)
    return int(draws[0]) if size is None else draws


def levy_truncation(z: float, rho_b: float, tol: float = LEVY_TAIL_TOL) -> int:
    """
    Smallest J with rho(B) * sum_{j > J} z^j / j < tol, using the bound
    sum_{j > J} z^j / j <= z^(J+1) / ((J+1)(1-z)).
    """
    _check_z(z)
    if rho_b <= 0:
        return 0
    J = 1
    while rho_b * z ** (J + 1) / ((J + 1) * (1.0 - z)) >= tol:
        J += 1
    return J


def levy_rates(params: ModelParams, rho_b: float) -> np.ndarray:
    """Poisson means z^j/j * rho(B) of gamma_B(1..J)"""
    J = levy_truncation(params.z, rho_b)
    j = np.arange(1, J + 1)
    return params.z ** j / j * rho_b


def sample_levy_batch(params: ModelParams, window: Window, size: int, rng: RandomLike,
                      ground: Optional[GroundIntensity] = None) -> ConfigurationBatch:
    """
    N replicas of Poy_{z, w rho} on B via the Levy measure:
    gamma_B(j) ~ Poisson(z^j/j rho(B)) independently, sites i.i.d. uniform.
    """
    gen = as_generator(rng)
    if params.is_empty:
        return ConfigurationBatch(size, window, np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
    rates = levy_rates(params, params.mass(window, ground))
    counts = gen.poisson(rates[None, :], size=(size, rates.size))
    per_replica = counts.sum(axis=1)
    replica = np.repeat(np.arange(size), per_replica)
    mults = np.repeat(np.tile(np.arange(1, rates.size + 1), size), counts.ravel())
    sites = window.uniform_sites(gen, replica.size)
    order = np.lexsort((sites, replica))
    return ConfigurationBatch(size, window, replica[order], sites[order], mults[order].astype(np.int64))


def sample_levy(params: ModelParams, window: Window, rng: RandomLike,
                ground: Optional[GroundIntensity] = None) -> Configuration:
    """One realization of Poy_{z, w rho} restricted to B (Levy representation)"""
    if params.is_empty:
        return Configuration.empty()
    return sample_levy_batch(params, window, 1, rng, ground).configuration(0)


def _urn_placement(m: int, rho_b: float, window: Window, gen: np.random.Generator) -> Configuration:
    sites: List[float] = []
    mults: List[int] = []
    owner: List[int] = []
    for i in range(m):
        if gen.random() * (rho_b + i) < rho_b:
            owner.append(len(sites))
            sites.append(float(window.uniform_sites(gen, 1)[0]))
            mults.append(1)
            continue
        # a uniform earlier point picks site x with weight mu_i({x})
        site = owner[int(gen.integers(0, i))]
        owner.append(site)
        mults[site] += 1
    return Configuration(tuple(zip(sites, mults)))


def sample_urn(params: ModelParams, window: Window, rng: RandomLike,
               ground: Optional[GroundIntensity] = None) -> Configuration:
    """
    One realization via the iterated kernels: m ~ NegBinomial(rho(B), z), then point i+1
    lands on a fresh uniform site w.p. rho(B)/(rho(B)+i), else on site x w.p. mu_i({x})/(rho(B)+i).
    """
    gen = as_generator(rng)
    if params.is_empty:
        return Configuration.empty()
    rho_b = params.mass(window, ground)
    m = int(NegBinomialDist(rho_b, params.z).sample(gen, 1)[0])
    return _urn_placement(m, rho_b, window, gen)


def sample_urn_batch(params: ModelParams, window: Window, size: int, rng: RandomLike,
                     ground: Optional[GroundIntensity] = None) -> ConfigurationBatch:
    gen = as_generator(rng)
    if params.is_empty:
        return ConfigurationBatch(size, window, np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
    rho_b = params.mass(window, ground)
    totals = NegBinomialDist(rho_b, params.z).sample(gen, size)
    configs = [_urn_placement(int(m), rho_b, window, gen) for m in totals]
    return ConfigurationBatch.from_configurations(configs, window)


def sample_poisson_control_batch(params: ModelParams, window: Window, size: int, rng: RandomLike,
                                 ground: Optional[GroundIntensity] = None) -> ConfigurationBatch:
    """Poisson process with the Polya intensity z/(1-z) rho, every multiplicity 1"""
    gen = as_generator(rng)
    counts = gen.poisson(params.intensity(window, ground), size=size)
    replica = np.repeat(np.arange(size), counts)
    sites = window.uniform_sites(gen, replica.size)
    order = np.lexsort((sites, replica))
    return ConfigurationBatch(size, window, replica[order], sites[order], np.ones(replica.size, dtype=np.int64))


@dataclass(frozen=True)
class SumProcessSample:
    """A sampled configuration with its provenance"""
    cfg: Configuration
    provenance: str
    window: Window
    params: ModelParams

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "window": self.window.to_dict(),
            "params": self.params.to_dict(),
            "atoms": self.cfg.to_json(),
        }


SAMPLERS = {"levy": sample_levy, "urn": sample_urn}


def draw_sample(method: str, params: ModelParams, window: Window, rng: RandomLike,
                ground: Optional[GroundIntensity] = None) -> SumProcessSample:
    if method not in SAMPLERS:
        raise DomainError(f"unknown sampler '{method}', expected one of {sorted(SAMPLERS)}")
    if method == "urn" and params.is_empty:
        cfg = Configuration.empty()
    else:
        cfg = SAMPLERS[method](params, window, rng, ground)
    return SumProcessSample(cfg, method, window, params)


@dataclass(frozen=True)
class DiscretePrior:
    """Finite prior over parameter pairs"""
    support: Tuple[ModelParams, ...]
    weights: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.support:
            raise DomainError("prior support must be nonempty")
        weights = self.weights or tuple([1.0 / len(self.support)] * len(self.support))
        if len(weights) != len(self.support):
            raise DomainError("prior weights and support differ in length")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-12):
            raise DomainError(f"prior weights must be nonnegative and sum to 1, got {weights}")
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))

    @classmethod
    def uniform(cls, support: Sequence[ModelParams]) -> 'DiscretePrior':
        return cls(tuple(support))

    def draw(self, gen: np.random.Generator) -> ModelParams:
        return self.support[int(gen.choice(len(self.support), p=np.array(self.weights)))]


def sample_mixed(prior: DiscretePrior, window: Window, rng: RandomLike,
                 ground: Optional[GroundIntensity] = None) -> Tuple[Configuration, ModelParams]:
    """(theta, mu) with theta ~ prior and mu ~ Poy_theta on B"""
    gen = as_generator(rng)
    params = prior.draw(gen)
    return sample_levy(params, window, gen, ground), params


def log_likelihood(profile: OccupationProfile, params: ModelParams, rho_b: float) -> float:
    """
    Exact log-likelihood of an observed occupation profile on a window of ground mass rho(B):
    gamma_B(j) are independent Poisson(z^j/j * w rho(B)); uniform sites carry no information.
    """
    if params.is_empty:
        return 0.0 if profile.k == 0 else -math.inf
    mass = params.w * rho_b
    out = -params.tau_mass * mass
    for j, c in profile.counts:
        out += c * (j * math.log(params.z) - math.log(j) + math.log(mass)) - math.lgamma(c + 1)
    return out
