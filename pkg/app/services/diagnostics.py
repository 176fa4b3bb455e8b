"""
Monte Carlo verification of the defining identities of the Polya sum process
(Campbell integral equation, Palm kernel, Laplace functional) and the
chi-square utilities shared by every statistical check
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.core.exceptions import DegenerateTestError, DomainError
from app.core.parallel import chunk_sizes, map_replicas
from app.models import ConfigurationBatch, GroundIntensity, ModelParams, RandomLike, RandomSource, Window
from app.services.sampler import (
    levy_rates,
    negbin_pmf,
    sample_levy_batch,
    sample_poisson_control_batch,
    sample_urn_batch,
)

logger = logging.getLogger(__name__)

BatchSampler = Callable[..., ConfigurationBatch]

SIGMA_THRESHOLD = 3.0
INTEGRAL_EQUATION_CAP = 0.02
PALM_CAP = 0.02
LAPLACE_CAP = 0.01
POOLING_THRESHOLD = 5.0


class TestFunctionKind(str, Enum):
    STEP_ON_WINDOW = "step"
    SITE_WEIGHT = "site_weight"


@dataclass(frozen=True)
class TestFunction:
    """
    Nonnegative step function: `level` on the sub-window, 0 elsewhere.
    STEP_ON_WINDOW plays the role of f in exp(-mu(f)), SITE_WEIGHT the role of g.
    """
    __test__ = False

    kind: TestFunctionKind
    level: float
    sub: Window

    def __post_init__(self):
        object.__setattr__(self, "kind", TestFunctionKind(self.kind))
        if not (self.level >= 0 and math.isfinite(self.level)):
            raise DomainError(f"test function level must be finite and nonnegative, got {self.level}")

    @classmethod
    def step(cls, level: float, lo: float, hi: float) -> 'TestFunction':
        return cls(TestFunctionKind.STEP_ON_WINDOW, level, Window(lo, hi))

    @classmethod
    def weight(cls, level: float, lo: float, hi: float) -> 'TestFunction':
        return cls(TestFunctionKind.SITE_WEIGHT, level, Window(lo, hi))

    @classmethod
    def zero(cls, window: Window) -> 'TestFunction':
        return cls(TestFunctionKind.STEP_ON_WINDOW, 0.0, window)

    @classmethod
    def one(cls, window: Window) -> 'TestFunction':
        return cls(TestFunctionKind.SITE_WEIGHT, 1.0, window)

    def __call__(self, x) -> np.ndarray:
        return np.where(self.sub.contains(x), self.level, 0.0)

    def average(self, h: Callable[[float], float], window: Window) -> float:
        """(1/|B|) int_B h(f(x)) dx"""
        inside = window.overlap(self.sub.lo, self.sub.hi)
        return float((inside * h(self.level) + (window.length - inside) * h(0.0)) / window.length)

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "level": self.level, "sub": self.sub.to_dict()}


def step_integral(window: Window, mass_per_length: float, *pieces: Tuple[TestFunction, Callable]) -> float:
    """
    int_B prod_i h_i(t_i(x)) rho(dx) for step functions t_i, exact:
    the integrand is constant between consecutive breakpoints.
    """
    cuts = {window.lo, window.hi}
    for t, _ in pieces:
        cuts.update(c for c in (t.sub.lo, t.sub.hi) if window.lo < c < window.hi)
    edges = sorted(cuts)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        value = 1.0
        for t, h in pieces:
            value *= h(float(t(mid)))
        total += value * (hi - lo)
    return mass_per_length * total


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    n: int

    @classmethod
    def exact(cls, value: float) -> 'McEstimate':
        return cls(float(value), 0.0, 0)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class RunningMoments:
    """count/mean/M2 accumulator; merge() combines partial results from independent chunks"""
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values: np.ndarray) -> 'RunningMoments':
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return self
        batch = RunningMoments(int(values.size), float(values.mean()), float(((values - values.mean()) ** 2).sum()))
        return self.merge(batch)

    def merge(self, other: 'RunningMoments') -> 'RunningMoments':
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta ** 2 * self.count * other.count / n
        self.count = n
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    def estimate(self) -> McEstimate:
        se = math.sqrt(self.variance / self.count) if self.count else 0.0
        return McEstimate(self.mean, se, self.count)


@dataclass
class CheckReport:
    name: str
    lhs: McEstimate
    rhs: McEstimate
    difference: float
    pooled_se: float
    relative_error: float
    sigma_threshold: float
    relative_cap: float
    passed: bool
    context: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "difference": self.difference,
            "pooled_se": self.pooled_se,
            "relative_error": self.relative_error,
            "sigma_threshold": self.sigma_threshold,
            "relative_cap": self.relative_cap,
            "passed": self.passed,
            "context": self.context,
        }


def judge(name: str, lhs: McEstimate, rhs: McEstimate, relative_cap: float,
          sigma: float = SIGMA_THRESHOLD, context: Optional[Dict] = None) -> CheckReport:
    """Pass iff |lhs - rhs| <= sigma * pooled se and the relative error is under the cap"""
    diff = abs(lhs.mean - rhs.mean)
    pooled = math.sqrt(lhs.se ** 2 + rhs.se ** 2)
    scale = max(abs(lhs.mean), abs(rhs.mean))
    rel = diff / scale if scale > 0 else 0.0
    passed = diff <= sigma * pooled and rel <= relative_cap
    report = CheckReport(name, lhs, rhs, diff, pooled, rel, sigma, relative_cap, passed, context or {})
    if passed:
        logger.info(f"✅ {name}: lhs={lhs.mean:.6g} rhs={rhs.mean:.6g}")
    else:
        logger.warning(f"❌ {name}: lhs={lhs.mean:.6g} rhs={rhs.mean:.6g} diff={diff:.3g} se={pooled:.3g}")
    return report


def _monte_carlo(values_fn: Callable[[ConfigurationBatch, np.random.Generator], np.ndarray],
                 params: ModelParams, window: Window, size: int, rng: RandomLike,
                 ground: Optional[GroundIntensity], sampler: Optional[BatchSampler]) -> McEstimate:
    """Mean of a per-replica statistic over `size` replicas, sampled in independent chunks"""
    sampler = sampler or sample_levy_batch
    sizes = chunk_sizes(size)

    def work(i: int, src: RandomSource) -> RunningMoments:
        gen = src.generator()
        batch = sampler(params, window, sizes[i], gen, ground)
        return RunningMoments().update(values_fn(batch, gen))

    total = RunningMoments()
    for part in map_replicas(work, rng, len(sizes)):
        total.merge(part)
    return total.estimate()


def _source(rng: RandomLike) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng))
    return RandomSource(int(rng.integers(0, 2 ** 63)))


def estimate_campbell(f: TestFunction, g: TestFunction, params: ModelParams, window: Window, size: int,
                      rng: RandomLike, ground: Optional[GroundIntensity] = None,
                      sampler: Optional[BatchSampler] = None) -> McEstimate:
    """C_P(h) for h(x, mu) = g(x) exp(-mu(f)): mean over replicas of sum_atoms m g(x) exp(-mu(f))"""
    if params.is_empty:
        return McEstimate.exact(0.0)

    def values(batch: ConfigurationBatch, _gen) -> np.ndarray:
        damp = np.exp(-batch.integrate(f))
        if batch.atom_count == 0:
            return np.zeros(batch.size)
        return batch.per_replica(batch.mults * g(batch.sites) * damp[batch.replica])

    return _monte_carlo(values, params, window, size, rng, ground, sampler)


def check_integral_equation(f: TestFunction, g: TestFunction, params: ModelParams, window: Window, size: int,
                            rng: RandomLike, ground: Optional[GroundIntensity] = None,
                            sampler: Optional[BatchSampler] = None,
                            relative_cap: float = INTEGRAL_EQUATION_CAP) -> CheckReport:
    """
    C_P(h) against z E[ int h(x, mu + delta_x) (rho + mu)(dx) ].
    With h = g e^{-mu(f)} the fresh-point term is e^{-mu(f)} int_B g e^{-f} drho, in closed form.
    LHS and RHS use independent streams.
    """
    context = {"params": params.to_dict(), "window": window.to_dict(), "f": f.to_dict(), "g": g.to_dict(), "size": size}
    if params.is_empty:
        zero = McEstimate.exact(0.0)
        return judge("integral_equation", zero, zero, relative_cap, context=context)
    source = _source(rng)
    lhs = estimate_campbell(f, g, params, window, size, source.child(0), ground, sampler)
    mass_per_length = params.mass(window, ground) / window.length
    fresh = step_integral(window, mass_per_length, (g, lambda v: v), (f, lambda v: math.exp(-v)))

    def rhs_values(batch: ConfigurationBatch, _gen) -> np.ndarray:
        damp = np.exp(-batch.integrate(f))
        atoms = np.zeros(batch.size)
        if batch.atom_count:
            atoms = batch.per_replica(batch.mults * g(batch.sites) * np.exp(-f(batch.sites)))
        return params.z * damp * (fresh + atoms)

    rhs = _monte_carlo(rhs_values, params, window, size, source.child(1), ground, sampler)
    return judge("integral_equation", lhs, rhs, relative_cap, context=context)


def check_palm(f: TestFunction, g: TestFunction, params: ModelParams, window: Window, size: int,
               rng: RandomLike, ground: Optional[GroundIntensity] = None,
               sampler: Optional[BatchSampler] = None, relative_cap: float = PALM_CAP) -> CheckReport:
    """
    C_P(h) against nu^1(B) E[g(x) exp(-mu(f) - G f(x))] with x uniform on B and an
    extra geometric multiplicity G, P(G = j) = (1-z) z^(j-1).
    """
    context = {"params": params.to_dict(), "window": window.to_dict(), "f": f.to_dict(), "g": g.to_dict(), "size": size}
    if params.is_empty:
        zero = McEstimate.exact(0.0)
        return judge("palm", zero, zero, relative_cap, context=context)
    source = _source(rng)
    lhs = estimate_campbell(f, g, params, window, size, source.child(0), ground, sampler)
    intensity = params.intensity(window, ground)

    def rhs_values(batch: ConfigurationBatch, gen: np.random.Generator) -> np.ndarray:
        x = window.uniform_sites(gen, batch.size)
        extra = gen.geometric(1.0 - params.z, size=batch.size)
        return intensity * g(x) * np.exp(-batch.integrate(f) - extra * f(x))

    rhs = _monte_carlo(rhs_values, params, window, size, source.child(1), ground, sampler)
    return judge("palm", lhs, rhs, relative_cap, context=context)


def laplace_closed_form(f: TestFunction, params: ModelParams, window: Window,
                        ground: Optional[GroundIntensity] = None) -> float:
    """exp{-int_B log((1 - z e^{-f}) / (1 - z)) drho}"""
    if params.is_empty:
        return 1.0
    z = params.z
    mass_per_length = params.mass(window, ground) / window.length
    integral = step_integral(window, mass_per_length, (f, lambda v: math.log1p(-z * math.exp(-v)) - math.log1p(-z)))
    return math.exp(-integral)


def check_laplace(f: TestFunction, params: ModelParams, window: Window, size: int, rng: RandomLike,
                  ground: Optional[GroundIntensity] = None, sampler: Optional[BatchSampler] = None,
                  relative_cap: float = LAPLACE_CAP) -> CheckReport:
    context = {"params": params.to_dict(), "window": window.to_dict(), "f": f.to_dict(), "size": size}
    rhs = McEstimate.exact(laplace_closed_form(f, params, window, ground))
    if params.is_empty:
        return judge("laplace", McEstimate.exact(1.0), rhs, relative_cap, context=context)
    lhs = _monte_carlo(lambda batch, _gen: np.exp(-batch.integrate(f)), params, window, size, rng, ground, sampler)
    return judge("laplace", lhs, rhs, relative_cap, context=context)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    cells: int

    def to_dict(self) -> Dict:
        return asdict(self)


def pool_cells(observed: np.ndarray, expected: np.ndarray,
               threshold: float = POOLING_THRESHOLD) -> Tuple[np.ndarray, np.ndarray]:
    """Merge adjacent cells, left to right, until each expected count reaches the threshold"""
    obs_out, exp_out = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= threshold:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_out:
            obs_out[-1] += acc_o
            exp_out[-1] += acc_e
        else:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
    return np.array(obs_out), np.array(exp_out)


def chi_square_gof(observed: Sequence[float], expected_pmf: Sequence[float],
                   threshold: float = POOLING_THRESHOLD, ddof: int = 0) -> ChiSquareResult:
    """
    Pearson goodness of fit of observed counts against a pmf on the same cells.
    Mass missing from the pmf becomes a tail cell with no observations; p from the
    exact chi-square tail.
    """
    observed = np.asarray(observed, dtype=float)
    pmf = np.asarray(expected_pmf, dtype=float)
    if observed.shape != pmf.shape:
        raise DomainError(f"observed and pmf differ in shape: {observed.shape} vs {pmf.shape}")
    n = observed.sum()
    tail = max(0.0, 1.0 - pmf.sum())
    expected = n * np.append(pmf, tail)
    observed = np.append(observed, 0.0)
    obs, exp = pool_cells(observed, expected, threshold)
    if obs.size < 2:
        raise DegenerateTestError("chi-square test has a single cell after pooling")
    statistic = float(((obs - exp) ** 2 / exp).sum())
    dof = obs.size - 1 - ddof
    return ChiSquareResult(statistic, dof, float(stats.chi2.sf(statistic, dof)), int(obs.size))


def chi_square_two_sample(a: Sequence[Hashable], b: Sequence[Hashable],
                          threshold: float = POOLING_THRESHOLD) -> ChiSquareResult:
    """Homogeneity of two samples of categorical outcomes, sparse categories pooled"""
    categories = sorted(set(a) | set(b))
    index = {c: i for i, c in enumerate(categories)}
    table = np.zeros((2, len(categories)))
    for row, sample in enumerate((a, b)):
        for value in sample:
            table[row, index[value]] += 1

    # pool columns on the smaller expected row count
    expected_min = table.sum(axis=0) * min(table.sum(axis=1)) / table.sum()
    pooled: List[np.ndarray] = []
    acc = np.zeros(2)
    acc_e = 0.0
    for col, e in zip(table.T, expected_min):
        acc = acc + col
        acc_e += e
        if acc_e >= threshold:
            pooled.append(acc)
            acc, acc_e = np.zeros(2), 0.0
    if acc.sum() > 0:
        if pooled:
            pooled[-1] = pooled[-1] + acc
        else:
            pooled.append(acc)
    if len(pooled) < 2:
        raise DegenerateTestError("two-sample test has a single category after pooling")
    statistic, p_value, dof, _ = stats.chi2_contingency(np.array(pooled).T, correction=False)
    return ChiSquareResult(float(statistic), int(dof), float(p_value), len(pooled))


def _gof_entry(name: str, observed: np.ndarray, pmf: np.ndarray, alpha: float, ddof: int = 0) -> Dict:
    result = chi_square_gof(observed, pmf, ddof=ddof)
    passed = result.p_value > alpha
    (logger.info if passed else logger.warning)(f"{'✅' if passed else '❌'} {name}: p={result.p_value:.4g}")
    return {"name": name, **result.to_dict(), "alpha": alpha, "passed": passed}


def distribution_check(params: ModelParams, window: Window, size: int, rng: RandomLike,
                       ground: Optional[GroundIntensity] = None, alpha: float = 0.01,
                       urn_size: Optional[int] = None) -> List[Dict]:
    """
    Goodness of fit of the Levy sampler's window statistics against their exact laws,
    plus a two-sample comparison of the Levy and urn samplers.
    """
    if params.is_empty:
        raise DomainError("distribution checks need a nonempty process")
    source = _source(rng)
    rho_b = params.mass(window, ground)
    z = params.z
    batch = sample_levy_batch(params, window, size, source.child(0), ground)
    zeta, xi = batch.zeta(), batch.xi()
    reports = []

    support = np.arange(zeta.max() + 1)
    reports.append(_gof_entry("zeta_negative_binomial", np.bincount(zeta, minlength=support.size),
                              negbin_pmf(rho_b, z, support), alpha))
    support = np.arange(xi.max() + 1)
    reports.append(_gof_entry("xi_poisson", np.bincount(xi, minlength=support.size),
                              stats.poisson.pmf(support, params.tau_mass * rho_b), alpha))
    if batch.atom_count:
        mults = batch.mults
        support = np.arange(1, mults.max() + 1)
        reports.append(_gof_entry("multiplicity_logarithmic", np.bincount(mults, minlength=support.size + 1)[1:],
                                  stats.logser.pmf(support, z), alpha))

    rates = levy_rates(params, rho_b)
    g1, g2 = batch.profile_counts(1), batch.profile_counts(2)
    s1, s2 = np.arange(g1.max() + 1), np.arange(g2.max() + 1)
    joint = np.zeros((s1.size, s2.size))
    np.add.at(joint, (g1, g2), 1)
    product = np.outer(stats.poisson.pmf(s1, rates[0]), stats.poisson.pmf(s2, rates[1] if rates.size > 1 else 0.0))
    reports.append(_gof_entry("profile_1_2_independent_poisson", joint.ravel(), product.ravel(), alpha))

    urn = sample_urn_batch(params, window, urn_size or size, source.child(1), ground)
    key = lambda b: list(zip(b.xi().tolist(), b.zeta().tolist(), b.profile_counts(1).tolist()))
    result = chi_square_two_sample(key(batch), key(urn))
    passed = result.p_value > alpha
    (logger.info if passed else logger.warning)(f"{'✅' if passed else '❌'} levy_vs_urn: p={result.p_value:.4g}")
    reports.append({"name": "levy_vs_urn_xi_zeta_profile1", **result.to_dict(), "alpha": alpha, "passed": passed})
    return reports


DEFAULT_GRID: Tuple[Tuple[float, float], ...] = tuple(
    (z, rho) for z in (0.3, 0.5, 0.7) for rho in (0.5, 1.0, 2.0)
)


def grid_test_functions(window: Window) -> Tuple[TestFunction, TestFunction]:
    """f = log 2 on the left half of B, g = 1 on the right three quarters"""
    lo, length = window.lo, window.length
    f = TestFunction.step(math.log(2.0), lo, lo + length / 2)
    g = TestFunction.weight(1.0, lo + length / 4, window.hi)
    return f, g


def verify_grid(grid: Sequence[Tuple[float, float]] = DEFAULT_GRID, size: int = 1_000_000,
                rng: RandomLike = 0, control: Tuple[float, float] = (0.5, 2.0)) -> Dict:
    """
    Integral equation, Palm and Laplace checks on B = [0, rho(B)) with w = 1 for every
    (z, rho(B)) of the grid, plus the Poisson negative control which must fail.
    """
    source = _source(rng)
    checks: List[CheckReport] = []
    for i, (z, rho_b) in enumerate(grid):
        params = ModelParams(z, 1.0)
        window = Window(0.0, rho_b)
        f, g = grid_test_functions(window)
        cell = source.child(i)
        logger.info(f"🚀 identity checks at z={z}, rho(B)={rho_b}, N={size}")
        checks.append(check_integral_equation(f, g, params, window, size, cell.child(0)))
        checks.append(check_palm(f, g, params, window, size, cell.child(1)))
        checks.append(check_laplace(f, params, window, size, cell.child(2)))

    z, rho_b = control
    window = Window(0.0, rho_b)
    f, g = grid_test_functions(window)
    negative = check_integral_equation(f, g, ModelParams(z, 1.0), window, size, source.child(len(grid)),
                                       sampler=sample_poisson_control_batch)
    negative.name = "integral_equation_poisson_control"
    control_detected = not negative.passed
    if control_detected:
        logger.info("✅ Poisson negative control rejected")
    else:
        logger.error("❌ Poisson negative control passed the integral equation check")
    return {
        "checks": checks,
        "negative_control": negative,
        "control_detected": control_detected,
        "passed": all(c.passed for c in checks) and control_detected,
    }
