"""
Boundary parameter recovery along the window chain B_k = [0, k*delta),
the entropy rate function of rescaled occupation profiles and its constrained minimizers,
and the concentration experiments built on them
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, stats
from scipy.special import logsumexp, rel_entr

from app.core.exceptions import ConvergenceError, DomainError, IdentityCheckError, InfeasibleStatisticsError
from app.core.parallel import map_replicas
from app.core.utils import neg_log1m
from app.models import (
    Configuration,
    GroundIntensity,
    ModelParams,
    OccupationProfile,
    RandomLike,
    RandomSource,
    Window,
)
from app.services.diagnostics import TestFunction, laplace_closed_form
from app.services.ensembles import (
    EnsembleCondition,
    EnsembleKind,
    kernel_laplace_functional,
    sample_size_height,
    sample_total_height,
    size_height_blocks,
    urn_blocks,
)
from app.services.sampler import DiscretePrior, levy_truncation, log_likelihood, sample_levy

logger = logging.getLogger(__name__)

Z_LOWER = 1e-300
Z_UPPER = 1.0 - 2.0 ** -53
BISECT_XTOL = 1e-15
NEWTON_MAX_ITER = 200
NEWTON_TOL = 1e-13


@dataclass(frozen=True)
class LimitStats:
    """Normalized window counts on B_k"""
    k: int
    rho_b: float
    zeta: int
    xi: int
    u: float
    v: float
    w_hat: float

    @property
    def z_hat(self) -> float:
        return recover_z_height(self)

    def to_row(self) -> Dict:
        return {"k": self.k, "u_k": self.u, "v_k": self.v, "w_hat_k": self.w_hat, "z_hat_k": self.z_hat}


def limit_stats(cfg: Configuration, z: float, K: int, delta: float = 1.0,
                ground: Optional[GroundIntensity] = None, ks: Optional[Sequence[int]] = None) -> List[LimitStats]:
    """
    U_k = zeta/rho(B_k), V_k = xi/rho(B_k), W_k = xi/(-log(1-z) rho(B_k)) for k in ks (default 1..K).
    rho is the unscaled ground measure.
    """
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z}")
    ground = ground or GroundIntensity()
    ks = list(ks) if ks is not None else list(range(1, K + 1))
    sites, mults = cfg.sites, cfg.multiplicities
    edges = np.array([Window.chain(k, delta).hi for k in ks])
    cut = np.searchsorted(sites, edges, side="left")
    cum_zeta = np.concatenate([[0], np.cumsum(mults)])
    tau = neg_log1m(z)
    out = []
    for k, c in zip(ks, cut):
        rho_b = ground.mass(Window.chain(k, delta))
        zeta, xi = int(cum_zeta[c]), int(c)
        out.append(LimitStats(k, rho_b, zeta, xi, zeta / rho_b, xi / rho_b, xi / (tau * rho_b)))
    return out


def limit_stats_frame(series: Sequence[LimitStats]) -> pd.DataFrame:
    return pd.DataFrame([s.to_row() for s in series], columns=["k", "u_k", "v_k", "w_hat_k", "z_hat_k"])


def recover_w_occupied(stats_k: LimitStats, z: float) -> Tuple[float, float]:
    """(w_hat, standard error) from the occupied-site count, xi ~ Poisson(w tau rho)"""
    tau = neg_log1m(z)
    w_hat = stats_k.xi / (tau * stats_k.rho_b)
    return w_hat, math.sqrt(stats_k.xi) / (tau * stats_k.rho_b)


def recover_z_height(stats_k: LimitStats) -> float:
    """Z solving Z/(1-Z) = U"""
    if stats_k.u < 0:
        raise DomainError(f"u must be nonnegative, got {stats_k.u}")
    return stats_k.u / (1.0 + stats_k.u)


def forward_map(z: float, w: float) -> Tuple[float, float]:
    """(u, v) = (w z/(1-z), -w log(1-z))"""
    if z == 0 and w == 0:
        return 0.0, 0.0
    params = ModelParams(z, w)
    return params.w * params.z / (1.0 - params.z), params.w * neg_log1m(params.z)


def _ratio(z):
    """(z/(1-z)) / (-log(1-z)), increasing from 1 to infinity on (0, 1)"""
    z = np.asarray(z, dtype=float)
    return z / (1.0 - z) / -np.log1p(-z)


@lru_cache(maxsize=1)
def _assert_ratio_monotone() -> bool:
    grid = np.concatenate([np.logspace(-12, -1, 200), np.linspace(0.1, 0.999999, 2000)])
    if not np.all(np.diff(_ratio(grid)) > 0):
        raise IdentityCheckError("(z/(1-z))/(-log(1-z)) is not increasing on the check grid")
    return True


def recover_zw_size_height(u: float, v: float) -> Tuple[float, float]:
    """Unique (z, w) with w z/(1-z) = u and -w log(1-z) = v; (0, 0) for u = v = 0"""
    if u == 0 and v == 0:
        return 0.0, 0.0
    if not (u > 0 and v > 0) or not u > v:
        raise InfeasibleStatisticsError(f"statistics (u, v) = ({u}, {v}) need u > v > 0 or u = v = 0")
    _assert_ratio_monotone()
    target = u / v
    lo_gap = float(_ratio(Z_LOWER)) - target
    hi_gap = float(_ratio(Z_UPPER)) - target
    if hi_gap <= 0:
        raise InfeasibleStatisticsError(f"u/v = {target} beyond the representable range")
    if lo_gap >= 0:
        z = Z_LOWER
    else:
        z = optimize.bisect(lambda t: float(_ratio(t)) - target, Z_LOWER, Z_UPPER, xtol=BISECT_XTOL, maxiter=400)
    return z, v / neg_log1m(z)


@dataclass(frozen=True)
class RateMeasure:
    """kappa(1..J) on the positive integers"""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(x) for x in self.values)
        if any(x < 0 or math.isnan(x) for x in values):
            raise DomainError("rate measure must be nonnegative")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values: np.ndarray) -> 'RateMeasure':
        return cls(tuple(np.asarray(values, dtype=float).tolist()))

    @property
    def J(self) -> int:
        return len(self.values)

    def array(self, length: Optional[int] = None) -> np.ndarray:
        out = np.asarray(self.values, dtype=float)
        if length is None or length == out.size:
            return out
        if length < out.size:
            return out[:length]
        return np.concatenate([out, np.zeros(length - out.size)])

    @property
    def mass(self) -> float:
        return float(np.sum(self.values))

    @property
    def first_moment(self) -> float:
        return float(np.dot(np.arange(1, self.J + 1), self.values))

    def l1_distance(self, other: 'RateMeasure') -> float:
        n = max(self.J, other.J)
        return float(np.abs(self.array(n) - other.array(n)).sum())

    def to_dict(self) -> Dict:
        return {"J": self.J, "values": list(self.values), "mass": self.mass, "first_moment": self.first_moment}


def tau(z: float, J: int) -> np.ndarray:
    """tau_z(j) = z^j/j for j = 1..J"""
    j = np.arange(1, J + 1)
    return z ** j / j


def rate_function(kappa: RateMeasure, z: float) -> float:
    """
    I(kappa; tau_z) = sum_j tau_j (f_j log f_j - f_j + 1), f = kappa/tau, plus the tau mass
    beyond the support of kappa (f = 0 there).
    """
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z}")
    t = tau(z, kappa.J)
    k = kappa.array()
    inside = float(np.sum(rel_entr(k, t) - k + t))
    tail = max(0.0, neg_log1m(z) - float(t.sum()))
    return inside + tail


def default_support(z: float) -> int:
    return max(1, levy_truncation(z, 1.0))


def analytic_minimizer(u: float, v: Optional[float] = None, z_ref: Optional[float] = None,
                       J: Optional[int] = None) -> RateMeasure:
    """
    kappa = w sum_j z^j/j delta_j with (z, w) from the inverse map, or z = u/(1+u), w = 1
    without the site constraint. z_ref does not move the minimizer.
    """
    if u < 0:
        raise DomainError(f"u must be nonnegative, got {u}")
    if v is None:
        z, w = u / (1.0 + u), 1.0
    else:
        z, w = recover_zw_size_height(u, v)
    if z == 0:
        return RateMeasure.from_array(np.zeros(J or 1))
    return RateMeasure.from_array(w * tau(z, J or default_support(z)))


@dataclass(frozen=True)
class MinimizerResult:
    kappa: RateMeasure
    value: float
    iterations: int
    multipliers: Tuple[float, float]

    def to_dict(self) -> Dict:
        return {
            "kappa": self.kappa.to_dict(),
            "I_value": self.value,
            "iterations": self.iterations,
            "multipliers": list(self.multipliers),
        }


def numeric_minimizer(u: float, v: Optional[float] = None, z_ref: float = 0.5, J: Optional[int] = None) -> MinimizerResult:
    """
    Minimize I(kappa; tau_{z_ref}) over kappa in [0, inf)^J with sum j kappa_j = u (and sum kappa_j = v).
    The minimizer has the tilted form kappa_j = tau_j exp(a j + b); (a, b) minimize the convex dual
    D(a, b) = sum tau_j exp(a j + b) - a u - b v, solved by damped Newton. Without v, b = 0.
    """
    if not 0 < z_ref < 1:
        raise DomainError(f"z_ref must lie in (0, 1), got {z_ref}")
    if u < 0:
        raise DomainError(f"u must be nonnegative, got {u}")
    if v is not None:
        if u == 0 and v == 0:
            zeros = RateMeasure.from_array(np.zeros(J or 1))
            return MinimizerResult(zeros, rate_function(zeros, z_ref), 0, (0.0, 0.0))
        recover_zw_size_height(u, v)
    elif u == 0:
        zeros = RateMeasure.from_array(np.zeros(J or 1))
        return MinimizerResult(zeros, rate_function(zeros, z_ref), 0, (0.0, 0.0))
    if J is None:
        z_star = recover_zw_size_height(u, v)[0] if v is not None else u / (1.0 + u)
        J = max(default_support(z_ref), default_support(z_star))

    t = tau(z_ref, J)
    j = np.arange(1, J + 1, dtype=float)
    with_sites = v is not None
    target = np.array([u, v]) if with_sites else np.array([u])

    def primal(x: np.ndarray) -> np.ndarray:
        b = x[1] if with_sites else 0.0
        return t * np.exp(x[0] * j + b)

    def dual(x: np.ndarray) -> float:
        return float(primal(x).sum() - np.dot(x, target))

    x = np.zeros(2 if with_sites else 1)
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        kappa = primal(x)
        grad = np.array([np.dot(j, kappa) - u] + ([kappa.sum() - v] if with_sites else []))
        if np.max(np.abs(grad)) <= NEWTON_TOL * (1.0 + u):
            break
        if with_sites:
            hess = np.array([[np.dot(j * j, kappa), np.dot(j, kappa)],
                             [np.dot(j, kappa), kappa.sum()]])
        else:
            hess = np.array([[np.dot(j * j, kappa)]])
        step = np.linalg.solve(hess, -grad)
        current = dual(x)
        slope = float(np.dot(grad, step))
        scale = 1.0
        while scale > 1e-12:
            candidate = x + scale * step
            value = dual(candidate)
            if np.isfinite(value) and value <= current + 1e-4 * scale * slope:
                break
            scale *= 0.5
        x = x + scale * step
    else:
        raise ConvergenceError(f"Newton solve for (u, v) = ({u}, {v}) did not converge in {NEWTON_MAX_ITER} iterations")

    kappa = RateMeasure.from_array(primal(x))
    multipliers = (float(x[0]), float(x[1]) if with_sites else 0.0)
    logger.debug(f"📊 minimizer for u={u}, v={v}, z_ref={z_ref}: {iteration} Newton steps")
    return MinimizerResult(kappa, rate_function(kappa, z_ref), iteration, multipliers)


def _log_likelihood(statistic: str, profile: OccupationProfile, params: ModelParams, rho_b: float) -> float:
    if statistic == "profile":
        return log_likelihood(profile, params, rho_b)
    if params.is_empty:
        return 0.0 if profile.k == 0 else -math.inf
    mass = params.w * rho_b
    if statistic == "sites":
        return float(stats.poisson.logpmf(profile.k, params.tau_mass * mass))
    if statistic == "height":
        return float(stats.nbinom.logpmf(profile.m, mass, 1.0 - params.z))
    raise DomainError(f"unknown statistic '{statistic}', expected profile, sites or height")


def posterior(prior: DiscretePrior, profile: OccupationProfile, rho_b: float, statistic: str = "profile") -> np.ndarray:
    """Exact posterior weights over the prior support given the window statistic"""
    with np.errstate(divide="ignore"):
        log_prior = np.log(np.array(prior.weights))
    log_post = log_prior + np.array([_log_likelihood(statistic, profile, p, rho_b) for p in prior.support])
    return np.exp(log_post - logsumexp(log_post))


def _checkpoints(K: int) -> List[int]:
    return sorted({max(1, K // 8), max(1, K // 4), max(1, K // 2), K})


def posterior_concentration_experiment(prior: DiscretePrior, K: int, replicas: int, rng: RandomLike,
                                       delta: float = 1.0, statistic: str = "profile",
                                       ground: Optional[GroundIntensity] = None) -> Dict:
    """
    Draw theta from the prior and mu from Poy_theta on B_K, then report the posterior mass
    on the true theta from the statistics of mu on B_k at several chain lengths k.
    """
    ground = ground or GroundIntensity()
    ks = _checkpoints(K)
    window = Window.chain(K, delta)

    def work(i: int, src: RandomSource) -> List[float]:
        gen = src.generator()
        truth = int(gen.choice(len(prior.support), p=np.array(prior.weights)))
        cfg = sample_levy(prior.support[truth], window, gen, ground)
        masses = []
        for k in ks:
            sub = Window.chain(k, delta)
            weights = posterior(prior, cfg.occupation_profile(sub), ground.mass(sub), statistic)
            masses.append(float(weights[truth]))
        return masses

    logger.info(f"🚀 posterior concentration: {replicas} replicas, K={K}, statistic={statistic}")
    masses = np.array(map_replicas(work, rng, replicas))
    rows = []
    for col, k in enumerate(ks):
        column = masses[:, col]
        rows.append({
            "k": k,
            "rho_b": ground.mass(Window.chain(k, delta)),
            "median_mass_on_truth": float(np.median(column)),
            "mean_mass_on_truth": float(np.mean(column)),
            "quantile_05": float(np.quantile(column, 0.05)),
        })
    final = rows[-1]["median_mass_on_truth"]
    logger.info(f"📊 median posterior mass on truth at K={K}: {final:.4f}")
    return {
        "prior": {"support": [p.to_dict() for p in prior.support], "weights": list(prior.weights)},
        "statistic": statistic,
        "K": K,
        "replicas": replicas,
        "checkpoints": rows,
    }


BOUNDARY_TOLERANCES = {"sites_w_rel": 0.05, "height_z_abs": 0.05, "both_z_rel": 0.05, "both_w_rel": 0.05}


def _recover(ensemble: EnsembleKind, stats_k: LimitStats, params: ModelParams) -> Dict:
    if ensemble == EnsembleKind.SITES:
        w_hat, se = recover_w_occupied(stats_k, params.z)
        ok = abs(w_hat - params.w) <= BOUNDARY_TOLERANCES["sites_w_rel"] * params.w
        return {"w_hat": w_hat, "se": se, "within": ok}
    if ensemble == EnsembleKind.HEIGHT:
        z_hat = recover_z_height(stats_k)
        return {"z_hat": z_hat, "within": abs(z_hat - params.z) <= BOUNDARY_TOLERANCES["height_z_abs"]}
    try:
        z_hat, w_hat = recover_zw_size_height(stats_k.u, stats_k.v)
    except InfeasibleStatisticsError:
        return {"z_hat": None, "w_hat": None, "within": False}
    ok = (abs(z_hat - params.z) <= BOUNDARY_TOLERANCES["both_z_rel"] * params.z
          and abs(w_hat - params.w) <= BOUNDARY_TOLERANCES["both_w_rel"] * params.w)
    return {"z_hat": z_hat, "w_hat": w_hat, "within": ok}


def boundary_recovery_experiment(ensemble: str, params: ModelParams, K: int, delta: float, replicas: int,
                                 rng: RandomLike, ground: Optional[GroundIntensity] = None,
                                 required_fraction: float = 0.95) -> Dict:
    """
    Sample Poy_{z, w rho} on B_K per replica and recover the boundary parameters of the
    chosen ensemble from the statistics on B_K. The chain series of replica 0 is kept.
    """
    ensemble = EnsembleKind(ensemble)
    if params.is_empty:
        raise DomainError("boundary recovery needs a nonempty process")
    if ensemble == EnsembleKind.HEIGHT and params.w != 1.0:
        logger.warning(f"⚠️ total-height recovery assumes w = 1, got w = {params.w}")
    window = Window.chain(K, delta)

    def work(i: int, src: RandomSource) -> Tuple[Dict, Optional[List[LimitStats]]]:
        cfg = sample_levy(params, window, src, ground)
        series = limit_stats(cfg, params.z, K, delta, ground)
        return _recover(ensemble, series[-1], params), (series if i == 0 else None)

    logger.info(f"🚀 boundary recovery ({ensemble.value}): {replicas} replicas on B_{K}")
    results = map_replicas(work, rng, replicas)
    estimates = [r for r, _ in results]
    series = results[0][1] if results else []
    fraction = float(np.mean([e["within"] for e in estimates])) if estimates else 0.0
    summary: Dict = {"fraction_within": fraction, "required_fraction": required_fraction,
                     "passed": fraction >= required_fraction}
    for key in ("w_hat", "z_hat"):
        values = [e[key] for e in estimates if e.get(key) is not None]
        if values:
            summary[f"{key}_mean"] = float(np.mean(values))
            summary[f"{key}_sd"] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    (logger.info if summary["passed"] else logger.warning)(
        f"{'✅' if summary['passed'] else '❌'} {ensemble.value}: {fraction:.3f} of replicas within tolerance")
    return {
        "ensemble": ensemble.value,
        "params": params.to_dict(),
        "K": K,
        "delta": delta,
        "replicas": replicas,
        "tolerances": BOUNDARY_TOLERANCES,
        "summary": summary,
        "series": limit_stats_frame(series),
    }


def occupied_sites_limit(params: ModelParams, ks: Sequence[int], f: TestFunction, delta: float = 1.0,
                         ground: Optional[GroundIntensity] = None) -> List[Dict]:
    """
    Laplace functional of the occupied-sites kernel on B_k with n_k = round(w tau rho(B_k))
    sites, against Poy_{z, w rho} on B_k, for f supported in a fixed bounded set.
    """
    ground = ground or GroundIntensity()
    rows = []
    for k in ks:
        window = Window.chain(k, delta)
        if not window.contains_window(f.sub):
            raise DomainError(f"test function support must lie in B_{k}")
        n_k = int(round(params.w * params.tau_mass * ground.mass(window)))
        cond = EnsembleCondition.occupied_sites(n_k, window)
        kernel = kernel_laplace_functional(cond, f, params, ground)
        limit = laplace_closed_form(f, params, window, ground)
        rows.append({"k": k, "n_k": n_k, "kernel": kernel, "limit": limit, "abs_error": abs(kernel - limit)})
    return rows


def _kernel_limit_rows(draw, counts, ks: Sequence[int], f: TestFunction, limit: ModelParams, delta: float,
                       replicas: int, rng: RandomLike, ground: GroundIntensity) -> List[Dict]:
    rows = []
    for idx, k in enumerate(ks):
        window = Window.chain(k, delta)
        if not window.contains_window(f.sub):
            raise DomainError(f"test function support must lie in B_{k}")
        rho_b = ground.mass(window)
        sizes = counts(rho_b)
        if sizes is None:
            logger.debug(f"no admissible condition on B_{k}, skipped")
            continue

        def work(i: int, src: RandomSource) -> float:
            return math.exp(-draw(sizes, rho_b, window, src).integrate(f))

        values = np.asarray(map_replicas(work, _child(rng, idx), replicas))
        estimate = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf
        target = laplace_closed_form(f, limit, window, ground)
        rows.append({"k": k, "rho_b": rho_b, "m_k": sizes[0], "k_k": sizes[1], "kernel": estimate, "se": se,
                     "limit": target, "abs_error": abs(estimate - target)})
    return rows


def total_height_limit(u: float, ks: Sequence[int], f: TestFunction, replicas: int, rng: RandomLike,
                       delta: float = 1.0, ground: Optional[GroundIntensity] = None) -> List[Dict]:
    """
    Monte Carlo Laplace functional of the total-height kernel on B_k with m_k = round(u rho(B_k)),
    against Poy_{z, rho} with z = u/(1+u).
    """
    if u <= 0:
        raise DomainError(f"u must be positive, got {u}")
    limit = ModelParams(u / (1.0 + u), 1.0)

    def counts(rho_b: float):
        return int(round(u * rho_b)), None

    def draw(sizes, rho_b, window, src):
        return sample_total_height(sizes[0], None, rho_b, window, src)

    return _kernel_limit_rows(draw, counts, ks, f, limit, delta, replicas, rng, ground or GroundIntensity())


def size_height_limit(u: float, v: float, ks: Sequence[int], f: TestFunction, replicas: int, rng: RandomLike,
                      delta: float = 1.0, ground: Optional[GroundIntensity] = None) -> List[Dict]:
    """
    Monte Carlo Laplace functional of the size-and-height kernel on B_k with
    (m_k, k_k) = round((u, v) rho(B_k)), against Poy_{z, w rho} with (z, w) from the inverse map.
    Windows where no partition of m_k into k_k blocks exists are skipped.
    """
    z, w = recover_zw_size_height(u, v)
    if z == 0:
        raise DomainError("(u, v) = (0, 0) has no nontrivial limit")
    limit = ModelParams(z, w)

    def counts(rho_b: float):
        m, k = int(round(u * rho_b)), int(round(v * rho_b))
        if not 0 <= k <= m or (k == 0) != (m == 0):
            return None
        return m, k

    def draw(sizes, rho_b, window, src):
        return sample_size_height(sizes[0], sizes[1], window, src, method="sequential")

    return _kernel_limit_rows(draw, counts, ks, f, limit, delta, replicas, rng, ground or GroundIntensity())


def _profile_tv(parts: Sequence[int], rho_b: float, kappa: RateMeasure) -> float:
    profile = OccupationProfile.from_parts(parts)
    n = max(kappa.J, profile.largest_part)
    return 0.5 * float(np.abs(profile.vector(n) / rho_b - kappa.array(n)).sum())


def profile_concentration(u: float, v: Optional[float], rho_values: Sequence[float], replicas: int,
                          rng: RandomLike) -> Dict:
    """
    Mean total variation between gamma_B/rho(B) and the minimizer kappa under the conditional
    law given zeta_B = round(u rho(B)) (and xi_B = round(v rho(B))), sampled exactly.
    """
    kappa = analytic_minimizer(u, v)
    rows = []
    for idx, rho_b in enumerate(sorted(rho_values)):
        m = int(round(u * rho_b))
        k = int(round(v * rho_b)) if v is not None else None
        if k is not None and (not 0 <= k <= m or (k == 0) != (m == 0)):
            raise DomainError(f"no partition of {m} into {k} blocks at rho(B) = {rho_b}")

        def work(i: int, src: RandomSource) -> float:
            gen = src.generator()
            parts = urn_blocks(m, rho_b, gen) if k is None else size_height_blocks(m, k, gen)
            return _profile_tv(parts, rho_b, kappa)

        distances = map_replicas(work, _child(rng, idx), replicas)
        rows.append({"rho_b": rho_b, "m": m, "k": k, "mean_tv": float(np.mean(distances))})
    monotone = all(a["mean_tv"] > b["mean_tv"] for a, b in zip(rows, rows[1:]))
    (logger.info if monotone else logger.warning)(
        f"{'✅' if monotone else '❌'} profile concentration at rho in {sorted(rho_values)}")
    return {"u": u, "v": v, "kappa": kappa.to_dict(), "rows": rows, "monotone": monotone}


def _child(rng: RandomLike, index: int) -> RandomLike:
    if isinstance(rng, RandomSource):
        return rng.child(index)
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng)).child(index)
    return rng
