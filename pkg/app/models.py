"""
Domain models for the Polya sum process toolkit
Windows, parameters, configurations, occupation profiles and random sources
"""
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import DomainError
from app.core.utils import neg_log1m

ArrayFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Window:
    """Half-open interval [lo, hi) on the half-line"""
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"window bounds must be finite: [{self.lo}, {self.hi})")
        if not self.lo < self.hi:
            raise DomainError(f"window must be nonempty: [{self.lo}, {self.hi})")
        if self.lo < 0:
            raise DomainError(f"window must lie on the half-line: [{self.lo}, {self.hi})")

    @classmethod
    def chain(cls, k: int, delta: float = 1.0) -> 'Window':
        """B_k = [0, k*delta) of the nested window chain"""
        if k < 1:
            raise DomainError(f"chain index must be >= 1, got {k}")
        return cls(0.0, k * delta)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x):
        """Membership test, works on scalars and arrays"""
        return (np.asarray(x) >= self.lo) & (np.asarray(x) < self.hi)

    def contains_window(self, other: 'Window') -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def overlap(self, lo: float, hi: float) -> float:
        """Length of [lo, hi) ∩ self"""
        return max(0.0, min(hi, self.hi) - max(lo, self.lo))

    def uniform_sites(self, rng: np.random.Generator, size: int) -> np.ndarray:
        sites = rng.uniform(self.lo, self.hi, size)
        # rounding in lo + (hi - lo) * U may land exactly on hi
        return np.minimum(sites, np.nextafter(self.hi, self.lo))

    def to_dict(self) -> Dict[str, float]:
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class GroundIntensity:
    """rho = scale * Lebesgue on [0, inf)"""
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"ground intensity scale must be positive, got {self.scale}")

    def mass(self, window: Window) -> float:
        return self.scale * window.length


@dataclass(frozen=True)
class ModelParams:
    """
    Parameter pair (z, w) of Poy_{z, w*rho}.
    (0, 0) encodes the empty process delta_0.
    """
    z: float
    w: float

    def __post_init__(self):
        if self.z == 0 and self.w == 0:
            return
        if not 0 < self.z < 1:
            raise DomainError(f"z must lie in (0, 1), got {self.z}")
        if not (self.w > 0 and math.isfinite(self.w)):
            raise DomainError(f"w must be positive, got {self.w}")

    @classmethod
    def empty(cls) -> 'ModelParams':
        return cls(0.0, 0.0)

    @property
    def is_empty(self) -> bool:
        return self.z == 0 and self.w == 0

    @property
    def tau_mass(self) -> float:
        """tau_z(N) = -log(1 - z)"""
        return 0.0 if self.is_empty else neg_log1m(self.z)

    def mass(self, window: Window, ground: Optional[GroundIntensity] = None) -> float:
        """rho(B) of the scaled ground measure w * rho"""
        ground = ground or GroundIntensity()
        return self.w * ground.mass(window)

    def intensity(self, window: Window, ground: Optional[GroundIntensity] = None) -> float:
        """Mean particle count z/(1-z) * rho(B)"""
        if self.is_empty:
            return 0.0
        return self.z / (1.0 - self.z) * self.mass(window, ground)

    def to_dict(self) -> Dict[str, float]:
        return {"z": self.z, "w": self.w}


@dataclass(frozen=True)
class OccupationProfile:
    """
    Finite measure gamma on the positive integers: gamma(j) sites carry multiplicity j.
    Stored as sorted (j, gamma(j)) pairs with zero entries dropped.
    """
    counts: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        merged: Dict[int, int] = defaultdict(int)
        for j, c in self.counts:
            if int(j) != j or j < 1:
                raise DomainError(f"multiplicity must be a positive integer, got {j}")
            if int(c) != c or c < 0:
                raise DomainError(f"count must be a nonnegative integer, got {c}")
            merged[int(j)] += int(c)
        normalized = tuple(sorted((j, c) for j, c in merged.items() if c > 0))
        object.__setattr__(self, "counts", normalized)

    @classmethod
    def from_mapping(cls, mapping: Dict[int, int]) -> 'OccupationProfile':
        return cls(tuple(mapping.items()))

    @classmethod
    def from_parts(cls, parts: Iterable[int]) -> 'OccupationProfile':
        """Profile of a multiset of block sizes (or site multiplicities)"""
        merged: Dict[int, int] = defaultdict(int)
        for part in parts:
            merged[int(part)] += 1
        return cls(tuple(merged.items()))

    @property
    def m(self) -> int:
        """gamma(id) = sum_j j * gamma(j)"""
        return sum(j * c for j, c in self.counts)

    @property
    def k(self) -> int:
        """gamma(N) = sum_j gamma(j)"""
        return sum(c for _, c in self.counts)

    @property
    def largest_part(self) -> int:
        return self.counts[-1][0] if self.counts else 0

    def __getitem__(self, j: int) -> int:
        for jj, c in self.counts:
            if jj == j:
                return c
        return 0

    def as_dict(self) -> Dict[int, int]:
        return dict(self.counts)

    def parts(self) -> List[int]:
        """Increasing sequence i_1 <= ... <= i_k with gamma(j) entries equal to j"""
        out: List[int] = []
        for j, c in self.counts:
            out.extend([j] * c)
        return out

    def shifted(self, j: int, delta: int) -> Optional['OccupationProfile']:
        """gamma + delta * delta_j, or None when a count would turn negative"""
        mapping = self.as_dict()
        value = mapping.get(j, 0) + delta
        if value < 0:
            return None
        mapping[j] = value
        return OccupationProfile.from_mapping(mapping)

    def vector(self, max_j: int) -> np.ndarray:
        out = np.zeros(max_j, dtype=np.int64)
        for j, c in self.counts:
            if j <= max_j:
                out[j - 1] = c
        return out

    def to_json(self) -> Dict[str, int]:
        return {str(j): c for j, c in self.counts}

    def __str__(self) -> str:
        inner = ", ".join(f"{j}:{c}" for j, c in self.counts)
        return "{" + inner + "}"


Atom = Tuple[float, int]


@dataclass(frozen=True)
class Configuration:
    """
    Finite point measure: atoms (site, multiplicity), sorted by site.
    Equal sites are merged by summing multiplicities.
    """
    atoms: Tuple[Atom, ...] = ()

    def __post_init__(self):
        merged: Dict[float, int] = defaultdict(int)
        for site, mult in self.atoms:
            site = float(site)
            if not math.isfinite(site):
                raise DomainError(f"site must be finite, got {site}")
            if int(mult) != mult or mult < 1:
                raise DomainError(f"multiplicity must be an integer >= 1, got {mult}")
            merged[site] += int(mult)
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    @classmethod
    def empty(cls) -> 'Configuration':
        return cls(())

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence]) -> 'Configuration':
        return cls(tuple((a[0], a[1]) for a in atoms))

    @classmethod
    def from_arrays(cls, sites: np.ndarray, mults: np.ndarray) -> 'Configuration':
        return cls(tuple(zip(np.asarray(sites, dtype=float).tolist(),
                             np.asarray(mults, dtype=np.int64).tolist())))

    @classmethod
    def from_json(cls, pairs: Sequence[Sequence]) -> 'Configuration':
        """Create Configuration from a JSON array of [site, mult] pairs"""
        return cls.from_atoms(pairs)

    def to_json(self) -> List[List]:
        return [[site, mult] for site, mult in self.atoms]

    def __len__(self) -> int:
        return len(self.atoms)

    def __add__(self, other: 'Configuration') -> 'Configuration':
        return Configuration(self.atoms + other.atoms)

    @property
    def sites(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms], dtype=float)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms], dtype=np.int64)

    def _inside(self, window: Optional[Window]) -> List[Atom]:
        if window is None:
            return list(self.atoms)
        return [a for a in self.atoms if window.lo <= a[0] < window.hi]

    def zeta(self, window: Optional[Window] = None) -> int:
        """Total multiplicity mu(B)"""
        return sum(m for _, m in self._inside(window))

    def xi(self, window: Optional[Window] = None) -> int:
        """Number of occupied sites in B"""
        return len(self._inside(window))

    def occupation_profile(self, window: Optional[Window] = None) -> OccupationProfile:
        return OccupationProfile.from_parts(m for _, m in self._inside(window))

    def restrict(self, window: Window) -> 'Configuration':
        return Configuration(tuple(self._inside(window)))

    def outside(self, window: Window) -> 'Configuration':
        return Configuration(tuple(a for a in self.atoms if not window.lo <= a[0] < window.hi))

    def integrate(self, f: ArrayFunction) -> float:
        """mu(f) = sum of mult * f(site)"""
        if not self.atoms:
            return 0.0
        return float(np.sum(self.multiplicities * f(self.sites)))


@dataclass
class ConfigurationBatch:
    """
    N independent replicas on one window as flat atom arrays.
    replica[i] is the replica index of atom i; atoms are grouped by replica.
    """
    size: int
    window: Window
    replica: np.ndarray
    sites: np.ndarray
    mults: np.ndarray

    @classmethod
    def from_configurations(cls, configurations: Sequence[Configuration], window: Window) -> 'ConfigurationBatch':
        replica, sites, mults = [], [], []
        for i, cfg in enumerate(configurations):
            for site, mult in cfg.atoms:
                replica.append(i)
                sites.append(site)
                mults.append(mult)
        return cls(
            size=len(configurations),
            window=window,
            replica=np.array(replica, dtype=np.int64),
            sites=np.array(sites, dtype=float),
            mults=np.array(mults, dtype=np.int64),
        )

    @property
    def atom_count(self) -> int:
        return int(self.replica.size)

    def per_replica(self, atom_values: np.ndarray) -> np.ndarray:
        """Sum an atom-level quantity within each replica"""
        return np.bincount(self.replica, weights=atom_values, minlength=self.size)

    def zeta(self) -> np.ndarray:
        return np.bincount(self.replica, weights=self.mults, minlength=self.size).astype(np.int64)

    def xi(self) -> np.ndarray:
        return np.bincount(self.replica, minlength=self.size).astype(np.int64)

    def profile_counts(self, j: int) -> np.ndarray:
        """gamma_B(j) for every replica"""
        mask = self.mults == j
        return np.bincount(self.replica[mask], minlength=self.size).astype(np.int64)

    def profile_matrix(self, max_j: int) -> np.ndarray:
        """(size, max_j) matrix of gamma_B(1..max_j)"""
        return np.stack([self.profile_counts(j) for j in range(1, max_j + 1)], axis=1)

    def integrate(self, f: ArrayFunction) -> np.ndarray:
        """mu_i(f) for every replica i"""
        if self.atom_count == 0:
            return np.zeros(self.size)
        return self.per_replica(self.mults * f(self.sites))

    def configuration(self, index: int) -> Configuration:
        lo = np.searchsorted(self.replica, index, side="left")
        hi = np.searchsorted(self.replica, index, side="right")
        return Configuration.from_arrays(self.sites[lo:hi], self.mults[lo:hi])

    def __iter__(self) -> Iterator[Configuration]:
        for i in range(self.size):
            yield self.configuration(i)


@dataclass(frozen=True)
class RandomSource:
    """
    Deterministic randomness contract: equal (seed, stream, path) give equal draws,
    distinct streams or child paths give independent numpy generators.
    """
    seed: int
    stream: int = 0
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream < 0 or any(p < 0 for p in self.path):
            raise DomainError("stream ids must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,) + self.path)
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> 'RandomSource':
        return RandomSource(self.seed, self.stream, self.path + (index,))

    def spawn(self, n: int) -> List['RandomSource']:
        return [self.child(i) for i in range(n)]


RandomLike = Union[RandomSource, np.random.Generator, int]


def as_generator(rng: RandomLike) -> np.random.Generator:
    """A fresh generator for RandomSource/int seeds, the same object for a Generator"""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng)).generator()
    raise TypeError(f"unsupported random source: {type(rng)!r}")
