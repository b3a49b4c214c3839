"""Perturbation samplers and the distribution constants the theory depends on.

The truncated Cauchy law on the unit ball has density proportional to
``(1 + |u|^2) ** (-(d + 1) / 2)``.  Its normalization ``c1`` has no closed
form for general ``d``, so it is obtained by radial quadrature and cached.
"""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

TRUNCATED_CAUCHY = "truncated_cauchy"
T_PROJECTED_SPHERE = "t_projected_sphere"
GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
UNIFORM = "uniform"

_NAMES = (TRUNCATED_CAUCHY, T_PROJECTED_SPHERE, GAUSSIAN, RADEMACHER, UNIFORM)


@dataclass(frozen=True)
class PerturbationKind:
    name: str
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ValueError(f"unknown perturbation kind {self.name!r}")
        if self.name == UNIFORM and not self.lo < self.hi:
            raise ValueError(f"uniform interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PerturbationKind":
        return cls(UNIFORM, float(lo), float(hi))

    @property
    def bounded_by_unit_ball(self) -> bool:
        return self.name in (TRUNCATED_CAUCHY, T_PROJECTED_SPHERE)

    @property
    def symmetric(self) -> bool:
        return self.name != UNIFORM or self.lo == -self.hi

    def label(self) -> str:
        if self.name == UNIFORM:
            return f"uniform({self.lo:g},{self.hi:g})"
        return self.name


TRUNCATED_CAUCHY_KIND = PerturbationKind(TRUNCATED_CAUCHY)
T_PROJECTED_SPHERE_KIND = PerturbationKind(T_PROJECTED_SPHERE)
GAUSSIAN_KIND = PerturbationKind(GAUSSIAN)
RADEMACHER_KIND = PerturbationKind(RADEMACHER)


@dataclass(frozen=True)
class PerturbationSample:
    u: np.ndarray
    kind: PerturbationKind


class MCEstimate(NamedTuple):
    """Monte Carlo mean with its standard error (scalars or arrays)."""

    value: float | np.ndarray
    se: float | np.ndarray


@dataclass
class DistributionConstants:
    dim: int
    c2: float
    c2_se: float
    c_bar: float
    c_bar_se: float
    marginal_m4: float
    marginal_m4_se: float
    n_samples: int
    kind: str = TRUNCATED_CAUCHY
    c1: float | None = None
    c11: float | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _seed_of(rng) -> int | None:
    return int(rng) if isinstance(rng, (int, np.integer)) else None


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def _kernel_prefactor(dim: int) -> float:
    # Gamma((d+1)/2) / pi^((d+1)/2), in log space for large d
    return math.exp(special.gammaln((dim + 1) / 2) - (dim + 1) / 2 * math.log(math.pi))


def radial_integral(fn: Callable[[float], float], dim: int) -> float:
    """Integral over [0, 1] of fn(r) r^(d-1) (1 + r^2)^(-(d+1)/2) dr."""
    dim = _check_dim(dim)
    val, _ = integrate.quad(
        lambda r: fn(r) * r ** (dim - 1) * (1.0 + r * r) ** (-(dim + 1) / 2),
        0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200,
    )
    return val


@functools.lru_cache(maxsize=None)
def compute_normalization(dim: int) -> float:
    """Normalization constant c1 of the truncated Cauchy density on the unit ball."""
    dim = _check_dim(dim)
    return _kernel_prefactor(dim) * sphere_area(dim) * radial_integral(lambda r: 1.0, dim)


def c11_constant(dim: int) -> float:
    """Moment-bound constant 2 Gamma((d+1)/2) / (sqrt(pi) Gamma(d/2) c1)."""
    dim = _check_dim(dim)
    log_ratio = special.gammaln((dim + 1) / 2) - special.gammaln(dim / 2)
    return 2.0 * math.exp(log_ratio) / (math.sqrt(math.pi) * compute_normalization(dim))


def radial_expectation(fn: Callable[[float], float], dim: int) -> float:
    """E[fn(|u|)] under the truncated Cauchy law (delta = 1), by quadrature."""
    return radial_integral(fn, dim) / radial_integral(lambda r: 1.0, dim)


def exact_c2(dim: int) -> float:
    # by exchangeability E[(d+1) u_1^2 / (1+|u|^2)] = (d+1)/d E[|u|^2 / (1+|u|^2)]
    return (dim + 1) / dim * radial_expectation(lambda r: r * r / (1 + r * r), dim)


def exact_c_bar(dim: int) -> float:
    return radial_expectation(lambda r: r ** 4, dim)


def density_truncated_cauchy(u, delta: float = 1.0, c1: float | None = None) -> float | np.ndarray:
    """Density of the truncated Cauchy law on the delta-ball.

    ``u`` may be a single d-vector or an (n, d) array of points.  ``c1``
    defaults to the cached normalization for the dimension of ``u``.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        raise ValueError("u must be a vector")
    dim = u.shape[-1]
    if c1 is None:
        c1 = compute_normalization(dim)
    sq = np.sum(u * u, axis=-1) / delta ** 2
    dens = _kernel_prefactor(dim) / (c1 * delta ** dim) * (1.0 + sq) ** (-(dim + 1) / 2)
    dens = np.where(sq <= 1.0, dens, 0.0)
    return float(dens) if dens.ndim == 0 else dens


def _uniform_ball(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / dim)
    return g * radius[:, None]


def _truncated_cauchy(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((n, dim))
    filled = 0
    # the acceptance rate is at least 2^(-(d+1)/2)
    rate = 2.0 ** (-(dim + 1) / 2)
    while filled < n:
        m = int((n - filled) / rate) + 16
        prop = _uniform_ball(m, dim, rng)
        accept_p = (1.0 + np.sum(prop * prop, axis=1)) ** (-(dim + 1) / 2)
        keep = prop[rng.random(m) < accept_p]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def sample_batch(kind: PerturbationKind, dim: int, n: int, rng) -> np.ndarray:
    """Draw ``n`` perturbation vectors as an (n, dim) array."""
    dim = _check_dim(dim)
    rng = _as_rng(rng)
    if kind.name == TRUNCATED_CAUCHY:
        return _truncated_cauchy(n, dim, rng)
    if kind.name == T_PROJECTED_SPHERE:
        # multivariate t with one degree of freedom, then scaled to unit norm
        z = rng.standard_normal((n, dim))
        w = rng.chisquare(1.0, size=n)
        t = z / np.sqrt(w)[:, None]
        return t / np.linalg.norm(t, axis=1, keepdims=True)
    if kind.name == GAUSSIAN:
        return rng.standard_normal((n, dim))
    if kind.name == RADEMACHER:
        return rng.integers(0, 2, size=(n, dim)) * 2.0 - 1.0
    return rng.uniform(kind.lo, kind.hi, size=(n, dim))


def sample(kind: PerturbationKind, dim: int, rng) -> PerturbationSample:
    return PerturbationSample(sample_batch(kind, dim, 1, rng)[0], kind)


def _mean_se(values: np.ndarray) -> MCEstimate:
    n = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / math.sqrt(n)
    if np.ndim(mean) == 0:
        return MCEstimate(float(mean), float(se))
    return MCEstimate(mean, se)


def moment(kind: PerturbationKind, r: int, dim: int, n_samples: int, rng) -> MCEstimate:
    """Monte Carlo estimate of E|u|^(2r)."""
    if r < 1:
        raise ValueError(f"r must be a positive integer, got {r}")
    u = sample_batch(kind, dim, n_samples, rng)
    return _mean_se(np.sum(u * u, axis=1) ** r)


def estimate_constants(kind: PerturbationKind, dim: int, n_samples: int, rng) -> DistributionConstants:
    """Monte Carlo estimates of c2, c_bar and E[(u^1)^4] with standard errors."""
    if n_samples < 10_000:
        raise ValueError(f"n_samples must be at least 1e4, got {n_samples}")
    dim = _check_dim(dim)
    seed = _seed_of(rng)
    u = sample_batch(kind, dim, n_samples, _as_rng(rng))
    sq = np.sum(u * u, axis=1)
    # every coordinate has the same law, so average the c2 integrand over them
    c2 = _mean_se((dim + 1) * np.mean(u * u, axis=1) / (1.0 + sq))
    c_bar = _mean_se(sq * sq)
    m4 = _mean_se(u[:, 0] ** 4)
    consts = DistributionConstants(
        dim=dim, c2=c2.value, c2_se=c2.se, c_bar=c_bar.value, c_bar_se=c_bar.se,
        marginal_m4=m4.value, marginal_m4_se=m4.se, n_samples=n_samples,
        kind=kind.label(), seed=seed,
    )
    if kind.name == TRUNCATED_CAUCHY:
        consts.c1 = compute_normalization(dim)
        consts.c11 = c11_constant(dim)
    return consts
