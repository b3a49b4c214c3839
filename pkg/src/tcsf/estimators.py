"""Two-observation gradient estimators: TCSF (one-sided, balanced, CRN), GSF, SPSA, RDSA.

Every estimator makes exactly two noisy observations.  The TCSF family
returns an estimate of ``c2 * grad f`` (not ``grad f``) unless a rescale
constant is supplied.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import perturbations as pt
from .objectives import NoisyObjective

TCSF = "tcsf"
BTCSF = "btcsf"
TCSF_CRN = "tcsf_crn"
GSF = "gsf"
SPSA = "spsa"
RDSA = "rdsa"

ESTIMATOR_NAMES = (GSF, TCSF, BTCSF, TCSF_CRN, SPSA, RDSA)
_TCSF_FAMILY = (TCSF, BTCSF, TCSF_CRN)
_BALANCED = (BTCSF, SPSA, RDSA)


class NumericalError(ArithmeticError):
    """A noisy observation or an estimate came out non-finite."""


@dataclass(frozen=True)
class EstimatorKind:
    name: str
    perturbation: Optional[pt.PerturbationKind] = None
    eta: float = 5.0
    c2_rescale: Optional[float] = None

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {self.name!r}")
        if self.name == RDSA and not self.eta > 0:
            raise ValueError(f"RDSA eta must be positive, got {self.eta}")
        if self.c2_rescale is not None and not self.c2_rescale > 0:
            raise ValueError("c2_rescale must be positive")

    @property
    def perturbation_kind(self) -> pt.PerturbationKind:
        if self.perturbation is not None:
            return self.perturbation
        if self.name in _TCSF_FAMILY:
            return pt.TRUNCATED_CAUCHY_KIND
        if self.name == GSF:
            return pt.GAUSSIAN_KIND
        if self.name == SPSA:
            return pt.RADEMACHER_KIND
        return pt.PerturbationKind.uniform(-self.eta, self.eta)

    @property
    def balanced(self) -> bool:
        return self.name in _BALANCED

    @property
    def tcsf_family(self) -> bool:
        return self.name in _TCSF_FAMILY

    @property
    def common_noise(self) -> bool:
        return self.name == TCSF_CRN

    def label(self) -> str:
        out = self.name
        if self.name == RDSA:
            out += f"(eta={self.eta:g})"
        if self.perturbation is not None:
            out += f"[{self.perturbation.label()}]"
        return out

    def direction_weights(self, u: np.ndarray) -> np.ndarray:
        """Vector multiplying the finite-difference quotient, per perturbation."""
        if self.tcsf_family:
            d = u.shape[-1]
            return (d + 1) * u / (1.0 + np.sum(u * u, axis=-1, keepdims=True))
        if self.name == GSF:
            return u
        if self.name == SPSA:
            return 1.0 / u
        return (3.0 / self.eta ** 2) * u

    def scale(self, c2: float | None = None) -> float:
        """Multiplier on grad f in the estimator's conditional mean (to leading order)."""
        if not self.tcsf_family:
            return 1.0
        if c2 is None:
            raise ValueError("the TCSF family needs c2 for its gradient scale")
        return c2 / self.c2_rescale if self.c2_rescale else c2


TCSF_KIND = EstimatorKind(TCSF)
BTCSF_KIND = EstimatorKind(BTCSF)
TCSF_CRN_KIND = EstimatorKind(TCSF_CRN)
GSF_KIND = EstimatorKind(GSF)
SPSA_KIND = EstimatorKind(SPSA)
RDSA_KIND = EstimatorKind(RDSA)


def parse_estimator(spec) -> EstimatorKind:
    """Build an EstimatorKind from a name or a mapping like {"name": "rdsa", "eta": 5}."""
    if isinstance(spec, EstimatorKind):
        return spec
    if isinstance(spec, str):
        return EstimatorKind(spec)
    spec = dict(spec)
    pert = spec.pop("perturbation", None)
    if isinstance(pert, str):
        pert = pt.PerturbationKind(pert)
    elif isinstance(pert, dict):
        pert = pt.PerturbationKind(**pert)
    return EstimatorKind(perturbation=pert, **spec)


@dataclass(frozen=True)
class GradientEstimate:
    g: np.ndarray
    u: pt.PerturbationSample
    y_plus: float
    y_minus_or_center: float
    delta: float


def estimate_from_draws(kind: EstimatorKind, obj: NoisyObjective, x: np.ndarray, delta,
                        u: np.ndarray, z: np.ndarray):
    """Vectorized estimator core given the random draws.

    ``x`` and ``u`` have shape (..., d), ``z`` has shape (..., 2, d+1) holding
    the standard normals of the two observations.  ``delta`` is a scalar or
    broadcasts against (..., 1).  Returns ``(g, y_plus, y_second, n_clamped)``.
    """
    z_plus = z[..., 0, :]
    z_second = z_plus if kind.common_noise else z[..., 1, :]
    step = delta * u
    y_plus, flag_p = obj.observe_with(x + step, z_plus)
    if kind.balanced:
        y_second, flag_s = obj.observe_with(x - step, z_second)
        quotient = (y_plus - y_second) / (2.0 * delta)
    else:
        y_second, flag_s = obj.observe_with(x, z_second)
        quotient = (y_plus - y_second) / delta
    g = np.asarray(quotient)[..., None] * kind.direction_weights(u)
    if kind.c2_rescale:
        g = g / kind.c2_rescale
    return g, y_plus, y_second, flag_p.astype(int) + flag_s.astype(int)


def _check_delta(delta):
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")


def estimate(kind: EstimatorKind, obj: NoisyObjective, x, delta: float, rng) -> GradientEstimate:
    """One realization of the estimator at ``x``.

    Draws the perturbation first, then the two observations' noise.
    """
    _check_delta(delta)
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dim,):
        raise ValueError(f"expected a point of shape ({obj.dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    rng = pt._as_rng(rng)
    pkind = kind.perturbation_kind
    u = pt.sample_batch(pkind, obj.dim, 1, rng)[0]
    z = rng.standard_normal((2, obj.n_normals))
    with np.errstate(over="ignore", invalid="ignore"):
        g, yp, ys, _ = estimate_from_draws(kind, obj, x, delta, u, z)
    if not (np.isfinite(yp) and np.isfinite(ys) and np.all(np.isfinite(g))):
        raise NumericalError(f"non-finite observation or estimate at x={x}")
    return GradientEstimate(g, pt.PerturbationSample(u, pkind), float(yp), float(ys), float(delta))


def estimate_many(kind: EstimatorKind, obj: NoisyObjective, x, delta: float, n: int, rng,
                  return_draws: bool = False):
    """``n`` independent estimates at a fixed point, as an (n, d) array."""
    _check_delta(delta)
    x = np.asarray(x, dtype=float)
    rng = pt._as_rng(rng)
    u = pt.sample_batch(kind.perturbation_kind, obj.dim, n, rng)
    z = rng.standard_normal((n, 2, obj.n_normals))
    with np.errstate(over="ignore", invalid="ignore"):
        g, _, _, _ = estimate_from_draws(kind, obj, np.broadcast_to(x, u.shape), delta, u, z)
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"non-finite estimate at x={x}")
    return (g, u) if return_draws else g


def _chunks(n: int, size: int):
    while n > 0:
        yield min(n, size)
        n -= size


def smoothed_gradient_mc(obj: NoisyObjective, x, delta: float, n_samples: int, rng,
                         kind: EstimatorKind = TCSF_KIND, chunk: int = 1 << 18) -> pt.MCEstimate:
    """Monte Carlo reference for the smoothed gradient: mean of one-sided estimates."""
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1e3, got {n_samples}")
    rng = pt._as_rng(rng)
    total = np.zeros(obj.dim)
    total_sq = np.zeros(obj.dim)
    for m in _chunks(n_samples, chunk):
        g = estimate_many(kind, obj, x, delta, m, rng)
        total += g.sum(axis=0)
        total_sq += (g * g).sum(axis=0)
    mean = total / n_samples
    var = (total_sq - n_samples * mean ** 2) / (n_samples - 1)
    return pt.MCEstimate(mean, np.sqrt(np.maximum(var, 0.0) / n_samples))
