"""Empirical checks on estimator bias and second moments, and the AMSE comparison.

Bias probes subtract the estimator's own linear term from every sample, so
the Monte Carlo noise of the leading ``c2 grad f`` part does not drown the
small delta-order bias being measured.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import perturbations as pt
from .estimators import GSF, SPSA, EstimatorKind, estimate_many
from .objectives import NoisyObjective


class DegenerateFitError(ValueError):
    """Every bias norm on the grid is indistinguishable from zero."""


class SingularPhiError(ValueError):
    """gamma0 * lambda_min(H) <= upsilon_plus / 2, so Phi is not positive definite."""


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


@dataclass
class BiasProbeReport:
    estimator: str
    x: list
    delta_grid: list
    bias_norms: list
    bias_se: list
    raw_bias_norms: list
    raw_bias_se: list
    n_samples: int
    fitted_slope: Optional[float] = None
    degenerate: bool = False
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _norm_with_se(vec: np.ndarray, se: np.ndarray) -> tuple[float, float]:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return 0.0, float(np.linalg.norm(se))
    # delta method
    return norm, float(np.sqrt(np.sum((vec / norm) ** 2 * se ** 2)))


def _accumulate(fn, n: int, chunk: int, rng):
    """Streaming mean and standard error of fn(m, rng) -> (m, d) samples."""
    total = total_sq = None
    left = n
    while left > 0:
        m = min(left, chunk)
        s = fn(m, rng)
        if total is None:
            total, total_sq = s.sum(axis=0), (s * s).sum(axis=0)
        else:
            total += s.sum(axis=0)
            total_sq += (s * s).sum(axis=0)
        left -= m
    mean = total / n
    var = np.maximum((total_sq - n * mean ** 2) / (n - 1), 0.0)
    return mean, np.sqrt(var / n)


def linear_part(kind: EstimatorKind, u: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Estimator output for the exact linear model f(x + v) = f(x) + v^T grad."""
    return (u @ grad)[:, None] * kind.direction_weights(u) / (kind.c2_rescale or 1.0)


def bias_probe(kind: EstimatorKind, obj: NoisyObjective, x, delta_grid: Sequence[float],
               n_samples: int, c2_hat: pt.MCEstimate | float | None, rng,
               chunk: int = 1 << 17, z_threshold: float = 3.0) -> BiasProbeReport:
    """Bias of the estimator mean relative to ``scale * grad f(x)`` across a delta grid.

    ``bias_norms`` use the per-sample linear-term control variate, whose mean
    is exactly ``scale * grad f`` by the perturbation covariance identity.
    ``raw_bias_norms`` compare the plain sample mean with ``c2_hat * grad f``
    and carry the uncertainty of both.
    """
    grid = [float(d) for d in delta_grid]
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta_grid must be strictly decreasing")
    x = np.asarray(x, dtype=float)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = pt._as_rng(rng)
    grad = obj.spec.grad_true(x)
    if kind.tcsf_family:
        if c2_hat is None:
            raise ValueError("TCSF bias probes need c2_hat")
        c2_val, c2_se = (c2_hat if isinstance(c2_hat, tuple) else (float(c2_hat), 0.0))
        scale = c2_val / (kind.c2_rescale or 1.0)
        scale_se = c2_se / (kind.c2_rescale or 1.0)
    else:
        scale, scale_se = 1.0, 0.0

    norms, ses, raw_norms, raw_ses = [], [], [], []
    for delta in grid:
        def paired(m, gen):
            g, u = estimate_many(kind, obj, x, delta, m, gen, return_draws=True)
            return np.hstack([g - linear_part(kind, u, grad), g])

        mean, se = _accumulate(paired, n_samples, chunk, rng)
        d = x.size
        n_cv, se_cv = _norm_with_se(mean[:d], se[:d])
        raw = mean[d:] - scale * grad
        raw_se = np.sqrt(se[d:] ** 2 + (scale_se * grad) ** 2)
        n_raw, se_raw = _norm_with_se(raw, raw_se)
        norms.append(n_cv)
        ses.append(se_cv)
        raw_norms.append(n_raw)
        raw_ses.append(se_raw)

    report = BiasProbeReport(
        estimator=kind.label(), x=x.tolist(), delta_grid=grid, bias_norms=norms,
        bias_se=ses, raw_bias_norms=raw_norms, raw_bias_se=raw_ses,
        n_samples=n_samples, seed=seed,
    )
    distinguishable = [n > z_threshold * s for n, s in zip(norms, ses)]
    if not any(distinguishable) or any(n == 0 for n in norms):
        report.degenerate = True
    else:
        report.fitted_slope = loglog_slope(grid, norms)
    return report


def require_fit(report: BiasProbeReport) -> float:
    if report.degenerate:
        raise DegenerateFitError(
            f"{report.estimator}: bias indistinguishable from zero on {report.delta_grid}")
    return report.fitted_slope


@dataclass
class SecondMomentReport:
    estimator: str
    x: list
    delta_grid: list
    second_moments: list
    second_moment_se: list
    n_samples: int
    fitted_slope: float
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def second_moment_probe(kind: EstimatorKind, obj: NoisyObjective, x, delta_grid: Sequence[float],
                        n_samples: int, rng, chunk: int = 1 << 17) -> SecondMomentReport:
    """E||G||^2 at a fixed point for each delta, and its log-log slope in delta."""
    grid = [float(d) for d in delta_grid]
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta_grid must be strictly decreasing")
    x = np.asarray(x, dtype=float)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = pt._as_rng(rng)
    moments, ses = [], []
    for delta in grid:
        def sq_norm(m, gen):
            g = estimate_many(kind, obj, x, delta, m, gen)
            return np.sum(g * g, axis=1)[:, None]

        mean, se = _accumulate(sq_norm, n_samples, chunk, rng)
        moments.append(float(mean[0]))
        ses.append(float(se[0]))
    return SecondMomentReport(
        estimator=kind.label(), x=x.tolist(), delta_grid=grid, second_moments=moments,
        second_moment_se=ses, n_samples=n_samples, fitted_slope=loglog_slope(grid, moments),
        seed=seed,
    )


@dataclass
class AMSEInputs:
    gamma0: float
    delta0: float
    hessian_at_opt: np.ndarray
    T_vector: np.ndarray
    sigma_prime_sq: float
    upsilon_plus: float
    c_bar: float

    def __post_init__(self):
        self.hessian_at_opt = np.atleast_2d(np.asarray(self.hessian_at_opt, dtype=float))
        self.T_vector = np.atleast_1d(np.asarray(self.T_vector, dtype=float))
        if not np.allclose(self.hessian_at_opt, self.hessian_at_opt.T):
            raise ValueError("Hessian at the optimum must be symmetric")


@dataclass(frozen=True)
class AMSEResult:
    value: float
    bias_part: float
    variance_part: float


def _phi(inputs: AMSEInputs) -> np.ndarray:
    H = inputs.hessian_at_opt
    lam_min = float(np.linalg.eigvalsh(H)[0])
    if inputs.gamma0 * lam_min <= inputs.upsilon_plus / 2:
        raise SingularPhiError(
            f"gamma0 * lambda_min = {inputs.gamma0 * lam_min:g} <= upsilon+/2 = {inputs.upsilon_plus / 2:g}")
    return np.linalg.inv(inputs.gamma0 * H - 0.5 * inputs.upsilon_plus * np.eye(H.shape[0]))


def amse(inputs: AMSEInputs, c_bar: float | None = None) -> AMSEResult:
    """(c_bar delta0^2 gamma0 ||Phi T||)^2 + trace(Phi P) / delta0^2 with P = sigma'^2 I / 4."""
    phi = _phi(inputs)
    c_bar = inputs.c_bar if c_bar is None else c_bar
    d = phi.shape[0]
    bias = (c_bar * inputs.delta0 ** 2 * inputs.gamma0 * np.linalg.norm(phi @ inputs.T_vector)) ** 2
    P = inputs.sigma_prime_sq / 4.0 * np.eye(d)
    var = float(np.trace(phi @ P)) / inputs.delta0 ** 2
    return AMSEResult(float(bias + var), float(bias), var)


BASELINE_C_BAR = {GSF: 3.0, SPSA: 1.0}


def amse_ratio(baseline: str, inputs: AMSEInputs) -> float:
    """AMSE of GSF or SPSA divided by the TCSF AMSE under the shared formula."""
    try:
        c_base = BASELINE_C_BAR[baseline]
    except KeyError:
        raise ValueError(f"baseline must be one of {sorted(BASELINE_C_BAR)}") from None
    return amse(inputs, c_bar=c_base).value / amse(inputs).value


def estimate_sigma_prime_sq(obj: NoisyObjective, x, n_samples: int, rng) -> pt.MCEstimate:
    """Variance of eta_plus - eta at x from pairs of independent noise draws."""
    x = np.asarray(x, dtype=float)
    rng = pt._as_rng(rng)
    z = rng.standard_normal((n_samples, 2, obj.n_normals))
    xs = np.broadcast_to(x, (n_samples, x.size))
    eta_p, _ = obj.noise_values(xs, z[:, 0])
    eta_c, _ = obj.noise_values(xs, z[:, 1])
    diff_sq = (eta_p - eta_c) ** 2
    return pt.MCEstimate(float(diff_sq.mean()), float(diff_sq.std(ddof=1) / math.sqrt(n_samples)))


def amse_inputs_for(obj: NoisyObjective, gamma0: float, delta0: float, upsilon_plus: float,
                    c_bar: float, n_noise: int = 100_000, rng=0) -> AMSEInputs:
    """AMSE inputs at the objective's known minimizer, with sigma'^2 estimated empirically."""
    spec = obj.spec
    if spec.known_minimizer is None or spec.hess_true is None:
        raise ValueError(f"{spec.name}: needs a known minimizer and a Hessian")
    x_star = spec.known_minimizer
    return AMSEInputs(
        gamma0=gamma0, delta0=delta0, hessian_at_opt=spec.hess_true(x_star),
        T_vector=spec.third_deriv_contraction(x_star),
        sigma_prime_sq=estimate_sigma_prime_sq(obj, x_star, n_noise, rng).value,
        upsilon_plus=upsilon_plus, c_bar=c_bar,
    )


def upsilon_plus(alpha: float, phi: float) -> float:
    """upsilon = alpha - 2 phi when alpha = 1, else 0."""
    return alpha - 2 * phi if alpha == 1 else 0.0
