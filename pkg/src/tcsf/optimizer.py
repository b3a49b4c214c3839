"""Stochastic-approximation driver x_{k+1} = x_k - gamma_k g_k over any estimator.

Runs can be executed one at a time (``run``) or many in lockstep
(``run_many``).  Each run owns its random stream and draws from it in the
same order whether or not it shares a batch, so a (seed, config) pair fixes
the trajectory bit-exactly either way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import perturbations as pt
from .estimators import EstimatorKind, estimate_from_draws
from .objectives import NoisyObjective, ObjectiveSpec

EPSILON_REACHED = "EpsilonReached"
HORIZON_REACHED = "HorizonReached"
NUMERIC_ERROR = "NumericError"

FULL_TRAJECTORY_LIMIT = 10_000
_BLOCK = 256


class MissingConstantError(KeyError):
    """A theorem schedule was requested without one of the constants it needs."""

    def __init__(self, symbol: str, which: str):
        super().__init__(symbol)
        self.symbol = symbol
        self.which = which

    def __str__(self):
        return f"{self.which} schedule needs constant {self.symbol!r}"


@dataclass(frozen=True)
class Power:
    """Sequence scale / k**exponent, indexed from k = 1."""

    scale: float
    exponent: float

    def __call__(self, k: int) -> float:
        return self.scale / k ** self.exponent

    def to_dict(self) -> dict:
        return {"rule": "power", "scale": self.scale, "exponent": self.exponent}


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, k: int) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"rule": "constant", "value": self.value}


def rule_from_dict(d: dict):
    if d["rule"] == "power":
        return Power(float(d["scale"]), float(d["exponent"]))
    if d["rule"] == "constant":
        return Constant(float(d["value"]))
    raise ValueError(f"unknown schedule rule {d['rule']!r}")


@dataclass(frozen=True)
class ScheduleConfig:
    step: Power | Constant
    smoothing: Power | Constant
    horizon: int
    epsilon_stop: float = 1e-4

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        if self.epsilon_stop < 0:
            raise ValueError("epsilon_stop must be non-negative")
        for rule in (self.step, self.smoothing):
            if (rule.scale if isinstance(rule, Power) else rule.value) <= 0:
                raise ValueError(f"schedule values must be positive: {rule}")

    def to_dict(self) -> dict:
        return {"step": self.step.to_dict(), "smoothing": self.smoothing.to_dict(),
                "horizon": self.horizon, "epsilon_stop": self.epsilon_stop}

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleConfig":
        return cls(rule_from_dict(d["step"]), rule_from_dict(d["smoothing"]),
                   int(d["horizon"]), float(d.get("epsilon_stop", 1e-4)))


def power_schedule(gamma0, alpha, delta0, phi, horizon, epsilon_stop=1e-4) -> ScheduleConfig:
    return ScheduleConfig(Power(gamma0, alpha), Power(delta0, phi), horizon, epsilon_stop)


def constant_schedule(gamma, delta, horizon, epsilon_stop=1e-4) -> ScheduleConfig:
    return ScheduleConfig(Constant(gamma), Constant(delta), horizon, epsilon_stop)


@dataclass(frozen=True)
class Assumption1Report:
    sum_gamma_diverges: bool
    sum_ratio_sq_converges: bool
    gamma_vanishes: bool
    delta_vanishes: bool
    theorem2_admissible: bool
    upsilon: Optional[float]

    @property
    def valid(self) -> bool:
        return (self.sum_gamma_diverges and self.sum_ratio_sq_converges
                and self.gamma_vanishes and self.delta_vanishes)


def validate_assumption1(sched: ScheduleConfig) -> Assumption1Report:
    """Exponent algebra for sum gamma_k = inf and sum (gamma_k / delta_k)^2 < inf."""
    alpha = sched.step.exponent if isinstance(sched.step, Power) else 0.0
    phi = sched.smoothing.exponent if isinstance(sched.smoothing, Power) else 0.0
    upsilon = alpha - 2 * phi
    admissible = 0 < alpha <= 1 and phi >= alpha / 6 and upsilon > 0
    return Assumption1Report(
        sum_gamma_diverges=alpha <= 1,
        sum_ratio_sq_converges=2 * (alpha - phi) > 1,
        gamma_vanishes=alpha > 0,
        delta_vanishes=phi > 0,
        theorem2_admissible=admissible,
        upsilon=upsilon if admissible else None,
    )


@dataclass
class TheoremConstants:
    """Problem constants consumed by the non-asymptotic schedules."""

    dim: Optional[int] = None
    L: Optional[float] = None
    sigma: Optional[float] = None
    c2: Optional[float] = None
    c11: Optional[float] = None
    c12: Optional[float] = None
    c13: Optional[float] = None

    def need(self, symbol: str, which: str) -> float:
        value = getattr(self, symbol)
        if value is None and symbol == "c12" and None not in (self.c2, self.dim):
            # pseudo-inverse of c2 * I has Frobenius norm sqrt(d) / c2
            value = math.sqrt(self.dim) / self.c2
        if value is None and symbol == "c13" and None not in (self.c11, self.dim):
            value = 4.0 * self.c11 * self.need("c12", which) / (self.dim + 1)
        if value is None:
            raise MissingConstantError(symbol, which)
        return float(value)


def theorem_schedule(which: str, N: int, constants: TheoremConstants,
                     epsilon_stop: float = 0.0) -> ScheduleConfig:
    """Constant step/smoothing pairs prescribed by the non-asymptotic results.

    ``which`` is one of "thm3" (one-sided), "thm4" (balanced), "thm5"
    (common random numbers) or "thm6" (balanced, smooth observations).
    """
    which = which.lower()
    need = lambda s: constants.need(s, which)  # noqa: E731
    if which in ("thm3", "thm4"):
        gamma = min(need("c2") / need("L"), N ** (-2.0 / 3.0))
        delta = N ** (-1.0 / 6.0)
    elif which == "thm5":
        L, sigma, c13, d = need("L"), need("sigma"), need("c13"), need("dim")
        gamma = min(1.0 / (2 * L * c13), 1.0 / (c13 * sigma * math.sqrt(N)))
        delta = 1.0 / (L * math.sqrt(d * N * c13))
    elif which == "thm6":
        gamma = min(need("c2") / (2 * need("c11") ** 2 * need("L")), N ** -0.5)
        delta = N ** -0.5
    else:
        raise ValueError(f"unknown theorem schedule {which!r}")
    return constant_schedule(gamma, delta, N, epsilon_stop)


def estimate_lipschitz(spec: ObjectiveSpec, rng, n_points: int = 200) -> float:
    """Largest Hessian spectral norm over random points of the domain box."""
    if spec.lipschitz_grad_L is not None:
        return spec.lipschitz_grad_L
    if spec.hess_true is None:
        raise ValueError(f"{spec.name}: no Hessian for a Lipschitz estimate")
    rng = pt._as_rng(rng)
    lo, hi = spec.domain_box[:, 0], spec.domain_box[:, 1]
    pts = rng.uniform(lo, hi, size=(n_points, spec.dim))
    return max(float(np.linalg.norm(spec.hess_true(p), 2)) for p in pts)


@dataclass
class Trajectory:
    k: np.ndarray
    x: np.ndarray
    f_true: np.ndarray
    g_norm: np.ndarray
    thin: int = 1


@dataclass
class RunRecord:
    stop_reason: str
    iterations_used: int
    final_x: np.ndarray
    final_f_true: float
    seed: Optional[int] = None
    trajectory: Optional[Trajectory] = None
    selected_x_R: Optional[np.ndarray] = None
    selected_R: Optional[int] = None
    clamped_noise_evals: int = 0
    x1: Optional[np.ndarray] = field(default=None, repr=False)

    def to_json_dict(self, **context) -> dict:
        out = dict(context)
        out.update(
            seed=self.seed,
            iterations_used=self.iterations_used,
            stop_reason=self.stop_reason,
            final_f_true=_json_float(self.final_f_true),
            final_x=[_json_float(v) for v in self.final_x],
        )
        if self.selected_x_R is not None:
            out["selected_x_R"] = [_json_float(v) for v in self.selected_x_R]
            out["selected_R"] = self.selected_R
        return out


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _seed_and_rng(rng):
    if isinstance(rng, np.random.Generator):
        return None, rng
    return int(rng), np.random.default_rng(rng)


def run_many(obj: NoisyObjective, kind: EstimatorKind, x1, sched: ScheduleConfig,
             rngs: Sequence, randomized: bool = False,
             keep_trajectory: bool = True) -> list[RunRecord]:
    """Run one independent trajectory per entry of ``rngs``, in lockstep.

    ``x1`` is a single start point or one row per run.  Entries of ``rngs``
    are integer seeds or Generators; each is consumed only by its own run.
    """
    seeds, gens = zip(*(_seed_and_rng(r) for r in rngs)) if len(rngs) else ((), ())
    R, d, N = len(gens), obj.dim, sched.horizon
    X = np.array(np.broadcast_to(np.asarray(x1, dtype=float), (R, d)))
    if X.shape != (R, d):
        raise ValueError(f"start points must have shape ({R}, {d}), got {np.shape(x1)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("start points must be finite")
    X1 = X.copy()
    pkind = kind.perturbation_kind
    m = obj.n_normals

    thin = 1 if N <= FULL_TRAJECTORY_LIMIT else 10
    if keep_trajectory:
        n_store = (N - 1) // thin + 1
        t_x = np.full((R, n_store, d), np.nan)
        t_f = np.full((R, n_store), np.nan)
        t_g = np.full((R, n_store), np.nan)
    history = np.empty((R, N, d)) if randomized else None

    active = np.ones(R, dtype=bool)
    used = np.zeros(R, dtype=int)
    reason = np.array([HORIZON_REACHED] * R, dtype=object)
    clamped = np.zeros(R, dtype=int)
    U = Z = None

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(1, N + 1):
            j = (k - 1) % _BLOCK
            if j == 0:
                B = min(_BLOCK, N - k + 1)
                U = np.zeros((R, B, d))
                Z = np.zeros((R, B, 2, m))
                for r in np.flatnonzero(active):
                    U[r] = pt.sample_batch(pkind, d, B, gens[r])
                    Z[r] = gens[r].standard_normal((B, 2, m))
            gamma, delta = sched.step(k), sched.smoothing(k)
            G, yp, ys, ncl = estimate_from_draws(kind, obj, X, delta, U[:, j], Z[:, j])
            gnorm = np.linalg.norm(G, axis=1)
            clamped += np.where(active, ncl, 0)
            if keep_trajectory and (k - 1) % thin == 0:
                s = (k - 1) // thin
                t_x[active, s] = X[active]
                t_f[active, s] = obj.spec.eval_true(X[active])
                t_g[active, s] = gnorm[active]
            if randomized:
                history[active, k - 1] = X[active]
            used[active] = k

            # once delta * u is below the rounding resolution of x, the
            # difference quotient is exactly zero and says nothing about f
            lost = np.all(X + delta * U[:, j] == X, axis=1)
            bad = active & (lost | ~(np.isfinite(gnorm) & np.isfinite(yp) & np.isfinite(ys)))
            reason[bad] = NUMERIC_ERROR
            active &= ~bad
            done = active & (gnorm <= sched.epsilon_stop)
            reason[done] = EPSILON_REACHED
            active &= ~done

            X_new = X - gamma * G
            blown = active & ~np.all(np.isfinite(X_new), axis=1)
            reason[blown] = NUMERIC_ERROR
            active &= ~blown
            X[active] = X_new[active]
            if not active.any():
                break

    records = []
    f_final = obj.spec.eval_true(X)
    for r in range(R):
        traj = None
        if keep_trajectory:
            n_keep = (used[r] - 1) // thin + 1
            ks = np.arange(1, N + 1, thin)[:n_keep]
            traj = Trajectory(ks, t_x[r, :n_keep], t_f[r, :n_keep], t_g[r, :n_keep], thin)
        rec = RunRecord(
            stop_reason=reason[r], iterations_used=int(used[r]), final_x=X[r].copy(),
            final_f_true=float(f_final[r]), seed=seeds[r], trajectory=traj,
            clamped_noise_evals=int(clamped[r]), x1=X1[r],
        )
        if randomized:
            R_idx = int(gens[r].integers(1, used[r] + 1))
            rec.selected_R = R_idx
            rec.selected_x_R = history[r, R_idx - 1].copy()
        records.append(rec)
    return records


def run(obj: NoisyObjective, kind: EstimatorKind, x1, sched: ScheduleConfig, rng,
        keep_trajectory: bool = True) -> RunRecord:
    """Run the iteration from ``x1`` until ||g_k|| <= epsilon or the horizon."""
    x1 = np.asarray(x1, dtype=float)
    if x1.shape != (obj.dim,):
        raise ValueError(f"expected a start point of shape ({obj.dim},), got {x1.shape}")
    return run_many(obj, kind, x1, sched, [rng], keep_trajectory=keep_trajectory)[0]


def run_randomized(obj: NoisyObjective, kind: EstimatorKind, x1, sched: ScheduleConfig, rng,
                   keep_trajectory: bool = True) -> RunRecord:
    """As ``run``, plus an iterate x_R with R uniform on the completed iterations."""
    x1 = np.asarray(x1, dtype=float)
    if x1.shape != (obj.dim,):
        raise ValueError(f"expected a start point of shape ({obj.dim},), got {x1.shape}")
    return run_many(obj, kind, x1, sched, [rng], randomized=True,
                    keep_trajectory=keep_trajectory)[0]
