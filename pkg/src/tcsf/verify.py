"""Property suites with pinned seeds: moments, bias, amse, trap, rates.

Each check yields ``Entry`` rows carrying the measured value, the bound it
is held to and the signed margin (positive means inside the bound).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import analysis as an
from . import perturbations as pt
from .estimators import BTCSF_KIND, TCSF_CRN_KIND, TCSF_KIND, estimate_many
from .objectives import NoiseModel, NoisyObjective, make_quadratic, make_rosenbrock, make_saddle_test
from .optimizer import NUMERIC_ERROR, TheoremConstants, power_schedule, run_many, theorem_schedule

SUITES = ("moments", "bias", "amse", "trap", "rates")


@dataclass
class Entry:
    suite: str
    name: str
    measured: float
    bound: float
    relation: str
    passed: bool
    detail: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        if self.relation in ("<=", "<"):
            return self.bound - self.measured
        return self.measured - self.bound

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.suite}/{self.name}: measured={self.measured:.4g} "
                f"{self.relation} bound={self.bound:.4g} (margin {self.margin:.3g})")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["margin"] = self.margin
        return out


def _check(suite, name, measured, relation, bound, **detail) -> Entry:
    measured, bound = float(measured), float(bound)
    ok = {"<=": measured <= bound, "<": measured < bound,
          ">=": measured >= bound, ">": measured > bound}[relation]
    passed = ok and math.isfinite(measured) and math.isfinite(bound)
    return Entry(suite, name, measured, bound, relation, bool(passed), detail)


# moments

def moment_bound(dims=(2, 4, 8), rs=(1, 2, 3), n_samples: int = 10**6, seed: int = 11) -> list[Entry]:
    """Monte Carlo E|u|^(2r) against c11 / (r + d) for the truncated Cauchy law."""
    out = []
    for d in dims:
        c11 = pt.c11_constant(d)
        u = pt.sample_batch(pt.TRUNCATED_CAUCHY_KIND, d, n_samples, np.random.default_rng([seed, d]))
        sq = np.sum(u * u, axis=1)
        for r in rs:
            est = pt._mean_se(sq ** r)
            out.append(_check("moments", f"d={d},r={r}", est.value, "<=", c11 / (r + d) + 3 * est.se,
                              c11_bound=c11 / (r + d), se=est.se))
    return out


# bias

def scale_recovery(n_points: int = 3, n_samples: int = 10**6, seed: int = 21) -> list[Entry]:
    """Balanced TCSF mean on the noiseless quadratic against c2_hat * grad f, as z-scores."""
    obj = NoisyObjective(make_quadratic(), NoiseModel("none"))
    rng = np.random.default_rng(seed)
    c = pt.estimate_constants(pt.TRUNCATED_CAUCHY_KIND, obj.dim, n_samples, rng)
    box = obj.spec.domain_box
    out = []
    for i in range(n_points):
        x = rng.uniform(box[:, 0], box[:, 1])
        g = an._accumulate(lambda m, gen: estimate_many(BTCSF_KIND, obj, x, 1.0, m, gen),
                           n_samples, 1 << 17, rng)
        grad = obj.spec.grad_true(x)
        se = np.sqrt(g[1] ** 2 + (c.c2_se * grad) ** 2)
        z = np.abs(g[0] - c.c2 * grad) / se
        out.append(_check("bias", f"scale_recovery[{i}]", z.max(), "<=", 4.0,
                          x=x.tolist(), c2_hat=c.c2, c2_se=c.c2_se, mean=g[0].tolist()))
    return out


def bias_order(n_samples: int = 10**6, seed: int = 31, z: float = 2.0) -> list[Entry]:
    """Bias slope of balanced TCSF on noiseless Rosenbrock and the pointwise comparison."""
    obj = NoisyObjective(make_rosenbrock(4), NoiseModel("none"))
    x = np.full(4, 0.5)
    grid = [0.4, 0.2, 0.1, 0.05]
    c = pt.estimate_constants(pt.TRUNCATED_CAUCHY_KIND, 4, n_samples, seed)
    c2 = pt.MCEstimate(c.c2, c.c2_se)
    bal = an.bias_probe(BTCSF_KIND, obj, x, grid, n_samples, c2, [seed, 1])
    one = an.bias_probe(TCSF_KIND, obj, x, grid, n_samples, c2, [seed, 2])
    slope = bal.fitted_slope if not bal.degenerate else math.nan
    out = [_check("bias", "balanced_slope", slope, ">=", 1.7, report=bal.to_dict())]
    for i, d in enumerate(grid):
        tol = z * math.hypot(bal.bias_se[i], one.bias_se[i])
        out.append(_check("bias", f"balanced<=onesided[delta={d:g}]", bal.bias_norms[i] - one.bias_norms[i],
                          "<=", tol, balanced=bal.bias_norms[i], onesided=one.bias_norms[i]))
    return out


def second_moment(n_samples: int = 10**5, seed: int = 41) -> list[Entry]:
    """Slope of log E|G|^2 against log delta for one-sided TCSF on the Type-1 quadratic."""
    obj = NoisyObjective(make_quadratic(), NoiseModel("type1"))
    x = np.full(4, 50.0)
    grid = [0.4, 0.2, 0.1, 0.05]
    rep = an.second_moment_probe(TCSF_KIND, obj, x, grid, n_samples, seed)
    crn = an.second_moment_probe(TCSF_CRN_KIND, obj, x, grid, n_samples, seed + 1)
    out = [
        _check("bias", "second_moment_slope>=", rep.fitted_slope, ">=", -2.4, report=rep.to_dict()),
        _check("bias", "second_moment_slope<=", rep.fitted_slope, "<=", -1.6),
    ]
    for i, d in enumerate(grid):
        tol = 2 * math.hypot(rep.second_moment_se[i], crn.second_moment_se[i])
        out.append(_check("bias", f"crn<=onesided[delta={d:g}]",
                          crn.second_moments[i] - rep.second_moments[i], "<=", tol))
    return out


# amse

def amse_remarks(n_samples: int = 10**6, seed: int = 51) -> list[Entry]:
    """AMSE ratios of GSF and SPSA over TCSF with Monte Carlo c_bar."""
    c = pt.estimate_constants(pt.TRUNCATED_CAUCHY_KIND, 4, n_samples, seed)
    g = pt.estimate_constants(pt.GAUSSIAN_KIND, 4, n_samples, seed + 1)
    out = [
        _check("amse", "c_bar<=1", c.c_bar, "<=", 1.0, se=c.c_bar_se),
        _check("amse", "gaussian_m4_dev", abs(g.marginal_m4 - 3.0), "<=", 3 * g.marginal_m4_se,
               m4=g.marginal_m4, se=g.marginal_m4_se),
    ]
    ups = an.upsilon_plus(1.0, 1.0 / 6.0)
    ros = NoisyObjective(make_rosenbrock(4), NoiseModel("type1"))
    H = ros.spec.hess_true(ros.spec.known_minimizer)
    gamma0 = ups / float(np.linalg.eigvalsh(H)[0])
    inp = an.amse_inputs_for(ros, gamma0, 1.0, ups, c.c_bar, rng=seed + 2)
    out.append(_check("amse", "ratio_gsf(T!=0)", an.amse_ratio("gsf", inp), ">", 1.0,
                      T=inp.T_vector.tolist(), gamma0=gamma0))
    out.append(_check("amse", "ratio_spsa(T!=0)", an.amse_ratio("spsa", inp), ">=", 1.0))
    quad = NoisyObjective(make_quadratic(), NoiseModel("type1"))
    Hq = quad.spec.hess_true(quad.spec.known_minimizer)
    inp0 = an.amse_inputs_for(quad, ups / float(np.linalg.eigvalsh(Hq)[0]), 1.0, ups, c.c_bar, rng=seed + 3)
    for base in ("gsf", "spsa"):
        r = an.amse_ratio(base, inp0)
        out.append(_check("amse", f"ratio_{base}(T=0)_dev", abs(r - 1.0), "<=", 0.0, ratio=r))
    return out


# trap

TRAP_NOISE = NoiseModel("additive", 0.5)
TRAP_SCHEDULE = dict(gamma0=0.3, alpha=0.75, delta0=0.5, phi=0.1, horizon=5000)


def trap_avoidance(n_runs: int = 200, seed: int = 61, radius: float = 0.2) -> list[Entry]:
    """Runs started exactly at the saddle that end near one of the minima (+-1, 0)."""
    obj = NoisyObjective(make_saddle_test(), TRAP_NOISE)
    t = TRAP_SCHEDULE
    sched = power_schedule(t["gamma0"], t["alpha"], t["delta0"], t["phi"], t["horizon"], epsilon_stop=0.0)
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n_runs)]
    recs = run_many(obj, TCSF_KIND, np.zeros(2), sched, seeds, keep_trajectory=False)
    X = np.array([r.final_x for r in recs])
    mins = np.array([[1.0, 0.0], [-1.0, 0.0]])
    dist = np.min(np.linalg.norm(X[:, None, :] - mins[None], axis=2), axis=1)
    frac = float(np.mean(dist <= radius))
    return [_check("trap", "fraction_near_minimum", frac, ">=", 0.95,
                   n_runs=n_runs, noise=TRAP_NOISE.label(), schedule=sched.to_dict(),
                   fraction_right=float(np.mean(X[:, 0] > 0)))]


# rates

def rate_exponent(n_seeds: int = 100, gamma0: float | None = None, delta0: float = 1.0,
                  seed: int = 71) -> list[Entry]:
    """k^(2/3) E|x_k - x*|^2 at k = 1e4 against twice its value at k = 1e3.

    ``gamma0`` defaults to the smallest value with gamma0 * lambda_min(H) >= upsilon / 2.
    """
    obj = NoisyObjective(make_quadratic(), NoiseModel("type1"))
    x_star = obj.spec.known_minimizer
    ups = an.upsilon_plus(1.0, 1.0 / 6.0)
    lam_min = float(np.linalg.eigvalsh(obj.spec.hess_true(x_star))[0])
    if gamma0 is None:
        gamma0 = ups / (2 * lam_min)
    sched = power_schedule(gamma0, 1.0, delta0, 1.0 / 6.0, 10_000, epsilon_stop=0.0)
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n_seeds)]
    recs = run_many(obj, TCSF_KIND, x_star, sched, seeds, keep_trajectory=True)
    n_bad = sum(r.stop_reason == NUMERIC_ERROR for r in recs)

    def a(k):
        errs = []
        for r in recs:
            if r.iterations_used < k:
                # a run that stopped early stays at its last iterate, unless it blew up
                x = r.final_x if r.stop_reason != NUMERIC_ERROR else np.full(obj.dim, np.inf)
            else:
                x = r.trajectory.x[k - 1]
            errs.append(np.sum((x - x_star) ** 2))
        with np.errstate(invalid="ignore", over="ignore"):
            return k ** (2.0 / 3.0) * float(np.mean(errs))

    a3, a4 = a(1000), a(10_000)
    ratio = a4 / a3 if math.isfinite(a3) and a3 > 0 else math.nan
    return [_check("rates", "a_1e4/a_1e3", ratio, "<=", 2.0, a_1e3=a3, a_1e4=a4,
                   gamma0=gamma0, delta0=delta0, numeric_errors=n_bad)]


def theorem_trend(n_seeds: int = 50, Ns=(100, 1000, 10_000), seed: int = 81) -> list[Entry]:
    """Mean |grad f(x_R)|^2 across horizons for the thm3 (one-sided) and thm4 (balanced) schedules."""
    spec = make_quadratic()
    obj = NoisyObjective(spec, NoiseModel("type1"))
    consts = TheoremConstants(dim=4, L=spec.lipschitz_grad_L, c2=pt.exact_c2(4))
    box = spec.domain_box
    start_rng = np.random.default_rng(seed)
    starts = start_rng.uniform(box[:, 0], box[:, 1], size=(n_seeds, 4))
    means = {}
    for which, kind in (("thm3", TCSF_KIND), ("thm4", BTCSF_KIND)):
        for N in Ns:
            sched = theorem_schedule(which, N, consts)
            seeds = [int(s) for s in np.random.SeedSequence([seed, N, len(which), ord(which[-1])])
                     .generate_state(n_seeds)]
            recs = run_many(obj, kind, starts, sched, seeds, randomized=True, keep_trajectory=False)
            vals = [np.sum(spec.grad_true(r.selected_x_R) ** 2) if r.stop_reason != NUMERIC_ERROR else np.inf
                    for r in recs]
            means[(which, N)] = float(np.mean(vals))
    out = []
    for which in ("thm3", "thm4"):
        for a, b in zip(Ns, Ns[1:]):
            out.append(_check("rates", f"{which}:N={b}<=N={a}", means[(which, b)], "<=", means[(which, a)]))
    out.append(_check("rates", f"thm4<=thm3@N={Ns[-1]}", means[("thm4", Ns[-1])], "<=", means[("thm3", Ns[-1])],
                      means={f"{w}:{n}": v for (w, n), v in means.items()}))
    return out


SUITE_CHECKS: dict[str, list[Callable[[], list[Entry]]]] = {
    "moments": [moment_bound],
    "bias": [scale_recovery, bias_order, second_moment],
    "amse": [amse_remarks],
    "trap": [trap_avoidance],
    "rates": [rate_exponent, theorem_trend],
}


def verify_suite(which: str = "all") -> list[Entry]:
    names = SUITES if which == "all" else (which,)
    out = []
    for name in names:
        if name not in SUITE_CHECKS:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
        for check in SUITE_CHECKS[name]:
            out.extend(check())
    return out
