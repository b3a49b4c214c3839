"""Benchmark objectives with analytic derivatives, and the observation noise models.

All ``eval_true``/``grad_true`` callables are vectorized over leading axes: an
input of shape (..., d) gives values of shape (...) and gradients of shape
(..., d).  Hessians and third-derivative tensors take a single point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TYPE1 = "type1"
TYPE2 = "type2"
TYPE3 = "type3"
ADDITIVE = "additive"
NONE = "none"

_NOISE_NAMES = (NONE, TYPE1, TYPE2, TYPE3, ADDITIVE)


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    name: str
    dim: int
    eval_true: Callable[[np.ndarray], np.ndarray]
    grad_true: Callable[[np.ndarray], np.ndarray]
    domain_box: np.ndarray
    hess_true: Optional[Callable[[np.ndarray], np.ndarray]] = None
    third_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_min_value: Optional[float] = None
    known_minimizer: Optional[np.ndarray] = None
    lipschitz_grad_L: Optional[float] = None
    # reflection symmetry point, when the function is even about one
    symmetry_point: Optional[np.ndarray] = None

    def third_deriv_contraction(self, x) -> np.ndarray:
        """T-vector: T_i = -1/6 [D3_iii f + 3 sum_{j != i} D3_jji f] at x.

        Uses the analytic third-derivative tensor when available, otherwise
        central differences of the Hessian with step 1e-3.
        """
        x = np.asarray(x, dtype=float)
        if self.third_deriv is not None:
            t3 = self.third_deriv(x)
        elif self.hess_true is not None:
            t3 = _fd_third_tensor(self.hess_true, x, 1e-3)
        else:
            raise ValueError(f"{self.name}: no Hessian to differentiate")
        diag = np.einsum("iii->i", t3)
        # sum_j D3_jji, then remove the j == i term
        cross = np.einsum("jji->i", t3) - diag
        return -(diag + 3.0 * cross) / 6.0


def _fd_third_tensor(hess, x, h):
    d = x.size
    t3 = np.empty((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        t3[:, :, k] = (hess(x + e) - hess(x - e)) / (2 * h)
    return t3


@dataclass(frozen=True)
class NoiseModel:
    kind: str = NONE
    sigma: float = 5.0

    def __post_init__(self):
        if self.kind not in _NOISE_NAMES:
            raise ValueError(f"unknown noise model {self.kind!r}")
        if self.kind in (TYPE1, ADDITIVE) and not self.sigma > 0:
            raise ValueError(f"noise sigma must be positive, got {self.sigma}")

    def label(self) -> str:
        if self.kind in (TYPE1, ADDITIVE):
            return f"{self.kind}(sigma={self.sigma:g})"
        return self.kind


@dataclass(frozen=True, eq=False)
class NoisyObjective:
    spec: ObjectiveSpec
    noise: NoiseModel = field(default_factory=NoiseModel)
    var_floor: float = 1e-12

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_normals(self) -> int:
        """Standard normals consumed per observation."""
        return self.spec.dim + 1

    def noise_values(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Noise realizations from standard normals ``z`` of shape (..., d+1).

        Returns the noise and a boolean mask marking evaluations where the
        variance had to be clamped.
        """
        kind = self.noise.kind
        shape = x.shape[:-1]
        if kind == NONE:
            return np.zeros(shape), np.zeros(shape, dtype=bool)
        if kind == TYPE1:
            xi = self.noise.sigma * (np.einsum("...i,...i->...", x, z[..., :-1]) + z[..., -1])
            return xi, np.zeros(shape, dtype=bool)
        if kind == ADDITIVE:
            return self.noise.sigma * z[..., 0], np.zeros(shape, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_norm = np.log(np.linalg.norm(x, axis=-1))
            if kind == TYPE2:
                var = log_norm
            else:
                denom = 1.0 + log_norm
                var = np.where(denom > 0, 1.0 / denom, -np.inf)
        lo, hi = self.var_floor, 1.0 / self.var_floor
        bad = ~((var >= lo) & (var <= hi))
        var = np.clip(np.nan_to_num(var, nan=lo, posinf=hi, neginf=lo), lo, hi)
        return np.sqrt(var) * z[..., 0], bad

    def observe_with(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xi, flag = self.noise_values(x, z)
        return self.spec.eval_true(x) + xi, flag


def observe(obj: NoisyObjective, x, rng) -> float:
    """One noisy observation F(x, xi) = f(x) + xi_x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dim,):
        raise ValueError(f"expected a point of shape ({obj.dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    z = rng.standard_normal(obj.n_normals)
    y, _ = obj.observe_with(x, z)
    return float(y)


def _box(lo, hi, dim):
    return np.tile([float(lo), float(hi)], (dim, 1))


def make_rastrigin(dim: int = 4) -> ObjectiveSpec:
    if dim < 1:
        raise ValueError("rastrigin needs dim >= 1")
    two_pi = 2.0 * math.pi

    def f(x):
        x = np.asarray(x, dtype=float)
        return 10.0 * dim + np.sum(x * x - 10.0 * np.cos(two_pi * x), axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x + 20.0 * math.pi * np.sin(two_pi * x)

    def hess(x):
        return np.diag(2.0 + 40.0 * math.pi ** 2 * np.cos(two_pi * np.asarray(x, dtype=float)))

    def third(x):
        t3 = np.zeros((dim, dim, dim))
        idx = np.arange(dim)
        t3[idx, idx, idx] = -80.0 * math.pi ** 3 * np.sin(two_pi * np.asarray(x, dtype=float))
        return t3

    return ObjectiveSpec(
        name="rastrigin", dim=dim, eval_true=f, grad_true=grad, hess_true=hess,
        third_deriv=third, known_min_value=0.0, known_minimizer=np.zeros(dim),
        lipschitz_grad_L=2.0 + 40.0 * math.pi ** 2, domain_box=_box(0, 10, dim),
        symmetry_point=np.zeros(dim),
    )


def make_rosenbrock(dim: int = 4) -> ObjectiveSpec:
    if dim < 2:
        raise ValueError("rosenbrock needs dim >= 2")

    def f(x):
        x = np.asarray(x, dtype=float)
        a, b = x[..., :-1], x[..., 1:]
        return np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2, axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=float)
        a, b = x[..., :-1], x[..., 1:]
        r = b - a * a
        g = np.zeros_like(x)
        g[..., :-1] += -400.0 * a * r - 2.0 * (1.0 - a)
        g[..., 1:] += 200.0 * r
        return g

    def hess(x):
        x = np.asarray(x, dtype=float)
        h = np.zeros((dim, dim))
        for i in range(dim - 1):
            h[i, i] += 1200.0 * x[i] ** 2 - 400.0 * x[i + 1] + 2.0
            h[i + 1, i + 1] += 200.0
            h[i, i + 1] = h[i + 1, i] = -400.0 * x[i]
        return h

    def third(x):
        x = np.asarray(x, dtype=float)
        t3 = np.zeros((dim, dim, dim))
        for i in range(dim - 1):
            t3[i, i, i] += 2400.0 * x[i]
            j = i + 1
            t3[i, i, j] = t3[i, j, i] = t3[j, i, i] = -400.0
        return t3

    return ObjectiveSpec(
        name="rosenbrock", dim=dim, eval_true=f, grad_true=grad, hess_true=hess,
        third_deriv=third, known_min_value=0.0, known_minimizer=np.ones(dim),
        domain_box=_box(0, 10, dim),
    )


QUADRATIC_A = np.array([
    [2.3346, 1.1384, 2.5606, 1.4507],
    [1.1384, 0.7860, 1.2743, 0.9531],
    [2.5606, 1.2743, 2.8147, 1.6487],
    [1.4507, 0.9531, 1.6487, 1.8123],
])
QUADRATIC_B = np.array([0.4218, 0.9157, 0.7922, 0.9595])


def make_quadratic(A=QUADRATIC_A, b=QUADRATIC_B, name: str = "quadratic",
                   domain=(0.0, 150.0)) -> ObjectiveSpec:
    """f(x) = x^T A x / 2 - b^T x; defaults to the 4-d benchmark matrix."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    if not np.allclose(A, A.T):
        raise ValueError("quadratic form matrix must be symmetric")
    eig = np.linalg.eigvalsh(A)
    if np.min(np.abs(eig)) < 1e-10:
        raise ValueError("quadratic form matrix is singular")
    dim = b.size
    x_star = np.linalg.solve(A, b)
    convex = bool(eig[0] > 0)

    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x) - x @ b

    def grad(x):
        return np.asarray(x, dtype=float) @ A - b

    return ObjectiveSpec(
        name=name, dim=dim, eval_true=f, grad_true=grad, hess_true=lambda x: A.copy(),
        third_deriv=lambda x: np.zeros((dim, dim, dim)),
        known_min_value=float(-0.5 * b @ x_star) if convex else None,
        known_minimizer=x_star if convex else None,
        lipschitz_grad_L=float(np.max(np.abs(eig))), domain_box=_box(*domain, dim),
        symmetry_point=x_star,
    )


def make_saddle_test() -> ObjectiveSpec:
    """f(x, y) = (x^2 - 1)^2 + y^2: strict saddle at 0, minima at (+-1, 0)."""

    def f(x):
        x = np.asarray(x, dtype=float)
        return (x[..., 0] ** 2 - 1.0) ** 2 + x[..., 1] ** 2

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.stack([4.0 * x[..., 0] * (x[..., 0] ** 2 - 1.0), 2.0 * x[..., 1]], axis=-1)

    def hess(x):
        return np.diag([12.0 * x[0] ** 2 - 4.0, 2.0])

    def third(x):
        t3 = np.zeros((2, 2, 2))
        t3[0, 0, 0] = 24.0 * x[0]
        return t3

    return ObjectiveSpec(
        name="saddle", dim=2, eval_true=f, grad_true=grad, hess_true=hess,
        third_deriv=third, known_min_value=0.0, known_minimizer=np.array([1.0, 0.0]),
        domain_box=_box(-2, 2, 2), symmetry_point=np.zeros(2),
    )


def make_constant(dim: int = 4, value: float = 1.0) -> ObjectiveSpec:
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(value))

    return ObjectiveSpec(
        name="constant", dim=dim, eval_true=f,
        grad_true=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        hess_true=lambda x: np.zeros((dim, dim)), third_deriv=lambda x: np.zeros((dim, dim, dim)),
        known_min_value=float(value), domain_box=_box(0, 10, dim), lipschitz_grad_L=0.0,
    )


def make_linear(a) -> ObjectiveSpec:
    a = np.asarray(a, dtype=float)
    dim = a.size
    return ObjectiveSpec(
        name="linear", dim=dim, eval_true=lambda x: np.asarray(x, dtype=float) @ a,
        grad_true=lambda x: np.broadcast_to(a, np.shape(x)).copy(),
        hess_true=lambda x: np.zeros((dim, dim)), third_deriv=lambda x: np.zeros((dim, dim, dim)),
        domain_box=_box(-1, 1, dim), lipschitz_grad_L=0.0,
    )


OBJECTIVES = {
    "rastrigin": make_rastrigin,
    "rosenbrock": make_rosenbrock,
    "quadratic": lambda dim=4: make_quadratic(),
    "saddle": lambda dim=2: make_saddle_test(),
    "constant": make_constant,
}


def make_objective(name: str, dim: int | None = None) -> ObjectiveSpec:
    try:
        factory = OBJECTIVES[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}") from None
    return factory() if dim is None else factory(dim)


def make_noise(name: str, sigma: float = 5.0) -> NoiseModel:
    return NoiseModel(name, sigma)
