import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from tcsf import perturbations as pt

TC = pt.TRUNCATED_CAUCHY_KIND


def _mp_radial(fn, d):
    # independent oracle: mpmath quadrature of the radial kernel
    return mpmath.quad(lambda r: fn(r) * r ** (d - 1) * (1 + r * r) ** (-(d + 1) / mpmath.mpf(2)), [0, 1])


def _mp_c1(d):
    pref = mpmath.gamma((d + 1) / mpmath.mpf(2)) / mpmath.pi ** ((d + 1) / mpmath.mpf(2))
    area = 2 * mpmath.pi ** (d / mpmath.mpf(2)) / mpmath.gamma(d / mpmath.mpf(2))
    return float(pref * area * _mp_radial(lambda r: 1, d))


def test_c1_closed_forms():
    # d=1: (1/pi) * 2 * atan(1); d=2: 1 - 1/sqrt(2)
    assert pt.compute_normalization(1) == pytest.approx(0.5, abs=1e-12)
    assert pt.compute_normalization(2) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 8])
def test_c1_matches_mpmath(d):
    assert pt.compute_normalization(d) == pytest.approx(_mp_c1(d), rel=1e-10)


def test_density_integrates_to_one_cartesian_d2():
    val, _ = integrate.dblquad(
        lambda y, x: pt.density_truncated_cauchy(np.array([x, y])),
        -1, 1, lambda x: -math.sqrt(1 - x * x), lambda x: math.sqrt(1 - x * x),
        epsabs=1e-10, epsrel=1e-10,
    )
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("d", [1, 4, 8])
def test_density_integrates_to_one_radial(d):
    delta = 0.7
    val, _ = integrate.quad(
        lambda r: pt.sphere_area(d) * r ** (d - 1) * pt.density_truncated_cauchy(np.r_[r, np.zeros(d - 1)], delta),
        0, delta, epsabs=1e-12,
    )
    assert val == pytest.approx(1.0, abs=1e-6)


def test_density_examples():
    assert pt.density_truncated_cauchy(np.array([0.0]), 1.0) == pytest.approx(1 / (math.pi * 0.5))
    assert pt.density_truncated_cauchy(np.array([0.8, 0.7]), 1.0) == 0.0
    with pytest.raises(ValueError):
        pt.density_truncated_cauchy(np.zeros(2), 0.0)


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_normalization_by_monte_carlo(d):
    # uniform-ball importance estimate of the density's integral, with the
    # radius stratified so the check is not dominated by sampling noise
    rng = np.random.default_rng(d)
    n = 10**6
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = ((np.arange(n) + rng.random(n)) / n) ** (1.0 / d)
    u = direction * radius[:, None]
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    dens = pt.density_truncated_cauchy(u)
    assert abs(vol * dens.mean() - 1.0) < 1e-3


def test_c11_against_mpmath():
    for d in (1, 2, 4, 8):
        oracle = 1.0 / float(_mp_radial(lambda r: 1, d))
        assert pt.c11_constant(d) == pytest.approx(oracle, rel=1e-9)


# frozen quadrature oracle values (mpmath, 30 digits)
C2_EXACT = {1: 0.363380227632, 2: 0.396447092946, 4: 0.429097093777, 8: 0.455759}
C_BAR_EXACT = {1: 0.151173, 2: 0.252449, 4: 0.387961, 8: 0.542950}


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_exact_constants_against_oracle(d):
    c2 = float((d + 1) / d * _mp_radial(lambda r: r * r / (1 + r * r), d) / _mp_radial(lambda r: 1, d))
    cb = float(_mp_radial(lambda r: r ** 4, d) / _mp_radial(lambda r: 1, d))
    assert pt.exact_c2(d) == pytest.approx(c2, rel=1e-9)
    assert pt.exact_c_bar(d) == pytest.approx(cb, rel=1e-9)
    assert pt.exact_c2(d) == pytest.approx(C2_EXACT[d], abs=1e-5)
    assert pt.exact_c_bar(d) == pytest.approx(C_BAR_EXACT[d], abs=1e-5)


def test_monte_carlo_constants_match_quadrature():
    c = pt.estimate_constants(TC, 4, 10**6, 1)
    assert abs(c.c2 - pt.exact_c2(4)) < 4 * c.c2_se
    assert abs(c.c_bar - pt.exact_c_bar(4)) < 4 * c.c_bar_se
    assert c.c_bar <= 1.0
    assert c.c1 == pt.compute_normalization(4) and c.c11 == pt.c11_constant(4)
    assert c.seed == 1 and c.n_samples == 10**6


def test_estimate_constants_non_cauchy_leaves_c1_unset():
    c = pt.estimate_constants(pt.GAUSSIAN_KIND, 3, 10**4, 0)
    assert c.c1 is None and c.c11 is None
    assert c.c2 > 0 and math.isfinite(c.c2)


def test_estimate_constants_needs_samples():
    with pytest.raises(ValueError):
        pt.estimate_constants(TC, 4, 9999, 0)


def test_constants_serialize():
    d = pt.estimate_constants(TC, 2, 10**4, 3).to_dict()
    assert {"dim", "c1", "c2", "c2_se", "c_bar", "c_bar_se", "c11", "n_samples", "seed"} <= set(d)


def test_radius_distribution_matches_density():
    # KS test of |u| against the CDF implied by the density
    from scipy import stats
    d = 4
    r = np.linalg.norm(pt.sample_batch(TC, d, 20000, 5), axis=1)
    norm = pt.radial_integral(lambda s: 1.0, d)
    cdf = np.vectorize(lambda t: integrate.quad(
        lambda s: s ** (d - 1) * (1 + s * s) ** (-(d + 1) / 2), 0, t)[0] / norm)
    assert stats.kstest(r, cdf).pvalue > 0.001


@settings(max_examples=20, deadline=None)
@given(d=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_bounded_kinds_stay_in_ball(d, seed):
    u = pt.sample_batch(TC, d, 200, seed)
    assert u.shape == (200, d)
    assert np.all(np.linalg.norm(u, axis=1) <= 1.0 + 1e-12)
    s = pt.sample_batch(pt.T_PROJECTED_SPHERE_KIND, d, 200, seed)
    assert np.allclose(np.linalg.norm(s, axis=1), 1.0)


def test_rademacher_support():
    u = pt.sample_batch(pt.RADEMACHER_KIND, 3, 1000, 0)
    assert set(np.unique(u)) == {-1.0, 1.0}


def test_uniform_interval():
    k = pt.PerturbationKind.uniform(-5, 5)
    u = pt.sample_batch(k, 3, 10000, 0)
    assert u.min() >= -5 and u.max() <= 5
    with pytest.raises(ValueError):
        pt.PerturbationKind.uniform(1, 1)
    with pytest.raises(ValueError):
        pt.PerturbationKind("levy")


def test_sample_is_seeded():
    a = pt.sample(TC, 4, 7)
    b = pt.sample(TC, 4, 7)
    assert np.array_equal(a.u, b.u) and a.kind == TC


@pytest.mark.parametrize("kind", [TC, pt.GAUSSIAN_KIND, pt.RADEMACHER_KIND, pt.T_PROJECTED_SPHERE_KIND])
def test_symmetry_and_decorrelation(kind):
    d = 4
    u = pt.sample_batch(kind, d, 10**6, 11)
    w = u / (1 + np.sum(u * u, axis=1, keepdims=True))
    for arr in (u, w):
        m, se = arr.mean(0), arr.std(0) / 1e3
        assert np.all(np.abs(m) <= 4 * se)
    off = (d + 1) * u[:, 0] * u[:, 1] / (1 + np.sum(u * u, axis=1))
    assert abs(off.mean()) <= 4 * off.std() / 1e3


def test_moment_examples():
    m = pt.moment(TC, 1, 4, 10**5, 0)
    assert m.value <= 1.0
    for r in (1, 2, 3):
        m = pt.moment(TC, r, 4, 10**6, r)
        assert m.value <= pt.c11_constant(4) / (r + 4) + 3 * m.se
    s = pt.moment(pt.T_PROJECTED_SPHERE_KIND, 2, 3, 1000, 0)
    assert s.value == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        pt.moment(TC, 0, 4, 100, 0)


def test_moment_bound_holds_analytically():
    # quadrature value of E|u|^2r, no sampling error
    for d in (2, 4, 8):
        for r in (1, 2, 3):
            exact = pt.radial_expectation(lambda s: s ** (2 * r), d)
            assert exact <= pt.c11_constant(d) / (r + d)


def test_mean_vector_near_zero_d4():
    u = pt.sample_batch(TC, 4, 10**6, 3)
    assert np.all(np.abs(u.mean(0)) <= 3 * u.std(0) / 1e3)
