import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcsf import analysis as an
from tcsf import estimators as es
from tcsf import objectives as ob
from tcsf import perturbations as pt


def hand_inputs(**kw):
    base = dict(gamma0=1.0, delta0=1.0, hessian_at_opt=[[2.0]], T_vector=[1.0],
                sigma_prime_sq=4.0, upsilon_plus=2 / 3, c_bar=1.0)
    base.update(kw)
    return an.AMSEInputs(**base)


def test_amse_hand_example():
    # Phi = 1 / (2 - 1/3) = 0.6, bias (0.6)^2, variance 0.6 * 4/4
    r = an.amse(hand_inputs())
    assert r.value == pytest.approx(0.96)
    assert r.bias_part == pytest.approx(0.36) and r.variance_part == pytest.approx(0.6)


def test_amse_ratio_hand_example():
    assert an.amse_ratio("spsa", hand_inputs(c_bar=0.5)) == pytest.approx(0.96 / 0.69)


def test_amse_zero_T_is_pure_variance():
    H = ob.QUADRATIC_A
    inp = an.AMSEInputs(2000.0, 0.5, H, np.zeros(4), 3.0, 2 / 3, 0.4)
    r = an.amse(inp)
    phi = np.linalg.inv(2000.0 * H - np.eye(4) / 3)
    assert r.bias_part == 0.0
    assert r.value == pytest.approx(np.trace(phi) * 3.0 / 4 / 0.25)
    assert an.amse_ratio("gsf", inp) == 1.0 and an.amse_ratio("spsa", inp) == 1.0


def test_singular_phi():
    with pytest.raises(an.SingularPhiError):
        an.amse(hand_inputs(gamma0=1 / 6))
    with pytest.raises(ValueError):
        an.amse_ratio("rdsa", hand_inputs())
    with pytest.raises(ValueError):
        hand_inputs(hessian_at_opt=[[1.0, 2.0], [0.0, 1.0]], T_vector=[1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(s2=st.floats(0.01, 100), t=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
       cbar=st.floats(0.01, 1.0), g0=st.floats(0.5, 10))
def test_amse_properties(s2, t, cbar, g0):
    inp = hand_inputs(sigma_prime_sq=s2, T_vector=[t], c_bar=cbar, gamma0=g0)
    a, b = an.amse(inp), an.amse(hand_inputs(sigma_prime_sq=2 * s2, T_vector=[t], c_bar=cbar, gamma0=g0))
    assert b.variance_part == pytest.approx(2 * a.variance_part, rel=1e-12)
    assert b.bias_part == a.bias_part
    # c_bar <= 1 and T != 0: GSF strictly worse, SPSA no better
    assert an.amse_ratio("gsf", inp) > 1.0
    assert an.amse_ratio("spsa", inp) >= 1.0


def test_upsilon_plus():
    assert an.upsilon_plus(1.0, 1 / 6) == pytest.approx(2 / 3)
    assert an.upsilon_plus(0.9, 0.2) == 0.0


@settings(max_examples=30, deadline=None)
@given(p=st.floats(-3, 3), c=st.floats(0.1, 10))
def test_loglog_slope_exact_on_power_law(p, c):
    x = np.array([0.4, 0.2, 0.1, 0.05])
    assert an.loglog_slope(x, c * x ** p) == pytest.approx(p, abs=1e-9)


def test_bias_probe_linear_is_degenerate():
    obj = ob.NoisyObjective(ob.make_linear([1.0, -2.0, 0.5, 3.0]), ob.make_noise("none"))
    rep = an.bias_probe(es.BTCSF_KIND, obj, np.zeros(4), [0.4, 0.2, 0.1, 0.05], 10**4, 0.43, 0)
    assert rep.degenerate and rep.fitted_slope is None
    assert all(b <= 1e-9 for b in rep.bias_norms)
    with pytest.raises(an.DegenerateFitError):
        an.require_fit(rep)


def test_bias_probe_symmetric_point():
    # rastrigin is even about 0, so both TCSF variants have zero mean there
    obj = ob.NoisyObjective(ob.make_rastrigin(4), ob.make_noise("none"))
    c2 = pt.MCEstimate(pt.exact_c2(4), 0.0)
    for kind in (es.TCSF_KIND, es.BTCSF_KIND):
        rep = an.bias_probe(kind, obj, obj.spec.symmetry_point, [0.2, 0.1], 10**5, c2, 1)
        assert all(b <= 4 * s for b, s in zip(rep.raw_bias_norms, rep.raw_bias_se))


def test_bias_probe_rosenbrock_order():
    obj = ob.NoisyObjective(ob.make_rosenbrock(4), ob.make_noise("none"))
    c = pt.estimate_constants(pt.TRUNCATED_CAUCHY_KIND, 4, 10**5, 2)
    rep = an.bias_probe(es.BTCSF_KIND, obj, np.full(4, 0.5), [0.4, 0.2, 0.1, 0.05], 2 * 10**5,
                        pt.MCEstimate(c.c2, c.c2_se), 3)
    assert 1.7 <= an.require_fit(rep) <= 2.5
    assert json.loads(json.dumps(rep.to_dict()))["delta_grid"] == [0.4, 0.2, 0.1, 0.05]


def test_probe_grid_must_decrease():
    obj = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("none"))
    with pytest.raises(ValueError):
        an.bias_probe(es.BTCSF_KIND, obj, np.zeros(4), [0.1, 0.2], 100, 0.4, 0)
    with pytest.raises(ValueError):
        an.second_moment_probe(es.TCSF_KIND, obj, np.zeros(4), [0.1, 0.1], 100, 0)
    with pytest.raises(ValueError):
        an.bias_probe(es.BTCSF_KIND, obj, np.zeros(4), [0.2, 0.1], 100, None, 0)


def test_standard_errors_shrink_with_samples():
    obj = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("type1"))
    x = np.full(4, 20.0)
    a = an.second_moment_probe(es.TCSF_KIND, obj, x, [0.2, 0.1], 25_000, 4)
    b = an.second_moment_probe(es.TCSF_KIND, obj, x, [0.2, 0.1], 100_000, 5)
    for sa, sb in zip(a.second_moment_se, b.second_moment_se):
        assert sb / sa == pytest.approx(0.5, rel=0.2)


def test_second_moment_linear_flat():
    obj = ob.NoisyObjective(ob.make_linear([1.0, 2.0, 3.0, 4.0]), ob.make_noise("none"))
    rep = an.second_moment_probe(es.BTCSF_KIND, obj, np.zeros(4), [0.4, 0.2, 0.1, 0.05], 10**5, 6)
    assert abs(rep.fitted_slope) < 0.05


def test_second_moment_type1_slope_and_crn():
    obj = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("type1"))
    x = np.full(4, 50.0)
    grid = [0.4, 0.2, 0.1, 0.05]
    one = an.second_moment_probe(es.TCSF_KIND, obj, x, grid, 5 * 10**4, 7)
    crn = an.second_moment_probe(es.TCSF_CRN_KIND, obj, x, grid, 5 * 10**4, 8)
    assert -2.4 <= one.fitted_slope <= -1.6
    assert all(c <= o for c, o in zip(crn.second_moments, one.second_moments))


def test_sigma_prime_sq():
    obj = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("type1"))
    x = np.array([1.0, 2.0, 2.0, 0.0])   # |x|^2 = 9
    est = an.estimate_sigma_prime_sq(obj, x, 10**5, 0)
    assert abs(est.value - 2 * 25 * 10) <= 4 * est.se


def test_amse_inputs_for_quadratic():
    obj = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("type1"))
    inp = an.amse_inputs_for(obj, 500.0, 1.0, 2 / 3, 0.39, n_noise=10**4)
    assert np.all(inp.T_vector == 0)
    assert np.array_equal(inp.hessian_at_opt, ob.QUADRATIC_A)
    with pytest.raises(ValueError):
        an.amse_inputs_for(ob.NoisyObjective(ob.make_linear([1.0])), 1.0, 1.0, 0.0, 0.3)
