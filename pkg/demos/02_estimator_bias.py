# Bias and variance of the smoothed-functional gradient estimators
#
# On the noiseless Rosenbrock function the balanced estimator's bias shrinks
# like delta^2. Under Type-1 noise the one-sided estimator's second moment
# grows like delta^-2.

import numpy as np

from tcsf import analysis as an
from tcsf import estimators as es
from tcsf import objectives as ob
from tcsf import perturbations as pt

grid = [0.4, 0.2, 0.1, 0.05]
ros = ob.NoisyObjective(ob.make_rosenbrock(4), ob.make_noise("none"))
c2 = pt.MCEstimate(pt.exact_c2(4), 0.0)

for kind in (es.BTCSF_KIND, es.TCSF_KIND):
    rep = an.bias_probe(kind, ros, np.full(4, 0.5), grid, 2 * 10**5, c2, rng=0)
    norms = "  ".join(f"{b:.2e}" for b in rep.bias_norms)
    print(f"{kind.label():6s} bias by delta: {norms}   slope {rep.fitted_slope:.2f}")

# One-sided TCSF on the noisy quadratic, far from the minimum.

quad = ob.NoisyObjective(ob.make_quadratic(), ob.make_noise("type1"))
rep = an.second_moment_probe(es.TCSF_KIND, quad, np.full(4, 50.0), grid, 10**5, rng=1)
print("E|G|^2 by delta:", "  ".join(f"{m:.3e}" for m in rep.second_moments))
print(f"log-log slope {rep.fitted_slope:.2f}")

# Reusing the noise draw for both evaluations removes most of that variance.

crn = an.second_moment_probe(es.TCSF_CRN_KIND, quad, np.full(4, 50.0), grid, 10**5, rng=2)
print("with common random numbers:", "  ".join(f"{m:.3e}" for m in crn.second_moments))

# Asymptotic MSE ratios of the baselines over TCSF on Rosenbrock.

inp = an.amse_inputs_for(ros, gamma0=1.0, delta0=1.0, upsilon_plus=2 / 3, c_bar=pt.exact_c_bar(4),
                         n_noise=10**4)
print(f"AMSE ratio gsf/tcsf {an.amse_ratio('gsf', inp):.3f}   spsa/tcsf {an.amse_ratio('spsa', inp):.3f}")
