# Constants of the truncated Cauchy perturbation
#
# The sampler draws u from a Cauchy-shaped density restricted to the unit ball.
# Every estimator constant used elsewhere comes from radial quadrature, and the
# Monte Carlo estimates should agree with it.

import numpy as np

from tcsf import perturbations as pt

# Quadrature values for a few dimensions.

for d in (1, 2, 4, 8):
    print(f"d={d}  c1={pt.compute_normalization(d):.6f}  c2={pt.exact_c2(d):.6f}  "
          f"c_bar={pt.exact_c_bar(d):.6f}  c11={pt.c11_constant(d):.4f}")

# Monte Carlo estimates at d=4 carry a standard error.

c = pt.estimate_constants(pt.TRUNCATED_CAUCHY_KIND, 4, 10**6, 0)
print(f"MC c2 = {c.c2:.5f} +- {c.c2_se:.5f}   quadrature {pt.exact_c2(4):.5f}")
print(f"MC c_bar = {c.c_bar:.5f} +- {c.c_bar_se:.5f}   quadrature {pt.exact_c_bar(4):.5f}")

# Samples stay in the ball, and the radius piles up near the boundary as d grows.

for d in (1, 4, 8):
    r = np.linalg.norm(pt.sample_batch(pt.TRUNCATED_CAUCHY_KIND, d, 10**5, 1), axis=1)
    print(f"d={d}  max |u|={r.max():.4f}  median |u|={np.median(r):.3f}")

# The moment bound E|u|^2r <= c11/(r+d), checked by quadrature.

for r in (1, 2, 3):
    m = pt.radial_expectation(lambda s: s ** (2 * r), 4)
    print(f"r={r}  E|u|^{2 * r}={m:.4f}  bound={pt.c11_constant(4) / (r + 4):.4f}")
