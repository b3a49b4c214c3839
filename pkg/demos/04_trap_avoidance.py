# Escaping a saddle point
#
# The saddle test objective has a saddle at the origin and minima at (+-1, 0).
# Started exactly on the saddle, noisy TCSF iterates leave it and settle at
# one of the two minima.

import numpy as np

from tcsf import estimators as es
from tcsf import objectives as ob
from tcsf import optimizer as op
from tcsf.verify import TRAP_NOISE, TRAP_SCHEDULE

obj = ob.NoisyObjective(ob.make_saddle_test(), TRAP_NOISE)
sched = op.power_schedule(TRAP_SCHEDULE["gamma0"], TRAP_SCHEDULE["alpha"], TRAP_SCHEDULE["delta0"],
                          TRAP_SCHEDULE["phi"], TRAP_SCHEDULE["horizon"], epsilon_stop=0.0)
recs = op.run_many(obj, es.TCSF_KIND, np.zeros(2), sched, list(range(50)), keep_trajectory=False)
ends = np.array([r.final_x for r in recs])
dist = np.minimum(np.linalg.norm(ends - [1, 0], axis=1), np.linalg.norm(ends + [1, 0], axis=1))
print(f"{np.mean(dist <= 0.2):.0%} of runs end within 0.2 of a minimum")
print(f"{np.mean(ends[:, 0] > 0):.0%} went right")

# Without noise the gradient at the saddle is exactly zero, but the random
# perturbations still push the iterate off it.

quiet = ob.NoisyObjective(ob.make_saddle_test(), ob.make_noise("none"))
rec = op.run(quiet, es.TCSF_KIND, np.zeros(2), sched, 3)
print("noiseless end point:", rec.final_x.round(3))
