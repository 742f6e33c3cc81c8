"""
Kepler orbit: energy error against path degree
==============================================

One period of an eccentric orbit at a fixed step.  Raising the degree of the
path lowers the energy error quickly until round-off takes over.
"""

from lpvi import KEPLER_PERIOD, StepConfig, integrate_fixed, kepler_initial_state, kepler_model
from lpvi.reference import kepler_exact_state

import numpy as np

m = kepler_model()
eps, h = 0.5, 0.05
n = int(round(KEPLER_PERIOD / h))
s0 = kepler_initial_state(eps)

print(" S   max rel energy error   final position error   mean Newton iters")
for S in range(3, 13):
    tr = integrate_fixed(m, s0, h, n, StepConfig(S=S))
    pos = np.linalg.norm(tr.q[-1] - kepler_exact_state(eps, tr.t[-1]).q)
    print(f"{S:2d}   {tr.max_rel_energy_error:20.2e}   {pos:20.2e}   "
          f"{tr.newton_iterations.mean():17.2f}")
