"""
Energy drift: classical Runge-Kutta against the variational map
===============================================================

Both run fifty periods of an eccentric orbit with the same step.  The
energy error of RK4 keeps growing, that of the variational map stays
bounded.
"""

import numpy as np

from lpvi import KEPLER_PERIOD, StepConfig, integrate_fixed, kepler_initial_state, kepler_model
from lpvi.reference import rk4_integrate

m = kepler_model()
per = 125
h = KEPLER_PERIOD / per
s0 = kepler_initial_state(0.5)
e0 = m.energy_of(s0.q, s0.p)

_, q, p = rk4_integrate(m, s0, h, 50 * per)
rk = np.abs((m.energy_of(q, p) - e0) / e0)[1:]
vi = integrate_fixed(m, s0, h, 50 * per, StepConfig(S=5)).rel_energy_error

print("period   RK4 max rel energy error   variational S=5")
for k in (1, 2, 5, 10, 20, 50):
    sl = slice((k - 1) * per, k * per)
    print(f"{k:6d}   {rk[sl].max():24.2e}   {vi[sl].max():15.2e}")
