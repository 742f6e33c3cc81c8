"""
The outer solar system
======================

Sun, the four giant planets and Pluto under mutual gravity, in days,
astronomical units and solar masses.  A degree-6 path with 50-day steps
holds energy and angular momentum over a million days.  Pass a smaller
day count on the command line for a quick look.
"""

import sys
import time

import numpy as np

from lpvi import StepConfig, integrate_fixed
from lpvi.lagrangian import OUTER_SOLAR_MASSES, outer_solar_initial_state, outer_solar_model

days = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0e6
h = 50.0
m = outer_solar_model()
t0 = time.perf_counter()
tr = integrate_fixed(m, outer_solar_initial_state(), h, int(round(days / h)), StepConfig(S=6),
                     decimate=20)
print(f"{tr.n_steps} steps in {time.perf_counter() - t0:.1f} s")
print(f"max rel energy error           {tr.max_rel_energy_error:.2e}")
print(f"max rel angular momentum error {tr.max_rel_angular_momentum_error:.2e}")

# heliocentric distances at the start and the end
nb = OUTER_SOLAR_MASSES.size
q = tr.q.reshape(len(tr), nb, 3)
r = np.linalg.norm(q[:, 1:] - q[:, :1], axis=2)
names = ["Jupiter", "Saturn", "Uranus", "Neptune", "Pluto"]
for i, name in enumerate(names):
    print(f"{name:8s} r = {r[0, i]:6.2f} AU -> {r[-1, i]:6.2f} AU"
          f"   (range {r[:, i].min():.2f} to {r[:, i].max():.2f})")
