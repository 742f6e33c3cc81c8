"""
Cubic paths for the harmonic oscillator
=======================================

With a cubic path and the residual enforced at both ends of the step, the
scheme has a closed form.  The map rotates phase space by a fixed angle
slightly smaller than h, so the orbit is kept exactly while the phase
slowly lags.
"""

import numpy as np

from lpvi import PhaseState, StepConfig, harmonic_model, integrate_fixed

m = harmonic_model()
h = 0.01
n = int(round(10 * 2 * np.pi / h))
tr = integrate_fixed(m, PhaseState(0.0, [1.0], [0.0]), h, n,
                     StepConfig(S=3, enforcement="endpoints"))
q, p = tr.q[:, 0], tr.p[:, 0]

# the exact map rotates by arccos((6 - 2h^2) / (6 + h^2)) per step
theta = np.arccos((6 - 2 * h * h) / (6 + h * h))
print(f"rotation per step {theta:.15f}, lag per step {h - theta:.3e} (h^3/24 = {h**3 / 24:.3e})")

# per-period maxima: the distance from the unit circle stays flat, the
# phase error grows linearly
period = int(round(2 * np.pi / h))
err = np.abs(q - np.cos(tr.t))
orbit = np.abs(np.hypot(q, p) - 1)
print("period   max |q - cos t|   max | |(q, p)| - 1 |")
for k in range(10):
    sl = slice(k * period, (k + 1) * period + 1)
    print(f"{k + 1:6d}   {err[sl].max():15.3e}   {orbit[sl].max():21.3e}")
