"""
Adaptive steps on a nearly parabolic orbit
==========================================

At eccentricity 0.99 the body whips round the centre, so a fixed step
is wasteful.  The controller keeps the energy error below 1e-7 and higher
degrees take far fewer steps per period.
"""

from lpvi import (
    KEPLER_PERIOD,
    AdaptiveConfig,
    IntegrationError,
    StepConfig,
    integrate_adaptive,
    kepler_initial_state,
    kepler_model,
)

m = kepler_model()
cfg = AdaptiveConfig(energy_tol=1e-7, h_init=0.01, h_max=1.0, max_steps=10_000)

print(" S   steps   rejected   max rel energy error   smallest h   largest h")
for S in range(3, 13):
    try:
        tr = integrate_adaptive(m, kepler_initial_state(0.99), KEPLER_PERIOD, cfg, StepConfig(S=S))
    except IntegrationError as err:
        print(f"{S:2d}   failed after {err.trajectory.n_steps} steps: {type(err).__name__}")
        continue
    print(f"{S:2d}   {tr.n_steps:5d}   {tr.n_rejected:8d}   {tr.max_rel_energy_error:20.2e}"
          f"   {tr.h_used.min():10.2e}   {tr.h_used.max():9.2e}")
