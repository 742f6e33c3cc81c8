"""Local path fitting variational integrator.

Each step fits a Bernstein polynomial path whose Euler-Lagrange residual
vanishes at collocation nodes, giving a symmetric, symplectic one-step map
in position-momentum form.
"""

from .bernstein import (
    approximant_value,
    basis_all,
    basis_derivative,
    basis_matrix,
    basis_second_derivative,
    basis_value,
    binomial,
)
from .integrator import (
    AdaptiveConfig,
    Diagnostics,
    IntegrationError,
    Invariants,
    StepLimitError,
    StiffnessError,
    Trajectory,
    diagnostics,
    integrate_adaptive,
    integrate_fixed,
    invariants,
)
from .lagrangian import (
    LagrangianModel,
    PhaseState,
    SingularConfigurationError,
    finite_difference_model,
    free_particle_model,
    harmonic_model,
    kepler_initial_state,
    kepler_model,
    mechanical_model,
    nbody_model,
    outer_solar_initial_state,
    outer_solar_model,
)
from .path import BernsteinPath, CollocationGrid, el_residual, make_grid
from .reference import KEPLER_PERIOD, kepler_exact_state, rk4_integrate, rk4_step
from .stepper import (
    ConvergenceError,
    SingularStepError,
    StepConfig,
    StepError,
    StepOutcome,
    assemble_residual,
    step,
    symplecticity_defect,
)

__version__ = "0.1.0"
