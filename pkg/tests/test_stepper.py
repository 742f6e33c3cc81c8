import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpvi.bernstein import basis_matrix
from lpvi.lagrangian import (
    PhaseState,
    SingularConfigurationError,
    finite_difference_model,
    free_particle_model,
    harmonic_model,
    kepler_initial_state,
    kepler_model,
    mechanical_model,
    outer_solar_initial_state,
    outer_solar_model,
)
from lpvi.path import CollocationGrid, make_grid
from lpvi.reference import kepler_exact_state
from lpvi.stepper import (
    ConvergenceError,
    SingularStepError,
    StepConfig,
    assemble_residual,
    initial_controls,
    step,
    step_map,
    symplecticity_defect,
)

CUBIC_ENDPOINTS = StepConfig(S=3, enforcement="endpoints")


def closed_form(qk, vk, h):
    qk1 = (6 * h * vk + qk * (6 - 2 * h * h)) / (6 + h * h)
    x = h * h / 3 * (qk + qk1 / 2)
    y = h * h / 6 * (qk1 - qk)
    return qk1, x, y


def cubic_xy(controls):
    # invert the Bernstein form of qk(1-s) + qk1 s + x s(1-s) + y s^2(1-s)
    qk, c1, c2, qk1 = controls
    x = 3 * c1 - 2 * qk - qk1
    y = 3 * c2 - qk - 2 * qk1 - x
    return x, y


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-4, 0.1))
def test_cubic_endpoint_step_matches_closed_form(qk, vk, h):
    out = step(harmonic_model(), PhaseState(0.0, [qk], [vk]), h, CUBIC_ENDPOINTS)
    qk1, x, y = closed_form(qk, vk, h)
    assert abs(out.next.q[0] - qk1) <= 1e-12
    xs, ys = cubic_xy(out.path.controls[:, 0])
    assert abs(xs - x) <= 1e-10 and abs(ys - y) <= 1e-10


def test_cubic_step_numeric_example():
    out = step(harmonic_model(), PhaseState(0.0, [1.0], [0.0]), 0.01, CUBIC_ENDPOINTS)
    # (6 - 2e-4) / (6 + 1e-4)
    assert out.next.q[0] == pytest.approx(0.99995000083332, abs=1e-12)
    assert out.next.t == pytest.approx(0.01)


def test_cubic_update_is_area_preserving():
    h = 0.07
    m = harmonic_model()
    z0 = np.array([0.3, -0.8])
    D = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1.0
        D[:, i] = step_map(m, z0 + e, h, CUBIC_ENDPOINTS) - step_map(m, z0, h, CUBIC_ENDPOINTS)
    assert np.linalg.det(D) == pytest.approx(1.0, abs=1e-11)


def test_assemble_residual_closed_form_controls():
    m = harmonic_model()
    h, qk, vk = 0.1, 0.8, -0.4
    qk1, x, y = closed_form(qk, vk, h)
    controls = [2 * qk / 3 + qk1 / 3 + x / 3, qk / 3 + 2 * qk1 / 3 + (x + y) / 3, qk1]
    r = assemble_residual(m, PhaseState(0.0, [qk], [vk]), h, controls, CUBIC_ENDPOINTS)
    assert r.shape == (3,)
    assert np.max(np.abs(r)) <= 1e-12


def test_assemble_residual_free_particle_line():
    m = free_particle_model(2)
    q, v, h, S = np.array([1.0, -1.0]), np.array([0.5, 2.0]), 0.3, 5
    X = q + (np.arange(1, S + 1)[:, None] / S) * h * v
    r = assemble_residual(m, PhaseState(0.0, q, v), h, X, StepConfig(S=S))
    assert np.max(np.abs(r)) <= 1e-13


def test_assemble_residual_circular_orbit_samples():
    m = kepler_model()
    h = 0.3
    state = kepler_initial_state(0.0)
    norms = []
    for S in (3, 5, 7, 9):
        cfg = StepConfig(S=S)
        nodes = cfg.grid.nodes
        pts = np.array([kepler_exact_state(0.0, c * h).q for c in nodes])
        X = np.linalg.solve(basis_matrix(S, nodes), pts)
        norms.append(np.max(np.abs(assemble_residual(m, state, h, X[1:], cfg))))
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-8


def test_free_particle_at_rest():
    out = step(free_particle_model(3), PhaseState(0.0, [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]), 0.5)
    assert np.array_equal(out.next.q, [1.0, 2.0, 3.0])
    assert np.array_equal(out.next.p, [0.0, 0.0, 0.0])


def test_free_particle_drift():
    out = step(free_particle_model(2, mass=2.0), PhaseState(0.0, [0.0, 1.0], [2.0, -4.0]), 0.25,
               StepConfig(S=4))
    assert np.allclose(out.next.q, [0.25, 0.5], atol=1e-14)
    assert np.allclose(out.next.p, [2.0, -4.0], atol=1e-13)


def test_superposition_for_quadratic_lagrangian():
    m = harmonic_model()
    rng = np.random.default_rng(7)
    for S, enforcement in [(3, "endpoints"), (5, "internal"), (6, "internal")]:
        cfg = StepConfig(S=S, enforcement=enforcement)
        for _ in range(10):
            z1, z2 = rng.normal(size=(2, 2))
            a, b = rng.normal(size=2)
            lhs = step_map(m, a * z1 + b * z2, 0.05, cfg)
            rhs = a * step_map(m, z1, 0.05, cfg) + b * step_map(m, z2, 0.05, cfg)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_converged_el_residual_within_tolerance():
    m = kepler_model()
    cfg = StepConfig(S=7)
    state = kepler_exact_state(0.5, 1.0)
    h = 0.05
    out = step(m, state, h, cfg)
    assert out.residual_norm <= cfg.newton_tol
    raw = assemble_residual(m, state, h, out.path.controls[1:], cfg).reshape(cfg.S, 2)
    # the solver measures EL blocks as h^2 M^-1 r / displacement (M = I here)
    size = h * np.max(np.abs(state.p)) + h * h * np.max(np.abs(m.grad_q(state.q, state.p)))
    assert np.max(np.abs(raw[1:])) * h * h / size <= cfg.newton_tol


def test_time_reversibility():
    # symmetric node sets give a symmetric method
    m = kepler_model()
    for cfg in (StepConfig(S=5), StepConfig(S=6, scheme="chebyshev-lobatto")):
        s0 = kepler_exact_state(0.5, 0.7)
        s1 = step(m, s0, 0.1, cfg).next
        back = step(m, PhaseState(0.0, s1.q, -s1.p), 0.1, cfg).next
        assert np.allclose(back.q, s0.q, atol=1e-12)
        assert np.allclose(-back.p, s0.p, atol=1e-12)


def test_symplecticity_harmonic():
    m = harmonic_model()
    rng = np.random.default_rng(8)
    for _ in range(5):
        s = PhaseState(0.0, rng.normal(size=1), rng.normal(size=1))
        assert symplecticity_defect(m, s, 0.01, StepConfig(S=3)) <= 1e-6
        assert symplecticity_defect(m, s, 0.01, CUBIC_ENDPOINTS) <= 1e-6


def test_symplecticity_kepler():
    m = kepler_model()
    for t in (0.0, 1.3, 3.0):
        assert symplecticity_defect(m, kepler_exact_state(0.5, t), 0.05, StepConfig(S=5)) <= 1e-5


def test_symplecticity_near_identity():
    m = kepler_model()
    assert symplecticity_defect(m, kepler_exact_state(0.5, 2.0), 1e-6, StepConfig(S=5)) <= 1e-8


@pytest.mark.parametrize("S", [3, 5, 7, 9, 12])
def test_newton_iterations_kepler(S):
    m = kepler_model()
    cfg = StepConfig(S=S)
    for t in np.linspace(0, 6, 7):
        assert step(m, kepler_exact_state(0.5, t), 0.05, cfg).iterations <= 10


def test_newton_iterations_high_eccentricity_perihelion():
    m = kepler_model()
    for S in (6, 12):
        out = step(m, kepler_initial_state(0.99), 1e-3, StepConfig(S=S))
        assert out.iterations <= 10


def test_newton_iterations_outer_solar():
    m = outer_solar_model()
    s = outer_solar_initial_state()
    for _ in range(3):
        out = step(m, s, 50.0, StepConfig(S=6))
        assert out.iterations <= 10
        s = out.next


def test_harmonic_newton_iterations():
    out = step(harmonic_model(), PhaseState(0.0, [1.0], [0.0]), 0.01, CUBIC_ENDPOINTS)
    assert out.iterations <= 10


def test_convergence_error_carries_residual():
    m = kepler_model()
    cfg = StepConfig(S=5, newton_max_iter=1)
    with pytest.raises(ConvergenceError) as info:
        step(m, kepler_initial_state(0.9), 0.5, cfg)
    assert info.value.residual_norm > cfg.newton_tol
    assert info.value.iterations == 1


def test_singular_configuration_becomes_step_error():
    # oscillator that is undefined for |q| > 1.5; the trial path overshoots
    def guarded(f):
        def wrapped(q):
            if np.any(np.abs(q) > 1.5):
                raise SingularConfigurationError("left the domain")
            return f(q)
        return wrapped

    m = mechanical_model([1.0], guarded(lambda q: 0.5 * np.sum(q * q, axis=-1)),
                         guarded(lambda q: np.asarray(q, dtype=float)))
    with pytest.raises(SingularStepError):
        step(m, PhaseState(0.0, [1.4], [5.0]), 0.2)
    assert step(m, PhaseState(0.0, [0.0], [1.0]), 0.1).iterations <= 10


def test_invalid_inputs():
    m = harmonic_model()
    s = PhaseState(0.0, [1.0], [0.0])
    with pytest.raises(ValueError):
        step(m, s, 0.0)
    with pytest.raises(ValueError):
        step(m, PhaseState(0.0, [np.nan], [0.0]), 0.1)


def test_step_config_validation():
    with pytest.raises(ValueError):
        StepConfig(S=1)
    with pytest.raises(ValueError):
        StepConfig(S=4, newton_tol=0.0)
    with pytest.raises(ValueError):
        StepConfig(S=4, grid=make_grid(5))
    with pytest.raises(ValueError):
        StepConfig(S=3, grid=CollocationGrid(np.linspace(0, 1, 4), (1,)))


def test_initial_controls_are_taylor_path():
    m = kepler_model()
    s = kepler_initial_state(0.5)
    X = initial_controls(m, s, 1e-3, 4)
    assert X.shape == (4, 2)
    out = step(m, s, 1e-3, StepConfig(S=4))
    assert np.max(np.abs(X - out.path.controls[1:])) <= 1e-8


def test_finite_difference_model_steps_like_analytic():
    k = kepler_model()
    fdm = finite_difference_model(k)
    s = kepler_initial_state(0.5)
    a = step(k, s, 0.05, StepConfig(S=5)).next
    # difference noise puts the attainable residual near 1e-10
    b = step(fdm, s, 0.05, StepConfig(S=5, newton_tol=1e-8)).next
    assert np.allclose(a.q, b.q, atol=1e-7)
    assert np.allclose(a.p, b.p, atol=1e-6)


def test_outcome_path_endpoints():
    m = kepler_model()
    s = kepler_exact_state(0.3, 0.4)
    out = step(m, s, 0.1, StepConfig(S=6))
    assert np.allclose(out.path.value(s.t), s.q, atol=1e-15)
    assert np.allclose(out.path.controls[-1], out.next.q)
    assert np.allclose(m.grad_v(out.next.q, out.path.velocity(out.path.t_end)), out.next.p,
                       atol=1e-12)
