import numpy as np
import pytest

from lpvi.lagrangian import (
    OUTER_SOLAR_G,
    OUTER_SOLAR_MASSES,
    OUTER_SOLAR_POSITIONS,
    OUTER_SOLAR_VELOCITIES,
    LagrangianModel,
    PhaseState,
    SingularConfigurationError,
    finite_difference_model,
    free_particle_model,
    harmonic_model,
    kepler_initial_state,
    kepler_model,
    nbody_model,
    outer_solar_initial_state,
    outer_solar_model,
)
from lpvi.reference import kepler_exact_state


def fd_grad(f, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step * max(1.0, abs(x[i]))
        g[i] = (f(x + e) - f(x - e)) / (2 * e[i])
    return g


def random_state(model, rng):
    d = model.dim
    if model.name == "outer-solar":
        q = OUTER_SOLAR_POSITIONS.reshape(-1) + rng.normal(0, 0.5, d)
        v = OUTER_SOLAR_VELOCITIES.reshape(-1) + rng.normal(0, 1e-3, d)
        return q, v
    q = rng.uniform(-2, 2, d)
    if model.name == "kepler":
        # keep |q| away from the singular origin
        q = q / np.linalg.norm(q) * rng.uniform(0.3, 2.0)
    return q, rng.normal(0, 1, d)


BUILTINS = [harmonic_model(), kepler_model(), outer_solar_model()]


@pytest.mark.parametrize("model", BUILTINS, ids=lambda m: m.name)
def test_first_partials_match_finite_differences(model):
    rng = np.random.default_rng(1)
    for _ in range(100):
        q, v = random_state(model, rng)
        gq = model.grad_q(q, v, 0.0)
        gv = model.grad_v(q, v, 0.0)
        fq = fd_grad(lambda x: model.value(x, v, 0.0), q)
        fv = fd_grad(lambda x: model.value(q, x, 0.0), v)
        # relative to the gradient scale; some components are genuinely ~0
        assert np.max(np.abs(gq - fq)) <= 1e-6 * max(np.max(np.abs(gq)), 1e-12) + 1e-12
        assert np.max(np.abs(gv - fv)) <= 1e-6 * max(np.max(np.abs(gv)), 1e-12) + 1e-12


@pytest.mark.parametrize("model", BUILTINS, ids=lambda m: m.name)
def test_mass_matrix_symmetric_and_batched(model):
    rng = np.random.default_rng(2)
    qs, vs = zip(*(random_state(model, rng) for _ in range(4)))
    q, v = np.array(qs), np.array(vs)
    M = model.hess_vv(q, v, 0.0)
    assert M.shape == (4, model.dim, model.dim)
    assert np.array_equal(M, np.swapaxes(M, -1, -2))
    assert model.grad_q(q, v, 0.0).shape == (4, model.dim)
    assert np.allclose(model.grad_q(q, v, 0.0)[2], model.grad_q(q[2], v[2], 0.0))


def test_harmonic_examples():
    m = harmonic_model()
    assert m.dim == 1
    assert m.value(np.array([0.0]), np.array([0.0])) == 0.0
    assert m.grad_q(np.array([1.0]), np.array([0.0]))[0] == -1.0
    assert np.array_equal(m.hess_vv(np.array([0.3]), np.array([2.0])), [[1.0]])
    assert m.energy_of(np.array([1.0]), np.array([2.0])) == pytest.approx(2.5)


@pytest.mark.parametrize("eps", [0.0, 0.3, 0.5, 0.9, 0.99])
def test_kepler_initial_state_invariants(eps):
    m = kepler_model()
    s = kepler_initial_state(eps)
    v = m.velocity_from_momentum(s.q, s.p)
    assert np.array_equal(v, s.p)
    assert m.energy_of(s.q, v) == pytest.approx(-0.5, abs=1e-12)
    assert m.angular_momentum(s.q, v) == pytest.approx(np.sqrt(1 - eps * eps), abs=1e-14)


def test_kepler_initial_state_values():
    s = kepler_initial_state(0.5)
    assert np.allclose(s.q, [0.5, 0.0])
    assert np.allclose(s.p, [0.0, np.sqrt(3.0)])
    with pytest.raises(ValueError):
        kepler_initial_state(1.0)


def test_kepler_singular_configuration():
    m = kepler_model()
    with pytest.raises(SingularConfigurationError):
        m.grad_q(np.zeros(2), np.ones(2))
    with pytest.raises(SingularConfigurationError):
        m.value(np.zeros(2), np.ones(2))


def test_kepler_invariants_along_exact_orbit():
    m = kepler_model()
    eps = 0.7
    for t in np.linspace(0, 20, 50):
        s = kepler_exact_state(eps, t)
        assert m.energy_of(s.q, s.p) == pytest.approx(-0.5, abs=1e-10)
        assert m.angular_momentum(s.q, s.p) == pytest.approx(np.sqrt(1 - eps ** 2), abs=1e-10)


def test_outer_solar_table_values():
    assert OUTER_SOLAR_G == 2.95912208286e-4
    assert OUTER_SOLAR_MASSES[0] == 1.00000597682
    assert OUTER_SOLAR_MASSES[-1] == 1.0 / 1.3e8
    assert OUTER_SOLAR_POSITIONS[1, 0] == -3.5023653
    s = outer_solar_initial_state()
    m = outer_solar_model()
    assert m.dim == 18 and s.q.size == 18
    # momenta p = m v, body-major
    assert s.p[3] == OUTER_SOLAR_MASSES[1] * OUTER_SOLAR_VELOCITIES[1, 0]


def test_outer_solar_linear_momentum_reference():
    s = outer_solar_initial_state()
    m = outer_solar_model()
    v = m.velocity_from_momentum(s.q, s.p)
    ref = np.zeros(3)
    for mass, vel in zip(OUTER_SOLAR_MASSES, OUTER_SOLAR_VELOCITIES):
        ref += mass * vel
    assert np.allclose(m.linear_momentum(s.q, v), ref, rtol=1e-14, atol=0)


def test_nbody_two_body_matches_kepler():
    # equal unit masses, G = 1: relative motion is Kepler with mu = 2
    m = nbody_model([1.0, 1.0], 1.0, ndim=2)
    q = np.array([0.0, 0.0, 1.0, 0.5])
    g = m.grad_q(q, np.zeros(4))
    r = np.array([1.0, 0.5])
    f = r / np.linalg.norm(r) ** 3
    assert np.allclose(g, np.concatenate([f, -f]))


def test_nbody_coincident_bodies():
    m = nbody_model([1.0, 2.0], 1.0)
    with pytest.raises(SingularConfigurationError):
        m.grad_q(np.zeros(6), np.zeros(6))


def test_finite_difference_model_harmonic():
    fdm = finite_difference_model(harmonic_model())
    assert fdm.grad_q(np.array([1.0]), np.array([0.0]), 0.0)[0] == pytest.approx(-1.0, abs=1e-7)
    assert fdm.hess_vv(np.array([1.0]), np.array([0.0]), 0.0)[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_finite_difference_model_kepler():
    k = kepler_model()
    fdm = finite_difference_model(k)
    s = kepler_initial_state(0.5)
    assert np.allclose(fdm.grad_v(s.q, s.p, 0.0), k.grad_v(s.q, s.p, 0.0), atol=1e-7)
    assert np.allclose(fdm.grad_q(s.q, s.p, 0.0), k.grad_q(s.q, s.p, 0.0), atol=1e-7)
    assert np.allclose(fdm.velocity_from_momentum(s.q, s.p), s.p, atol=1e-7)


def test_finite_difference_model_constant():
    fdm = finite_difference_model(lambda q, v, t: 3.0 + 0.0 * q[..., 0], dim=2)
    q, v = np.array([0.4, -1.0]), np.array([2.0, 0.1])
    for fn in (fdm.grad_q, fdm.grad_v, fdm.grad_vt):
        assert np.allclose(fn(q, v, 0.5), 0.0)
    assert np.allclose(fdm.hess_vq(q, v, 0.5), 0.0)


def test_finite_difference_model_time_dependent():
    # L = 1/2 (1 + t) v^2 q  -> d2L/dv dq = (1 + t) v, d2L/dv dt = v q
    fdm = finite_difference_model(lambda q, v, t: 0.5 * (1 + t) * v[..., 0] ** 2 * q[..., 0], dim=1)
    q, v, t = np.array([1.5]), np.array([0.7]), 0.3
    assert fdm.hess_vq(q, v, t)[0, 0] == pytest.approx(1.3 * 0.7, rel=1e-6)
    assert fdm.grad_vt(q, v, t)[0] == pytest.approx(0.7 * 1.5, rel=1e-6)
    assert fdm.hess_vv(q, v, t)[0, 0] == pytest.approx(1.3 * 1.5, rel=1e-6)


def test_finite_difference_model_requires_dim_and_positive_step():
    with pytest.raises(ValueError):
        finite_difference_model(lambda q, v, t: 0.0)
    with pytest.raises(ValueError):
        finite_difference_model(harmonic_model(), step=0.0)


def test_free_particle_momentum():
    m = free_particle_model(3, mass=2.0)
    v = np.array([1.0, -2.0, 0.5])
    assert np.allclose(m.momentum(np.zeros(3), v), 2 * v)
    assert np.allclose(m.velocity_from_momentum(np.zeros(3), 2 * v), v)


def test_phase_state_validation():
    s = PhaseState(0, [1, 2], [3, 4])
    assert s.q.dtype == float and isinstance(s.t, float)
    with pytest.raises(ValueError):
        PhaseState(0, [1, 2], [3])


def test_generic_velocity_recovery():
    # L = v^2/2 + v^4/4 has p = v + v^3, inverted by the Newton fallback
    base = finite_difference_model(lambda q, v, t: 0.5 * v[..., 0] ** 2 + 0.25 * v[..., 0] ** 4, dim=1)
    model = LagrangianModel(dim=1, value=base.value, grad_q=base.grad_q,
                            grad_v=lambda q, v, t=0.0: v + v ** 3,
                            hess_vq=base.hess_vq,
                            hess_vv=lambda q, v, t=0.0: (1 + 3 * v ** 2)[..., None],
                            grad_vt=base.grad_vt)
    v = model.velocity_from_momentum(np.array([0.0]), np.array([10.0]))
    assert v[0] == pytest.approx(2.0, abs=1e-12)
    # energy via p.v - L: 2*10 - (2 + 4) = 14
    assert model.energy_of(np.array([0.0]), v) == pytest.approx(14.0)
