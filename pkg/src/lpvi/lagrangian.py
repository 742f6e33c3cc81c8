"""Lagrangian systems and the phase-space state type.

A :class:`LagrangianModel` bundles L(q, v, t) with the partial derivatives
needed to evaluate the Euler-Lagrange residual along a polynomial path.
Every callable is vectorised over leading axes: ``q`` and ``v`` have shape
``(..., d)``, ``t`` is a scalar or broadcasts against ``q[..., 0]``.
Gradients return ``(..., d)`` and Hessian blocks ``(..., d, d)``.

Momenta follow ``p = dL/dv`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "SingularConfigurationError",
    "PhaseState",
    "LagrangianModel",
    "mechanical_model",
    "free_particle_model",
    "harmonic_model",
    "kepler_model",
    "kepler_initial_state",
    "OUTER_SOLAR_G",
    "OUTER_SOLAR_BODIES",
    "OUTER_SOLAR_MASSES",
    "OUTER_SOLAR_POSITIONS",
    "OUTER_SOLAR_VELOCITIES",
    "nbody_model",
    "outer_solar_model",
    "outer_solar_initial_state",
    "finite_difference_model",
]


class SingularConfigurationError(ArithmeticError):
    """Raised when a model is evaluated at a collision (zero separation)."""


@dataclass(frozen=True)
class PhaseState:
    """Time, generalised positions and conjugate momenta."""

    t: float
    q: NDArray[np.float64]
    p: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", np.array(self.q, dtype=float).reshape(-1))
        object.__setattr__(self, "p", np.array(self.p, dtype=float).reshape(-1))
        if self.q.shape != self.p.shape:
            raise ValueError(f"q and p shapes differ: {self.q.shape} vs {self.p.shape}")


Fn = Callable[..., NDArray[np.float64]]


@dataclass(frozen=True)
class LagrangianModel:
    """A Lagrangian and the derivative terms of its Euler-Lagrange residual.

    ``energy``, ``angular_momentum`` and ``linear_momentum`` take ``(q, v)``
    (energy also ``t``) and may be ``None``; ``velocity`` is the inverse
    Legendre map ``(q, p, t) -> v`` when it is known in closed form.
    """

    dim: int
    value: Fn
    grad_q: Fn
    grad_v: Fn
    hess_vq: Fn
    hess_vv: Fn
    grad_vt: Fn
    energy: Optional[Fn] = None
    angular_momentum: Optional[Fn] = None
    linear_momentum: Optional[Fn] = None
    velocity: Optional[Fn] = None
    name: str = "custom"
    period: Optional[float] = field(default=None, compare=False)

    def momentum(self, q, v, t=0.0):
        return self.grad_v(q, v, t)

    def velocity_from_momentum(self, q, p, t=0.0, tol=1e-14, max_iter=50):
        """Solve ``dL/dv(q, v, t) = p`` for ``v``."""
        if self.velocity is not None:
            return self.velocity(q, p, t)
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        v = np.zeros_like(p)
        for _ in range(max_iter):
            r = self.grad_v(q, v, t) - p
            dv = np.linalg.solve(self.hess_vv(q, v, t), r[..., None])[..., 0]
            v = v - dv
            if np.max(np.abs(dv)) <= tol * max(1.0, float(np.max(np.abs(v)))):
                break
        return v

    def energy_of(self, q, v, t=0.0):
        """Energy from the closed form if given, else p.v - L."""
        if self.energy is not None:
            return self.energy(q, v, t)
        p = self.grad_v(q, v, t)
        return np.sum(p * v, axis=-1) - self.value(q, v, t)


def _zeros_like_batch(q, d):
    return np.zeros(np.shape(q)[:-1] + (d, d))


def mechanical_model(mass, potential: Fn, grad_potential: Fn, *, name="mechanical",
                     angular_momentum=None, linear_momentum=None, period=None):
    """L = 1/2 sum(m v^2) - V(q) with a diagonal constant mass matrix."""
    mass = np.asarray(mass, dtype=float).reshape(-1)
    d = mass.size
    mdiag = np.diag(mass)

    def value(q, v, t=0.0):
        return 0.5 * np.sum(mass * v * v, axis=-1) - potential(q)

    def energy(q, v, t=0.0):
        return 0.5 * np.sum(mass * v * v, axis=-1) + potential(q)

    return LagrangianModel(
        dim=d,
        value=value,
        grad_q=lambda q, v, t=0.0: -grad_potential(q),
        grad_v=lambda q, v, t=0.0: mass * np.asarray(v, dtype=float),
        hess_vq=lambda q, v, t=0.0: _zeros_like_batch(q, d),
        hess_vv=lambda q, v, t=0.0: np.broadcast_to(mdiag, np.shape(q)[:-1] + (d, d)),
        grad_vt=lambda q, v, t=0.0: np.zeros(np.shape(q)),
        energy=energy,
        angular_momentum=angular_momentum,
        linear_momentum=linear_momentum,
        velocity=lambda q, p, t=0.0: np.asarray(p, dtype=float) / mass,
        name=name,
        period=period,
    )


def free_particle_model(dim: int = 1, mass=1.0) -> LagrangianModel:
    mass = np.broadcast_to(np.asarray(mass, dtype=float), (dim,))
    return mechanical_model(
        mass,
        lambda q: np.zeros(np.shape(q)[:-1]),
        lambda q: np.zeros(np.shape(q)),
        name="free",
        linear_momentum=lambda q, v: mass * v,
    )


def harmonic_model() -> LagrangianModel:
    """Unit-frequency oscillator, L = v^2/2 - q^2/2."""
    return mechanical_model(
        [1.0],
        lambda q: 0.5 * np.sum(np.asarray(q) ** 2, axis=-1),
        lambda q: np.asarray(q, dtype=float),
        name="harmonic",
        period=2 * np.pi,
    )


def _kepler_radius(q):
    r = np.sqrt(np.sum(np.asarray(q, dtype=float) ** 2, axis=-1))
    if np.any(r == 0.0):
        raise SingularConfigurationError("Kepler model evaluated at the origin")
    return r


def kepler_model() -> LagrangianModel:
    """Planar Kepler problem with unit masses and G = 1: L = |v|^2/2 + 1/|q|."""

    def potential(q):
        return -1.0 / _kepler_radius(q)

    def grad_potential(q):
        q = np.asarray(q, dtype=float)
        r = _kepler_radius(q)
        return q / (r ** 3)[..., None]

    def angmom(q, v):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        return q[..., 0] * v[..., 1] - q[..., 1] * v[..., 0]

    return mechanical_model(
        [1.0, 1.0], potential, grad_potential, name="kepler",
        angular_momentum=angmom, linear_momentum=lambda q, v: np.asarray(v, dtype=float),
        period=2 * np.pi,
    )


def kepler_initial_state(eps: float) -> PhaseState:
    """Perihelion start q = (1 - eps, 0), v = (0, sqrt((1 + eps)/(1 - eps)))."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {eps}")
    q = np.array([1.0 - eps, 0.0])
    v = np.array([0.0, np.sqrt((1.0 + eps) / (1.0 - eps))])
    return PhaseState(0.0, q, v)


# Five outer planets with the Sun and inner planets lumped together.
# Units: AU, days, solar masses.
OUTER_SOLAR_G = 2.95912208286e-4
OUTER_SOLAR_BODIES = ("Sun", "Jupiter", "Saturn", "Uranus", "Neptune", "Pluto")
OUTER_SOLAR_MASSES = np.array([
    1.00000597682,
    0.000954786104043,
    0.000285583733151,
    0.0000437273164546,
    0.0000517759138449,
    1.0 / 1.3e8,
])
OUTER_SOLAR_POSITIONS = np.array([
    [0.0, 0.0, 0.0],
    [-3.5023653, -3.8169847, -1.5507963],
    [9.0755314, -3.0458353, -1.6483708],
    [8.3101420, -16.2901086, -7.2521278],
    [11.4707666, -25.7294829, -10.8169456],
    [-15.5387357, -25.2225594, -3.1902382],
])
OUTER_SOLAR_VELOCITIES = np.array([
    [0.0, 0.0, 0.0],
    [0.00565429, -0.00412490, -0.00190589],
    [0.00168318, 0.00483525, 0.00192462],
    [0.00354178, 0.00137102, 0.00055029],
    [0.00288930, 0.00114527, 0.00039677],
    [0.00276725, -0.00170702, -0.00136504],
])


def nbody_model(masses, G: float, ndim: int = 3, name="nbody") -> LagrangianModel:
    """Newtonian N-body Lagrangian; configuration is body-major, flattened."""
    masses = np.asarray(masses, dtype=float)
    nb = masses.size
    iu, ju = np.triu_indices(nb, k=1)
    mm = G * masses[iu] * masses[ju]
    # pair -> body incidence: +1 on the first body of each pair, -1 on the second
    scatter = np.zeros((iu.size, nb))
    scatter[np.arange(iu.size), iu] = 1.0
    scatter[np.arange(iu.size), ju] = -1.0

    def separations(q):
        x = np.asarray(q, dtype=float).reshape(np.shape(q)[:-1] + (nb, ndim))
        dx = x[..., iu, :] - x[..., ju, :]
        r = np.sqrt(np.sum(dx * dx, axis=-1))
        if np.any(r == 0.0):
            raise SingularConfigurationError("coincident bodies in N-body model")
        return x, dx, r

    def potential(q):
        _, _, r = separations(q)
        return -np.sum(mm / r, axis=-1)

    def grad_potential(q):
        x, dx, r = separations(q)
        f = (mm / r ** 3)[..., None] * dx
        g = np.einsum("...pk,pb->...bk", f, scatter)
        return g.reshape(np.shape(q))

    mass_flat = np.repeat(masses, ndim)

    def angmom(q, v):
        x = np.asarray(q, dtype=float).reshape(np.shape(q)[:-1] + (nb, ndim))
        u = np.asarray(v, dtype=float).reshape(x.shape)
        return np.sum(masses[:, None] * np.cross(x, u), axis=-2)

    def linmom(q, v):
        u = np.asarray(v, dtype=float).reshape(np.shape(v)[:-1] + (nb, ndim))
        return np.sum(masses[:, None] * u, axis=-2)

    return mechanical_model(mass_flat, potential, grad_potential, name=name,
                            angular_momentum=angmom, linear_momentum=linmom)


def outer_solar_model() -> LagrangianModel:
    """Sun plus the five outer planets, 18 coordinates in body-major order."""
    return nbody_model(OUTER_SOLAR_MASSES, OUTER_SOLAR_G, name="outer-solar")


def outer_solar_initial_state() -> PhaseState:
    q = OUTER_SOLAR_POSITIONS.reshape(-1)
    p = (OUTER_SOLAR_MASSES[:, None] * OUTER_SOLAR_VELOCITIES).reshape(-1)
    return PhaseState(0.0, q, p)


def finite_difference_model(value, dim: Optional[int] = None, step: float = 1e-6) -> LagrangianModel:
    """Wrap a value-only Lagrangian with central-difference partials.

    ``value`` is either a callable ``L(q, v, t)`` (then ``dim`` is required)
    or a :class:`LagrangianModel`, of which only ``value`` is used.
    Second partials carry difference noise of roughly ``eps**0.5``, so
    steps on such a model need a ``newton_tol`` near 1e-8 rather than the
    default.
    """
    if isinstance(value, LagrangianModel):
        dim = value.dim
        value = value.value
    if dim is None:
        raise ValueError("dim is required when wrapping a bare callable")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    d = dim
    eye = np.eye(d)
    step2 = max(step, np.finfo(float).eps ** 0.25)

    def _scale(x, s):
        return s * np.maximum(1.0, np.abs(x))

    def _grad(f, x, s):
        x = np.asarray(x, dtype=float)
        hs = _scale(x, s)  # (..., d)
        xp = x[..., None, :] + eye * hs[..., None, :]
        xm = x[..., None, :] - eye * hs[..., None, :]
        return (f(xp) - f(xm)) / (2 * hs)

    def grad_q(q, v, t=0.0):
        v = np.asarray(v, dtype=float)
        return _grad(lambda qq: value(qq, v[..., None, :], _tb(t)), q, step)

    def grad_v(q, v, t=0.0):
        q = np.asarray(q, dtype=float)
        return _grad(lambda vv: value(q[..., None, :], vv, _tb(t)), v, step)

    def _tb(t):
        t = np.asarray(t, dtype=float)
        return t[..., None] if t.ndim else t

    def hess_vq(q, v, t=0.0):
        # [i, j] = d2L / dv_i dq_j
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        hq = _scale(q, step2)
        cols = []
        for j in range(d):
            dq = np.zeros(d)
            dq[j] = 1.0
            e = dq * hq[..., j:j + 1]
            gp = _grad(lambda vv: value((q + e)[..., None, :], vv, _tb(t)), v, step2)
            gm = _grad(lambda vv: value((q - e)[..., None, :], vv, _tb(t)), v, step2)
            cols.append((gp - gm) / (2 * hq[..., j:j + 1]))
        return np.stack(cols, axis=-1)

    def hess_vv(q, v, t=0.0):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        hv = _scale(v, step2)
        cols = []
        for j in range(d):
            e = eye[j] * hv[..., j:j + 1]
            gp = _grad(lambda vv: value(q[..., None, :], vv, _tb(t)), v + e, step2)
            gm = _grad(lambda vv: value(q[..., None, :], vv, _tb(t)), v - e, step2)
            cols.append((gp - gm) / (2 * hv[..., j:j + 1]))
        h = np.stack(cols, axis=-1)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def grad_vt(q, v, t=0.0):
        t = np.asarray(t, dtype=float)
        ht = step2 * np.maximum(1.0, np.abs(t))
        gp = grad_v(q, v, t + ht)
        gm = grad_v(q, v, t - ht)
        return (gp - gm) / (2 * ht[..., None] if np.ndim(ht) else 2 * ht)

    return LagrangianModel(dim=d, value=value, grad_q=grad_q, grad_v=grad_v,
                           hess_vq=hess_vq, hess_vv=hess_vv, grad_vt=grad_vt,
                           name="finite-difference")
