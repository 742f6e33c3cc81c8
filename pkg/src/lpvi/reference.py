"""Validation oracles that share no code with the variational stepper.

* :func:`kepler_exact_state` - closed-form Kepler orbit for the perihelion
  initial condition used by :func:`lpvi.lagrangian.kepler_initial_state`
  (semi-major axis 1, period 2 pi).
* :func:`rk4_step` / :func:`rk4_integrate` - classical explicit
  fourth-order Runge-Kutta on Hamilton's equations, the non-symplectic
  baseline.
"""

from __future__ import annotations

import math

import numpy as np

from .lagrangian import LagrangianModel, PhaseState

__all__ = [
    "KEPLER_PERIOD",
    "solve_kepler_equation",
    "kepler_exact_state",
    "hamilton_rhs",
    "rk4_step",
    "rk4_integrate",
]

KEPLER_PERIOD = 2.0 * math.pi


def solve_kepler_equation(mean_anomaly: float, eps: float, tol: float = 1e-14,
                          max_iter: int = 100) -> float:
    """Eccentric anomaly E with E - eps sin E = M, for M reduced to [0, 2 pi).

    Newton from E0 = M + eps sin M, with a bisection fallback whenever an
    iterate leaves the bracket [M - eps, M + eps].
    """
    M = math.fmod(mean_anomaly, 2.0 * math.pi)
    if M < 0:
        M += 2.0 * math.pi
    if eps == 0.0:
        return M
    lo, hi = M - eps, M + eps
    E = M + eps * math.sin(M)
    for _ in range(max_iter):
        f = E - eps * math.sin(E) - M
        if f > 0:
            hi = E
        else:
            lo = E
        dE = f / (1.0 - eps * math.cos(E))
        E_new = E - dE
        if not lo <= E_new <= hi:
            E_new = 0.5 * (lo + hi)
        if abs(E_new - E) <= tol * max(1.0, abs(E)):
            return E_new
        E = E_new
    return E


def kepler_exact_state(eps: float, t: float) -> PhaseState:
    """Exact state at time ``t`` of the orbit starting at perihelion
    ``q = (1 - eps, 0)`` moving in +y, with unit mass and GM = 1."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {eps}")
    E = solve_kepler_equation(t, eps)
    c, s = math.cos(E), math.sin(E)
    b = math.sqrt(1.0 - eps * eps)
    rdot = 1.0 / (1.0 - eps * c)  # dE/dt with mean motion 1
    q = np.array([c - eps, b * s])
    v = np.array([-s * rdot, b * c * rdot])
    return PhaseState(t, q, v)


def hamilton_rhs(model: LagrangianModel, t, q, p):
    """(dq/dt, dp/dt) = (v(q, p), dL/dq(q, v)) via the inverse Legendre map."""
    v = model.velocity_from_momentum(q, p, t)
    return np.asarray(v, dtype=float), np.asarray(model.grad_q(q, v, t), dtype=float)


def rk4_step(model: LagrangianModel, state: PhaseState, h: float) -> PhaseState:
    t, q, p = state.t, state.q, state.p
    k1q, k1p = hamilton_rhs(model, t, q, p)
    k2q, k2p = hamilton_rhs(model, t + h / 2, q + h / 2 * k1q, p + h / 2 * k1p)
    k3q, k3p = hamilton_rhs(model, t + h / 2, q + h / 2 * k2q, p + h / 2 * k2p)
    k4q, k4p = hamilton_rhs(model, t + h, q + h * k3q, p + h * k3p)
    return PhaseState(
        t + h,
        q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q),
        p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p),
    )


def rk4_integrate(model: LagrangianModel, initial: PhaseState, h: float, n_steps: int):
    """Fixed-step RK4; returns ``(t, q, p)`` arrays including the initial state."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    d = initial.q.size
    t = initial.t + h * np.arange(n_steps + 1)
    q = np.empty((n_steps + 1, d))
    p = np.empty((n_steps + 1, d))
    q[0], p[0] = initial.q, initial.p
    state = initial
    for k in range(n_steps):
        state = rk4_step(model, state, h)
        q[k + 1], p[k + 1] = state.q, state.p
    return t, q, p
