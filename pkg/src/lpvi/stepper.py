"""One-step map of the local path fitting variational integrator.

Given ``(t_k, q_k, p_k)`` and a step ``h`` the step fits a degree-S
Bernstein path with ``x^0 = q_k`` such that

* ``dL/dv`` at ``t_k`` equals ``p_k``, and
* the Euler-Lagrange residual vanishes at the enforced collocation nodes,

which is ``S * d`` equations in the ``S * d`` unknown controls
``x^1..x^S``.  The new position is ``x^S`` and the new momentum is
``dL/dv`` evaluated on the path at ``t_k + h``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .bernstein import basis_matrix
from .lagrangian import LagrangianModel, PhaseState, SingularConfigurationError
from .path import BernsteinPath, CollocationGrid, el_residual_pointwise, make_grid

__all__ = [
    "StepError",
    "ConvergenceError",
    "SingularStepError",
    "StepConfig",
    "StepOutcome",
    "assemble_residual",
    "initial_controls",
    "step",
    "step_map",
    "symplecticity_defect",
]

_EPS = np.finfo(float).eps


class StepError(RuntimeError):
    """A single step could not be completed."""


class ConvergenceError(StepError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message, residual_norm=np.nan, iterations=0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularStepError(StepError):
    """The fitted path passed through a singular configuration."""


@dataclass(frozen=True)
class StepConfig:
    """Collocation and Newton settings for :func:`step`.

    ``newton_tol`` bounds the max-norm of the residual converted to position
    units (momentum block times ``h M^-1``, Euler-Lagrange blocks times
    ``h^2 M^-1`` with ``M = d2L/dv2`` at the start) relative to the step
    displacement ``h|v_k| + h^2|a_k|``.  The Jacobian is built by forward
    differences on the control offsets ``x^j - q_k``.
    """

    S: int = 3
    scheme: str = "uniform"
    enforcement: str = "internal"
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_halvings: int = 8
    grid: CollocationGrid = field(default=None)

    def __post_init__(self):
        if self.S < 2:
            raise ValueError(f"S must be at least 2, got {self.S}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.grid is None:
            object.__setattr__(self, "grid", make_grid(self.S, self.scheme, self.enforcement))
        elif self.grid.degree != self.S:
            raise ValueError("grid degree does not match S")
        if len(self.grid.enforce) != self.S - 1:
            raise ValueError(f"need exactly S - 1 = {self.S - 1} enforced nodes, "
                             f"got {len(self.grid.enforce)}")


@dataclass(frozen=True)
class StepOutcome:
    next: PhaseState
    path: BernsteinPath
    iterations: int
    residual_norm: float


@functools.lru_cache(maxsize=64)
def _tables(S: int, nodes: tuple, enforce: tuple):
    c = np.asarray(nodes)[list(enforce)]
    return (
        c,
        basis_matrix(S, c, 0),
        basis_matrix(S, c, 1),
        basis_matrix(S, c, 2),
        basis_matrix(S, np.array([0.0, 1.0]), 1),
    )


def _grid_tables(config: StepConfig):
    g = config.grid
    return _tables(config.S, tuple(g.nodes.tolist()), g.enforce)


def _residual_batch(model, state, h, Y, config):
    # Y: (..., S, d) control offsets x^j - q_k -> (..., S, d) raw residual
    # blocks.  Working with offsets keeps round-off relative to the step's
    # displacement rather than to |q|.
    c, B0, B1, B2, Bend = _grid_tables(config)
    q0 = state.q
    # b_{0,S} multiplies a zero offset, so only columns 1..S are needed
    v_start = np.einsum("j,...jd->...d", Bend[0, 1:], Y) / h
    r_mom = model.grad_v(q0, v_start, state.t) - state.p
    q = q0 + np.einsum("mj,...jd->...md", B0[:, 1:], Y)
    v = np.einsum("mj,...jd->...md", B1[:, 1:], Y) / h
    a = np.einsum("mj,...jd->...md", B2[:, 1:], Y) / h ** 2
    # node times have shape (m,) and broadcast against the (..., m) batch dims
    r_el = el_residual_pointwise(model, q, v, a, state.t + c * h)
    return np.concatenate([r_mom[..., None, :], r_el], axis=-2)


def assemble_residual(model: LagrangianModel, state: PhaseState, h: float,
                      unknowns, config: StepConfig) -> NDArray[np.float64]:
    """Collocation residual for controls ``x^1..x^S`` (flattened, length S*d).

    The first ``d`` entries are ``dL/dv(t_k) - p_k``; the remaining blocks
    are the Euler-Lagrange residual at each enforced node, in order.
    """
    d = state.q.size
    X = np.asarray(unknowns, dtype=float).reshape(config.S, d)
    return _residual_batch(model, state, h, X - state.q, config).reshape(-1)


def _start_kinematics(model, state):
    q, t = state.q, state.t
    v = np.asarray(model.velocity_from_momentum(q, state.p, t), dtype=float)
    M = model.hess_vv(q, v, t)
    rhs = model.grad_q(q, v, t) - model.hess_vq(q, v, t) @ v - model.grad_vt(q, v, t)
    try:
        a = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        a = np.zeros_like(v)
    if not np.all(np.isfinite(a)):
        a = np.zeros_like(v)
    return v, a, M


def _seed_offsets(v, a, h, S):
    # Bernstein coefficients of tau and tau^2 are j/S and j(j-1)/(S(S-1))
    j = np.arange(1, S + 1)[:, None]
    return (j / S) * h * v + (j * (j - 1) / (S * (S - 1))) * (0.5 * h * h) * a


def initial_controls(model: LagrangianModel, state: PhaseState, h: float, S: int):
    """Controls ``x^1..x^S`` of the second-order Taylor path at ``t_k``.

    The starting acceleration solves the Euler-Lagrange equation at ``q_k``.
    """
    v, a, _ = _start_kinematics(model, state)
    return state.q + _seed_offsets(v, a, h, S)


def _norm(r):
    n = float(np.max(np.abs(r)))
    return n if np.isfinite(n) else np.inf


def step(model: LagrangianModel, state: PhaseState, h: float,
         config: StepConfig | None = None) -> StepOutcome:
    """Advance ``state`` by ``h``.

    Raises
    ------
    ConvergenceError
        Newton did not converge within ``config.newton_max_iter`` iterations.
    SingularStepError
        The model hit a singular configuration while evaluating the path.
    """
    config = config or StepConfig()
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.p))):
        raise ValueError("state contains non-finite values")
    S, d = config.S, state.q.size
    n = S * d
    try:
        v0, a0, M = _start_kinematics(model, state)
        y = _seed_offsets(v0, a0, h, S).reshape(-1)
        # residual -> position units (h M^-1 on the momentum block, h^2 M^-1
        # on the EL blocks) relative to the step displacement
        size = h * _norm(v0) + h * h * _norm(a0)
        if not (size > 0 and np.isfinite(size)):
            size = 1.0
        minv = np.linalg.inv(M)
        w = np.stack([h * minv] + [h * h * minv] * (S - 1)) / size

        def resid(yy):
            raw = _residual_batch(model, state, h, yy.reshape(yy.shape[:-1] + (S, d)), config)
            return np.einsum("sij,...sj->...si", w, raw).reshape(yy.shape[:-1] + (n,))

        r = resid(y)
        rn = _norm(r)
        it = 0
        lu = None
        while rn > config.newton_tol:
            if it >= config.newton_max_iter:
                raise ConvergenceError(
                    f"Newton did not converge in {it} iterations (residual {rn:.3e})", rn, it)
            it += 1
            dy_fd = np.sqrt(_EPS) * np.maximum(size, np.abs(y))
            R = resid(y + np.diag(dy_fd))
            J = ((R - r) / dy_fd[:, None]).T
            try:
                lu = scipy.linalg.lu_factor(J, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise ConvergenceError(f"bad Newton matrix: {exc}", rn, it) from exc
            dy = scipy.linalg.lu_solve(lu, -r)
            if not np.all(np.isfinite(dy)):
                raise ConvergenceError("singular Newton matrix", rn, it)
            lam = 1.0
            for _ in range(config.max_halvings + 1):
                y_try = y + lam * dy
                r_try = resid(y_try)
                rn_try = _norm(r_try)
                if rn_try < rn:
                    break
                lam *= 0.5
            else:
                # no decrease: accept only if already at the round-off floor
                if _norm(dy) <= 64 * _EPS * max(size, _norm(y)):
                    break
                raise ConvergenceError(
                    f"damped Newton stalled at residual {rn:.3e}", rn, it)
            y, r, rn = y_try, r_try, rn_try
        if lu is not None:
            # one extra solve with the last factorisation pushes the error
            # from ~tol down towards round-off at negligible cost
            y_try = y + scipy.linalg.lu_solve(lu, -r)
            r_try = resid(y_try)
            rn_try = _norm(r_try)
            if rn_try <= rn:
                y, r, rn = y_try, r_try, rn_try
        Y = y.reshape(S, d)
        t1 = state.t + h
        q1 = state.q + Y[-1]
        v1 = _grid_tables(config)[4][1, 1:] @ Y / h
        p1 = model.grad_v(q1, v1, t1)
    except SingularConfigurationError as exc:
        raise SingularStepError(str(exc)) from exc

    ctrl = np.vstack([state.q[None, :], state.q + Y])
    path = BernsteinPath(state.t, h, ctrl)
    return StepOutcome(PhaseState(t1, q1, p1), path, it, rn)


def step_map(model, z, h, config, t=0.0):
    """(q, p) -> (q', p') as a flat vector map, for Jacobian checks."""
    z = np.asarray(z, dtype=float)
    d = z.size // 2
    out = step(model, PhaseState(t, z[:d], z[d:]), h, config).next
    return np.concatenate([out.q, out.p])


def symplecticity_defect(model: LagrangianModel, state: PhaseState, h: float,
                         config: StepConfig | None = None, delta: float = 1e-5) -> float:
    """max |D^T Omega D - Omega| with D the central-difference Jacobian of the step map."""
    config = config or StepConfig()
    z = np.concatenate([state.q, state.p])
    m = z.size
    d = m // 2
    D = np.empty((m, m))
    for i in range(m):
        dz = delta * max(1.0, abs(z[i]))
        e = np.zeros(m)
        e[i] = dz
        D[:, i] = (step_map(model, z + e, h, config, state.t)
                   - step_map(model, z - e, h, config, state.t)) / (2 * dz)
    omega = np.block([[np.zeros((d, d)), np.eye(d)], [-np.eye(d), np.zeros((d, d))]])
    return float(np.max(np.abs(D.T @ omega @ D - omega)))
