"""Fixed-step and energy-controlled trajectory drivers with conservation diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .lagrangian import LagrangianModel, PhaseState
from .stepper import StepConfig, StepError, step

__all__ = [
    "Invariants",
    "Diagnostics",
    "Trajectory",
    "AdaptiveConfig",
    "IntegrationError",
    "StiffnessError",
    "StepLimitError",
    "invariants",
    "diagnostics",
    "integrate_fixed",
    "integrate_adaptive",
]


@dataclass(frozen=True)
class Invariants:
    """Conserved quantities of one state; ``None`` where the model defines none."""

    energy: float
    angular_momentum: Optional[NDArray[np.float64]] = None
    linear_momentum: Optional[NDArray[np.float64]] = None


@dataclass(frozen=True)
class Diagnostics:
    rel_energy_error: float
    rel_angular_momentum_error: float = math.nan
    rel_linear_momentum_error: float = math.nan


def invariants(model: LagrangianModel, state: PhaseState) -> Invariants:
    v = model.velocity_from_momentum(state.q, state.p, state.t)
    e = float(model.energy_of(state.q, v, state.t))
    am = lm = None
    if model.angular_momentum is not None:
        am = np.atleast_1d(np.asarray(model.angular_momentum(state.q, v), dtype=float))
    if model.linear_momentum is not None:
        lm = np.atleast_1d(np.asarray(model.linear_momentum(state.q, v), dtype=float))
    return Invariants(e, am, lm)


def _rel(x, ref):
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    den = float(np.linalg.norm(ref))
    num = float(np.linalg.norm(x - ref))
    return num / den if den > 0 else num


def diagnostics(model: LagrangianModel, state: PhaseState, reference: Invariants) -> Diagnostics:
    """Relative errors of ``state``'s invariants against ``reference``.

    Vector invariants are compared in Euclidean norm.  A zero reference
    value falls back to the absolute error.
    """
    cur = invariants(model, state)
    am = lm = math.nan
    if reference.angular_momentum is not None and cur.angular_momentum is not None:
        am = _rel(cur.angular_momentum, reference.angular_momentum)
    if reference.linear_momentum is not None and cur.linear_momentum is not None:
        lm = _rel(cur.linear_momentum, reference.linear_momentum)
    return Diagnostics(_rel(cur.energy, reference.energy), am, lm)


@dataclass
class Trajectory:
    """Stored states plus per-row diagnostics.

    Row ``i`` of the diagnostic arrays belongs to stored state ``i + 1``.
    With decimation only every ``k``-th state (and always the last) is
    stored, but the ``max_*`` fields and step counts cover every step.
    """

    t: NDArray[np.float64]
    q: NDArray[np.float64]
    p: NDArray[np.float64]
    h_used: NDArray[np.float64]
    rel_energy_error: NDArray[np.float64]
    rel_angular_momentum_error: NDArray[np.float64]
    rel_linear_momentum_error: NDArray[np.float64]
    newton_iterations: NDArray[np.int64]
    n_steps: int = 0
    n_rejected: int = 0
    max_rel_energy_error: float = 0.0
    max_rel_angular_momentum_error: float = math.nan
    max_rel_linear_momentum_error: float = math.nan

    @property
    def states(self) -> list[PhaseState]:
        return [PhaseState(t, q, p) for t, q, p in zip(self.t, self.q, self.p)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(self.t[-1], self.q[-1], self.p[-1])

    def __len__(self) -> int:
        return self.t.size


class _Recorder:
    def __init__(self, model, initial, decimate):
        if decimate < 1:
            raise ValueError("decimation factor must be >= 1")
        self.model = model
        self.ref = invariants(model, initial)
        self.decimate = decimate
        self.rows = []
        self.states = [initial]
        self.pending = None
        self.n_steps = 0
        self.n_rejected = 0
        self.max = [0.0, math.nan, math.nan]

    def diag(self, state):
        return diagnostics(self.model, state, self.ref)

    def accept(self, state, h, iterations, diag):
        self.n_steps += 1
        for i, val in enumerate((diag.rel_energy_error, diag.rel_angular_momentum_error,
                                 diag.rel_linear_momentum_error)):
            if not math.isnan(val):
                self.max[i] = val if math.isnan(self.max[i]) else max(self.max[i], val)
        row = (state, (h, diag.rel_energy_error, diag.rel_angular_momentum_error,
                       diag.rel_linear_momentum_error, iterations))
        if self.n_steps % self.decimate == 0:
            self.states.append(row[0])
            self.rows.append(row[1])
            self.pending = None
        else:
            self.pending = row

    def build(self) -> Trajectory:
        states, rows = list(self.states), list(self.rows)
        if self.pending is not None:
            states.append(self.pending[0])
            rows.append(self.pending[1])
        d = states[0].q.size
        cols = np.array(rows, dtype=float).reshape(-1, 5)
        return Trajectory(
            t=np.array([s.t for s in states]),
            q=np.array([s.q for s in states]).reshape(-1, d),
            p=np.array([s.p for s in states]).reshape(-1, d),
            h_used=cols[:, 0],
            rel_energy_error=cols[:, 1],
            rel_angular_momentum_error=cols[:, 2],
            rel_linear_momentum_error=cols[:, 3],
            newton_iterations=cols[:, 4].astype(np.int64),
            n_steps=self.n_steps,
            n_rejected=self.n_rejected,
            max_rel_energy_error=self.max[0],
            max_rel_angular_momentum_error=self.max[1],
            max_rel_linear_momentum_error=self.max[2],
        )


class IntegrationError(StepError):
    """Integration aborted; ``trajectory`` holds the steps completed so far."""

    def __init__(self, message, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class StiffnessError(IntegrationError):
    """The adaptive controller needed a step below ``h_min``."""


class StepLimitError(IntegrationError):
    """The adaptive driver exceeded its step budget."""


def integrate_fixed(model: LagrangianModel, initial: PhaseState, h: float, n_steps: int,
                    config: StepConfig | None = None, decimate: int = 1) -> Trajectory:
    """Take ``n_steps`` steps of size ``h`` from ``initial``."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    config = config or StepConfig()
    rec = _Recorder(model, initial, decimate)
    state = initial
    for k in range(n_steps):
        try:
            out = step(model, state, h, config)
        except StepError as exc:
            raise IntegrationError(f"step {k} at t={state.t:.6g} failed: {exc}", rec.build()) from exc
        # t = t0 + (k+1) h avoids accumulating round-off in the clock
        state = PhaseState(initial.t + (k + 1) * h, out.next.q, out.next.p)
        rec.accept(state, h, out.iterations, rec.diag(state))
    return rec.build()


@dataclass(frozen=True)
class AdaptiveConfig:
    """Step-size controller keyed on the relative energy error against E0.

    A step is accepted when ``|E - E0| / |E0| <= energy_tol``; otherwise
    it is retried with ``h * shrink``.  After ``grow_patience`` consecutive
    accepted steps the step grows by ``grow`` (capped at ``h_max``).

    With ``per_unit_time`` the step's own energy change must also stay
    below ``energy_tol * h / budget_time`` (``budget_time`` defaults to the
    integration span).  Summed over the run this cannot exceed
    ``energy_tol``, so the global test can never stall on error that was
    spent early.
    """

    energy_tol: float = 1e-7
    h_init: float = 0.01
    h_min: float = 1e-8
    h_max: float = 1.0
    shrink: float = 0.5
    grow: float = 1.3
    grow_patience: int = 5
    max_steps: Optional[int] = None
    per_unit_time: bool = True
    budget_time: Optional[float] = None

    def __post_init__(self):
        if not self.energy_tol > 0:
            raise ValueError("energy_tol must be positive")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if not 0 < self.shrink < 1 or not self.grow >= 1:
            raise ValueError("need 0 < shrink < 1 and grow >= 1")
        if self.grow_patience < 1:
            raise ValueError("grow_patience must be >= 1")


def _energy_roundoff(model, state):
    # round-off level of E = p.v - L from the size of its two terms, with
    # headroom for the conditioning of high-degree collocation systems
    v = model.velocity_from_momentum(state.q, state.p, state.t)
    mag = abs(float(np.dot(state.p, v))) + abs(float(model.value(state.q, v, state.t)))
    return 1024 * np.finfo(float).eps * mag


def integrate_adaptive(model: LagrangianModel, initial: PhaseState, t_end: float,
                       adaptive: AdaptiveConfig | None = None, config: StepConfig | None = None,
                       decimate: int = 1) -> Trajectory:
    """Integrate to ``t_end`` keeping the relative energy error under
    ``adaptive.energy_tol``.  Steps whose Newton solve fails are treated as
    rejections, and the last step is shortened to land on ``t_end``."""
    if not t_end > initial.t:
        raise ValueError("t_end must exceed the initial time")
    adaptive = adaptive or AdaptiveConfig()
    config = config or StepConfig()
    rec = _Recorder(model, initial, decimate)
    state = initial
    h = adaptive.h_init
    streak = 0
    span = t_end - initial.t
    budget = adaptive.budget_time or span
    e_prev = rec.ref.energy
    e_scale = abs(rec.ref.energy) or 1.0
    while t_end - state.t > 1e-14 * max(1.0, abs(t_end)):
        if adaptive.max_steps is not None and rec.n_steps >= adaptive.max_steps:
            raise StepLimitError(f"exceeded {adaptive.max_steps} steps at t={state.t:.6g}",
                                 rec.build())
        remaining = t_end - state.t
        last = h >= remaining or remaining - h < 1e-12 * span
        h_try = remaining if last else h
        ok = False
        try:
            out = step(model, state, h_try, config)
            nxt = PhaseState(t_end if last else out.next.t, out.next.q, out.next.p)
            diag = rec.diag(nxt)
            ok = diag.rel_energy_error <= adaptive.energy_tol
            if ok and adaptive.per_unit_time:
                e_next = invariants(model, nxt).energy
                allowed = adaptive.energy_tol * h_try / budget + _energy_roundoff(model, nxt) / e_scale
                ok = abs(e_next - e_prev) / e_scale <= allowed
        except StepError:
            pass
        if ok:
            if adaptive.per_unit_time:
                e_prev = e_next
            state = nxt
            rec.accept(state, h_try, out.iterations, diag)
            streak += 1
            if streak >= adaptive.grow_patience:
                h = min(h * adaptive.grow, adaptive.h_max)
                streak = 0
            continue
        rec.n_rejected += 1
        streak = 0
        h = min(h, h_try) * adaptive.shrink
        if h < adaptive.h_min:
            raise StiffnessError(f"step size fell below h_min={adaptive.h_min:g} "
                                 f"at t={state.t:.6g}", rec.build())
    return rec.build()
