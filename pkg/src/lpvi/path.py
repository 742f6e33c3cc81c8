"""Polynomial paths over a single step and the Euler-Lagrange residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .bernstein import basis_matrix
from .lagrangian import LagrangianModel

__all__ = [
    "BernsteinPath",
    "CollocationGrid",
    "make_grid",
    "path_value",
    "path_velocity",
    "path_accel",
    "el_residual",
    "el_residual_pointwise",
]


@dataclass(frozen=True)
class BernsteinPath:
    """q(t) = sum_j controls[j] b_{j,S}((t - t_start) / h) on [t_start, t_start + h].

    ``controls`` has shape ``(S + 1, d)``; row 0 is the start position and
    row S the end position.
    """

    t_start: float
    h: float
    controls: NDArray[np.float64]

    def __post_init__(self):
        c = np.array(self.controls, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError("controls must have shape (S + 1, d) with S >= 1")
        if not self.h > 0:
            raise ValueError(f"step length must be positive, got {self.h}")
        object.__setattr__(self, "controls", c)
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "h", float(self.h))

    @property
    def degree(self) -> int:
        return self.controls.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.controls.shape[1]

    @property
    def t_end(self) -> float:
        return self.t_start + self.h

    def _eval(self, t, deriv):
        tau = (np.asarray(t, dtype=float) - self.t_start) / self.h
        return basis_matrix(self.degree, tau, deriv) @ self.controls / self.h ** deriv

    def value(self, t: ArrayLike) -> NDArray[np.float64]:
        return self._eval(t, 0)

    def velocity(self, t: ArrayLike) -> NDArray[np.float64]:
        return self._eval(t, 1)

    def accel(self, t: ArrayLike) -> NDArray[np.float64]:
        return self._eval(t, 2)


def path_value(path: BernsteinPath, t: ArrayLike) -> NDArray[np.float64]:
    return path.value(t)


def path_velocity(path: BernsteinPath, t: ArrayLike) -> NDArray[np.float64]:
    return path.velocity(t)


def path_accel(path: BernsteinPath, t: ArrayLike) -> NDArray[np.float64]:
    return path.accel(t)


@dataclass(frozen=True)
class CollocationGrid:
    """Normalised node positions ``c^0 = 0 < ... < c^S = 1`` and the indices
    of the nodes where the Euler-Lagrange residual is driven to zero."""

    nodes: NDArray[np.float64]
    enforce: tuple[int, ...]

    def __post_init__(self):
        c = np.array(self.nodes, dtype=float).reshape(-1)
        if c.size < 2 or c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) <= 0):
            raise ValueError("nodes must increase strictly from 0 to 1")
        enforce = tuple(int(j) for j in self.enforce)
        if any(j < 0 or j >= c.size for j in enforce) or len(set(enforce)) != len(enforce):
            raise ValueError(f"invalid enforcement indices {enforce}")
        object.__setattr__(self, "nodes", c)
        object.__setattr__(self, "enforce", enforce)

    @property
    def degree(self) -> int:
        return self.nodes.size - 1

    @property
    def enforced_nodes(self) -> NDArray[np.float64]:
        return self.nodes[list(self.enforce)]


def make_grid(S: int, scheme: str = "uniform", enforcement: str = "internal") -> CollocationGrid:
    """Build the ``S + 1`` node grid.

    ``scheme`` is ``"uniform"`` (c^j = j/S) or ``"chebyshev-lobatto"``.
    With ``enforcement="internal"`` the residual is enforced at nodes
    1..S-1.  With ``"endpoints"`` it is enforced at S - 1 nodes that
    include both ends, chosen symmetrically (for S = 3 just the two ends).
    """
    if S < 2:
        raise ValueError(f"degree S must be at least 2, got {S}")
    j = np.arange(S + 1)
    if scheme == "uniform":
        nodes = j / S
    elif scheme in ("chebyshev-lobatto", "chebyshev"):
        nodes = 0.5 * (1.0 - np.cos(np.pi * j / S))
        nodes[0], nodes[-1] = 0.0, 1.0
    else:
        raise ValueError(f"unknown node scheme {scheme!r}")
    if enforcement == "internal":
        enforce = tuple(range(1, S))
    elif enforcement == "endpoints":
        if S < 3:
            raise ValueError("endpoint enforcement needs S >= 3")
        # rint rounds halves to even, which keeps the index set symmetric
        enforce = tuple(int(k) for k in np.rint(np.linspace(0, S, S - 1)))
    else:
        raise ValueError(f"unknown enforcement mode {enforcement!r}")
    return CollocationGrid(nodes, enforce)


def el_residual_pointwise(model: LagrangianModel, q, v, a, t):
    """dL/dq - d/dt(dL/dv) with the total derivative expanded by the chain rule."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    dtp = (np.einsum("...ij,...j->...i", model.hess_vq(q, v, t), v)
           + np.einsum("...ij,...j->...i", model.hess_vv(q, v, t), a)
           + model.grad_vt(q, v, t))
    return model.grad_q(q, v, t) - dtp


def el_residual(model: LagrangianModel, path: BernsteinPath, t: ArrayLike) -> NDArray[np.float64]:
    """Euler-Lagrange residual of ``model`` along ``path`` at time(s) ``t``."""
    if model.dim != path.dim:
        raise ValueError(f"model dimension {model.dim} does not match path dimension {path.dim}")
    return el_residual_pointwise(model, path.value(t), path.velocity(t), path.accel(t), t)
