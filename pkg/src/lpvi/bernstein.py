"""Bernstein basis polynomials on [0, 1].

All values are generated with the triangular recurrence

    b_{j,n}(x) = (1 - x) b_{j,n-1}(x) + x b_{j-1,n-1}(x),

which only ever forms convex combinations for x in [0, 1] and so stays
well conditioned for degrees well beyond 30.  Derivatives follow from
the degree-lowering identity b'_{j,n} = n (b_{j-1,n-1} - b_{j,n-1}).
Points outside [0, 1] are accepted and use the same recurrence.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "binomial",
    "basis_all",
    "basis_matrix",
    "basis_value",
    "basis_derivative",
    "basis_second_derivative",
    "approximant_value",
]


def binomial(n: int, j: int) -> float:
    """Binomial coefficient C(n, j) as a float, zero outside 0 <= j <= n."""
    if j < 0 or j > n:
        return 0.0
    j = min(j, n - j)
    c = 1.0
    for i in range(1, j + 1):
        c = c * (n - j + i) / i
    return c


def basis_all(n: int, x: ArrayLike) -> NDArray[np.float64]:
    """Evaluate every degree-``n`` basis polynomial at ``x``.

    Parameters
    ----------
    n : int
        Degree, ``n >= 0``.
    x : array_like
        Evaluation points, any shape.

    Returns
    -------
    ndarray
        Shape ``x.shape + (n + 1,)``; entry ``[..., j]`` is ``b_{j,n}(x)``.
    """
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (n + 1,))
    out[..., 0] = 1.0
    s = 1.0 - x
    for k in range(1, n + 1):
        # in-place update from the top so b_{j-1,k-1} is still available
        out[..., k] = x * out[..., k - 1]
        for j in range(k - 1, 0, -1):
            out[..., j] = s * out[..., j] + x * out[..., j - 1]
        out[..., 0] = s * out[..., 0]
    return out


def _lowered(n: int, x: NDArray[np.float64], drop: int) -> NDArray[np.float64]:
    # degree n-drop basis padded with `drop` zeros on both sides, so index
    # j+drop of the result holds b_{j,n-drop}; out-of-range j reads as 0.
    low = basis_all(n - drop, x)
    pad = [(0, 0)] * (low.ndim - 1) + [(drop, drop)]
    return np.pad(low, pad)


def basis_matrix(n: int, x: ArrayLike, deriv: int = 0) -> NDArray[np.float64]:
    """Values (``deriv=0``), first or second derivatives of all degree-``n``
    basis polynomials, shape ``x.shape + (n + 1,)``."""
    x = np.asarray(x, dtype=float)
    if deriv == 0:
        return basis_all(n, x)
    if deriv == 1:
        if n < 1:
            return np.zeros(x.shape + (n + 1,))
        low = _lowered(n, x, 1)
        # b_{j-1,n-1} sits at index j, b_{j,n-1} at index j+1
        return n * (low[..., 0:n + 1] - low[..., 1:n + 2])
    if deriv == 2:
        if n < 2:
            return np.zeros(x.shape + (n + 1,))
        low = _lowered(n, x, 2)
        return n * (n - 1) * (low[..., 0:n + 1] - 2.0 * low[..., 1:n + 2] + low[..., 2:n + 3])
    raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")


def _pick(n: int, j: int, x: ArrayLike, deriv: int):
    x = np.asarray(x, dtype=float)
    if j < 0 or j > n:
        val = np.zeros(x.shape)
    else:
        val = basis_matrix(n, x, deriv)[..., j]
    return float(val) if val.ndim == 0 else val


def basis_value(j: int, n: int, x: ArrayLike):
    """b_{j,n}(x) = C(n, j) x^j (1 - x)^(n - j); zero when ``j < 0`` or ``j > n``."""
    return _pick(n, j, x, 0)


def basis_derivative(j: int, n: int, x: ArrayLike):
    """First derivative of b_{j,n}; identically zero for ``n == 0``."""
    return _pick(n, j, x, 1)


def basis_second_derivative(j: int, n: int, x: ArrayLike):
    """Second derivative of b_{j,n}; identically zero for ``n < 2``."""
    return _pick(n, j, x, 2)


def approximant_value(samples: ArrayLike, x: ArrayLike):
    """Bernstein approximant sum_j f(j/n) b_{j,n}(x) from the ``n + 1`` samples
    ``f(0), f(1/n), ..., f(1)``."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-d sequence")
    val = basis_all(samples.size - 1, x) @ samples
    return float(val) if np.ndim(val) == 0 else val
