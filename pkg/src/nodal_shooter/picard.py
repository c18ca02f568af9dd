"""Fixed-point construction of the solution near the origin.

The radial problem is equivalent to the Volterra system

    u(r) = a + int_0^r v(s) ds
    v(r) = -r^{1-d} int_0^r s^{d-1} f(u(s)) ds

which is iterated on a uniform grid. This gives a solution near ``r = 0``
built without any ODE stepping, so it can be set against the integrator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DomainError, NoConvergence
from .nonlin import Params

__all__ = ["PicardGrid", "picard_iterate", "picard_solve", "seed_grid"]

# closed to |u| < this, g(u) is treated as not evaluable
_U_GUARD = 1e-6


@dataclass(frozen=True)
class PicardGrid:
    delta: float
    n: int
    u: np.ndarray
    v: np.ndarray
    sweeps: int = 0

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("need at least 8 subintervals")
        if len(self.u) != self.n + 1 or len(self.v) != self.n + 1:
            raise ValueError("u and v must have n + 1 samples")

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.delta, self.n + 1)

    @property
    def h(self) -> float:
        return self.delta / self.n


def seed_grid(a: float, delta: float, n: int) -> PicardGrid:
    """Constant seed ``u = a``, ``v = 0``."""
    return PicardGrid(float(delta), int(n), np.full(n + 1, float(a)), np.zeros(n + 1))


@lru_cache(maxsize=32)
def _panel_weights(n: int, m: float) -> tuple[np.ndarray, np.ndarray]:
    """Moments ``A_j = int_0^1 (j+t)^m dt`` and ``B_j = int_0^1 (j+t)^m t dt``.

    Panel ``j`` of ``int s^m f`` with ``f`` linear on the panel then equals
    ``h^{m+1} (f_j (A_j - B_j) + f_{j+1} B_j)``.
    """
    j = np.arange(n, dtype=float)
    x, w = np.polynomial.legendre.leggauss(10)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    base = (j[:, None] + t[None, :]) ** m
    A = base @ w
    B = base @ (w * t)
    # the first panel carries the s^m endpoint behaviour; use exact moments
    A[0] = 1.0 / (m + 1.0)
    B[0] = 1.0 / (m + 2.0)
    return A, B


def picard_iterate(grid: PicardGrid, a: float, P: Params) -> PicardGrid:
    """One sweep of the fixed-point map.

    ``v`` is rebuilt from the current ``u`` (product trapezoid: ``f(u)``
    piecewise linear, weight ``s^{d-1}`` integrated exactly), then ``u`` from
    the new ``v`` by the trapezoid rule.
    """
    u = grid.u
    if np.any(np.abs(u) < _U_GUARD):
        raise DomainError("iterate entered the band |u| < 1e-6 where g is not evaluable")
    n, h = grid.n, grid.h
    m = P.d - 1.0
    alpha = 1.0 - 2.0 * P.theta
    fu = u - np.sign(u) * np.exp(alpha * np.log(np.abs(u)))

    A, B = _panel_weights(n, m)
    panels = fu[:-1] * (A - B) + fu[1:] * B
    i = np.arange(1, n + 1, dtype=float)
    v_new = np.empty(n + 1)
    v_new[0] = 0.0
    v_new[1:] = -h * np.cumsum(panels) / i**m

    u_new = np.empty(n + 1)
    u_new[0] = a
    u_new[1:] = a + np.cumsum(0.5 * h * (v_new[:-1] + v_new[1:]))
    return PicardGrid(grid.delta, n, u_new, v_new, grid.sweeps + 1)


def picard_solve(
    a: float,
    delta: float,
    P: Params,
    tol: float = 1e-12,
    max_sweeps: int = 200,
    n: int = 4096,
) -> PicardGrid:
    """Iterate from the constant seed until successive sweeps agree to ``tol``.

    Raises
    ------
    NoConvergence
        If ``max_sweeps`` is exhausted; shrinking ``delta`` is the usual cure.
    """
    if a == 0.0:
        raise DomainError("a = 0 is the trivial solution")
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    grid = seed_grid(a, delta, n)
    for _ in range(max_sweeps):
        new = picard_iterate(grid, a, P)
        change = np.max(np.abs(new.u - grid.u)) + np.max(np.abs(new.v - grid.v))
        grid = new
        if change <= tol:
            return grid
    raise NoConvergence(f"no convergence after {max_sweeps} sweeps on delta={delta}")
