"""Shooting in the initial value ``a``.

Dirichlet problems on the ball of radius ``R`` are solved by locating sign
changes of ``a -> u(R; a)`` on a grid and refining them. The map jumps where
the number of zeros inside the ball changes, so every candidate interval is
checked for its zero count before it is refined, and refined roots whose
residual stays large are discarded as jumps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np
from scipy.optimize import brentq, golden

from .analysis import lambda1_threshold
from .exceptions import BracketError, DomainError, PreconditionError
from .integrator import EventKind, IntegratorConfig, Termination, integrate
from .nonlin import Params, energy

__all__ = [
    "ShotOutcome",
    "DeadCoreCandidate",
    "shoot",
    "first_zero",
    "solve_dirichlet",
    "find_dead_core",
    "scan_dead_core",
    "write_shots_csv",
]

GRID_POINTS = 256
ROOT_RESIDUAL = 1e-8
# a dead-core scan never needs to look further out than this
DEAD_CORE_R_MAX = 50.0


@dataclass(frozen=True)
class ShotOutcome:
    a: float
    u_at_R: float
    v_at_R: float
    interior_zeros: int
    rho_a: Optional[float]
    energy_at_R: float
    termination: Termination = Termination.REACHED_R_MAX

    @property
    def flagged(self) -> bool:
        return self.termination not in (Termination.REACHED_R_MAX, Termination.DEAD_CORE)


@dataclass(frozen=True)
class DeadCoreCandidate:
    a: float
    R: float
    speed: float  # |v(rho_a)|; zero for an exact dead core


def shoot(a: float, R: float, P: Params, cfg: Optional[IntegratorConfig] = None) -> ShotOutcome:
    """Integrate from ``u(0) = a`` to exactly ``r = R`` and report the boundary data."""
    if not R > 0.0:
        raise DomainError("R must be positive")
    if a == 0.0:
        raise DomainError("a = 0 is the trivial solution")
    cfg = (cfg or IntegratorConfig()).with_r_max(float(R))
    traj = integrate(a, P, cfg)
    st = traj.final
    if traj.termination is Termination.DEAD_CORE:
        # the solution continues by zero up to R
        st = st._replace(r=float(R), u=0.0, v=0.0)
    edge = float(R) - 1e-8 * max(1.0, float(R))
    zeros = [e.r for e in traj.events_of(EventKind.ZERO_OF_U)]
    return ShotOutcome(
        a=float(a),
        u_at_R=st.u,
        v_at_R=st.v,
        interior_zeros=sum(1 for r in zeros if r < edge),
        rho_a=zeros[0] if zeros else None,
        energy_at_R=energy(st, P),
        termination=traj.termination,
    )


def first_zero(a: float, P: Params, cfg: Optional[IntegratorConfig] = None) -> Optional[tuple[float, float]]:
    """``(rho_a, |v(rho_a)|)`` or None when ``u`` keeps its sign up to ``cfg.r_max``.

    A run that ends in a dead core counts as touching zero with speed 0.
    """
    cfg = cfg or IntegratorConfig(r_max=DEAD_CORE_R_MAX)
    traj = integrate(a, P, cfg)
    zeros = traj.events_of(EventKind.ZERO_OF_U)
    if zeros:
        return zeros[0].r, abs(zeros[0].state.v)
    if traj.termination is Termination.DEAD_CORE:
        return traj.final.r, 0.0
    return None


def solve_dirichlet(
    R: float,
    k: int,
    bracket: tuple[float, float],
    P: Params,
    cfg: Optional[IntegratorConfig] = None,
    tol_a: float = 1e-12,
    n_grid: int = GRID_POINTS,
) -> list[float]:
    """Initial values ``a`` in ``bracket`` with ``u(R) = 0`` and ``k`` zeros inside the ball.

    A grid interval qualifies when ``u(R)`` changes sign across it and the
    zero counts at its ends are ``k`` and ``k`` or ``k + 1`` (a root at ``R``
    is exactly where a zero leaves the ball). Each qualifying interval is
    refined with Brent's method to ``tol_a``; roots with ``|u(R)| > 1e-8``
    are jumps of the map, not solutions, and are dropped.

    Raises
    ------
    PreconditionError
        For ``k >= 1`` with a bracket reaching below ``p``.
    BracketError
        If no root survives.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise DomainError("bracket must satisfy lo < hi")
    if k < 0:
        raise DomainError("k must be non-negative")
    if k >= 1 and lo <= P.p:
        raise PreconditionError(f"nodal solutions need a > p = {P.p}, bracket starts at {lo}")
    cfg = cfg or IntegratorConfig()

    grid = np.linspace(lo, hi, n_grid)
    shots = [shoot(a, R, P, cfg) if a != 0.0 else None for a in grid.tolist()]

    def u_R(a: float) -> float:
        return shoot(a, R, P, cfg).u_at_R

    roots: list[float] = []
    for s0, s1 in zip(shots, shots[1:]):
        if s0 is None or s1 is None or s0.flagged or s1.flagged:
            continue
        counts = sorted((s0.interior_zeros, s1.interior_zeros))
        if counts[0] != k or counts[1] - counts[0] > 1:
            continue
        if s0.u_at_R == 0.0:
            a_star = s0.a
        elif (s0.u_at_R > 0.0) == (s1.u_at_R > 0.0):
            continue
        else:
            a_star = brentq(u_R, s0.a, s1.a, xtol=tol_a, rtol=4 * np.finfo(float).eps, maxiter=200)
        if abs(u_R(a_star)) <= ROOT_RESIDUAL and (not roots or a_star != roots[-1]):
            roots.append(float(a_star))
    if shots[-1] is not None and shots[-1].u_at_R == 0.0 and shots[-1].interior_zeros == k:
        roots.append(float(shots[-1].a))
    if not roots:
        raise BracketError(f"no Dirichlet root with {k} interior zeros in [{lo}, {hi}] for R = {R}")
    return roots


def scan_dead_core(
    bracket: tuple[float, float],
    P: Params,
    cfg: Optional[IntegratorConfig] = None,
    n_grid: int = 64,
    xtol: float = 1e-13,
) -> DeadCoreCandidate:
    """Minimiser of ``a -> |v(rho_a)|`` over the bracket, whatever its value.

    The grid minimiser is refined by golden section between its neighbours.
    When a neighbour has no zero the minimum sits at the edge of the region
    where zeros exist, and that edge is located by bisection instead.

    Raises
    ------
    BracketError
        If ``u`` has no zero for any ``a`` on the grid.
    """
    lo, hi = map(float, bracket)
    cfg = cfg or IntegratorConfig(r_max=DEAD_CORE_R_MAX)
    grid = np.linspace(lo, hi, n_grid).tolist()
    vals = [first_zero(a, P, cfg) for a in grid]
    have = [i for i, z in enumerate(vals) if z is not None]
    if not have:
        raise BracketError(f"u has no zero for any a in [{lo}, {hi}]")
    i = min(have, key=lambda j: vals[j][1])

    def speed(a: float) -> float:
        z = first_zero(a, P, cfg)
        return math.inf if z is None else z[1]

    empty_nb = [j for j in (i - 1, i + 1) if 0 <= j < len(grid) and vals[j] is None]
    if empty_nb:
        # zeros present at grid[i], absent at grid[j]: bisect on existence
        a_in, a_out = grid[i], grid[empty_nb[0]]
        while abs(a_out - a_in) > xtol * max(1.0, abs(a_in)):
            mid = 0.5 * (a_in + a_out)
            if first_zero(mid, P, cfg) is None:
                a_out = mid
            else:
                a_in = mid
        a_star = a_in
    else:
        left = grid[max(i - 1, 0)]
        right = grid[min(i + 1, len(grid) - 1)]
        if left == right:
            a_star = left
        else:
            a_star = float(golden(speed, brack=(left, grid[i], right), tol=1e-10))
            a_star = min(max(a_star, left), right)
    z = first_zero(a_star, P, cfg)
    if z is None or z[1] > vals[i][1]:
        a_star, z = grid[i], vals[i]
    return DeadCoreCandidate(float(a_star), float(z[0]), float(z[1]))


def find_dead_core(
    bracket: tuple[float, float],
    P: Params,
    cfg: Optional[IntegratorConfig] = None,
    tol: float = 1e-6,
) -> Optional[DeadCoreCandidate]:
    """A compact-support candidate ``(a, R)`` with ``|v(rho_a)| <= tol``, or None.

    Any candidate returned satisfies ``R > sqrt(lambda_1) - 1e-6``; a
    violation would contradict the energy argument and raises AssertionError.
    """
    best = scan_dead_core(bracket, P, cfg)
    if best.speed > tol:
        return None
    if P.d in (2, 3):
        bound = lambda1_threshold(P.d)
        if not best.R > bound - 1e-6:
            raise AssertionError(f"candidate radius {best.R} below sqrt(lambda1) = {bound}")
    return best


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_shots_csv(shots: Iterable[ShotOutcome], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["a", "u_R", "v_R", "zeros", "rho_a", "E_R"])
    for s in shots:
        w.writerow([_cell(s.a), _cell(s.u_at_R), _cell(s.v_at_R), str(s.interior_zeros),
                    _cell(s.rho_a), _cell(s.energy_at_R)])
