"""Closed-form pieces of the nonlinearity ``f(u) = u - |u|^{-2θ} u``.

All functions are scalar and work on plain floats; they are cheap enough to
sit in the inner loop of the integrators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .exceptions import DomainError

__all__ = [
    "Params",
    "State",
    "make_params",
    "g",
    "f",
    "f_prime",
    "F",
    "energy",
]


@dataclass(frozen=True)
class Params:
    """Problem constants and the thresholds derived from them.

    Attributes
    ----------
    d : float
        Dimension, any real number greater than one.
    theta : float
        Exponent, ``0 < theta < 1/2``.
    p : float
        Unique zero of ``F`` on ``(1, inf)``.
    s_theta : float
        Minimiser of ``f`` on ``(0, inf)``.
    F_min : float
        ``F(1)``, the global minimum of ``F``.
    """

    d: float
    theta: float
    p: float
    s_theta: float
    F_min: float


class State(NamedTuple):
    """Phase point ``(r, u, v = u')``."""

    r: float
    u: float
    v: float


def make_params(d: float, theta: float) -> Params:
    d = float(d)
    theta = float(theta)
    if not (math.isfinite(d) and d > 1.0):
        raise DomainError(f"dimension must satisfy d > 1, got {d!r}")
    if not (0.0 < theta < 0.5):
        raise DomainError(f"theta must lie in (0, 1/2), got {theta!r}")
    p = (1.0 - theta) ** (-1.0 / (2.0 * theta))
    s_theta = (1.0 - 2.0 * theta) ** (1.0 / (2.0 * theta))
    F_min = -theta / (2.0 * (1.0 - theta))
    return Params(d=d, theta=theta, p=p, s_theta=s_theta, F_min=F_min)


def _abs_pow(s: float, e: float) -> float:
    # |s|**e through exp/log; keeps relative precision for tiny |s|
    return math.exp(e * math.log(abs(s)))


def g(s: float, P: Params) -> float:
    if s == 0.0:
        raise DomainError("g is unbounded at s = 0")
    return 1.0 - _abs_pow(s, -2.0 * P.theta)


def f(s: float, P: Params) -> float:
    """``s - sign(s)|s|^{1-2θ}``, extended by ``f(0) = 0``; odd in ``s``."""
    if s == 0.0:
        return 0.0
    return s - math.copysign(_abs_pow(s, 1.0 - 2.0 * P.theta), s)


def f_prime(s: float, P: Params) -> float:
    if s == 0.0:
        raise DomainError("f' diverges at s = 0")
    return 1.0 - (1.0 - 2.0 * P.theta) * _abs_pow(s, -2.0 * P.theta)


def F(s: float, P: Params) -> float:
    """Primitive of ``f`` vanishing at 0; even in ``s``."""
    if s == 0.0:
        return 0.0
    return 0.5 * s * s - _abs_pow(s, 2.0 - 2.0 * P.theta) / (2.0 * (1.0 - P.theta))


def energy(st: State, P: Params) -> float:
    """``v²/2 + F(u)``; non-increasing along solutions."""
    return 0.5 * st.v * st.v + F(st.u, P)
