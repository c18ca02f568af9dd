"""Radial solutions of a semilinear elliptic equation with a sublinear singular term.

The profile ``u(r)`` of a radial solution obeys

    u'' + (d - 1)/r u' + f(u) = 0,   u(0) = a,  u'(0) = 0,

with ``f(s) = s - sign(s)|s|^{1-2θ}``. The package integrates this problem,
classifies the long-range behaviour in ``a`` and shoots for Dirichlet
solutions on balls.
"""
from .exceptions import (
    BracketError,
    DomainError,
    MissingEvent,
    NoConvergence,
    NotSupported,
    PreconditionError,
)
from .nonlin import F, Params, State, energy, f, f_prime, g, make_params
from .integrator import EventKind, IntegratorConfig, Termination, Trajectory, integrate
from .analysis import Regime, RegimeTag, classify, extract_skeleton, lambda1_threshold
from .picard import picard_solve
from .refsolver import reference_solve
from .shooting import find_dead_core, shoot, solve_dirichlet

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "DomainError",
    "MissingEvent",
    "NoConvergence",
    "NotSupported",
    "PreconditionError",
    "F",
    "Params",
    "State",
    "energy",
    "f",
    "f_prime",
    "g",
    "make_params",
    "EventKind",
    "IntegratorConfig",
    "Termination",
    "Trajectory",
    "integrate",
    "Regime",
    "RegimeTag",
    "classify",
    "extract_skeleton",
    "lambda1_threshold",
    "picard_solve",
    "reference_solve",
    "find_dead_core",
    "shoot",
    "solve_dirichlet",
]
