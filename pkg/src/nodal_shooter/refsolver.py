"""Brute-force reference solutions for validating the adaptive integrator.

Classical RK4 with a fixed step ``h``. The right-hand side has a cusp of type
``|u|^{1-2θ}`` where ``u`` changes sign, which would cap a uniform mesh at
order ``1 + (1 - 2θ)``; every zero of ``u`` is therefore approached and left
on a geometric mesh graded towards the crossing. Two runs, at ``h`` and
``h/2``, give a Richardson error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DomainError
from .integrator import Event, EventKind, IntegratorConfig, Termination, Trajectory, taylor_start
from .nonlin import Params, State

__all__ = ["ReferenceTrajectory", "reference_solve", "rk4_propagate"]

_ROOT_TOL = 1e-13
_GRADE = 1.5  # ratio between consecutive steps of the graded mesh
_START_H = 1e-4  # Taylor startup radius shared with the adaptive integrator


@dataclass
class ReferenceTrajectory(Trajectory):
    """Fine-step run with Richardson data from its half-resolution partner."""

    h: float = 0.0
    error_estimate: float = math.nan
    at: dict = field(default_factory=dict)


class _RK4:
    def __init__(self, P: Params):
        self.dm1 = P.d - 1.0
        self.alpha = 1.0 - 2.0 * P.theta

    def dv(self, r, u, v):
        fu = 0.0 if u == 0.0 else u - math.copysign(math.exp(self.alpha * math.log(abs(u))), u)
        return -self.dm1 / r * v - fu

    def step(self, r, u, v, h):
        dv = self.dv
        k1u, k1v = v, dv(r, u, v)
        hh = 0.5 * h
        k2u = v + hh * k1v
        k2v = dv(r + hh, u + hh * k1u, k2u)
        k3u = v + hh * k2v
        k3v = dv(r + hh, u + hh * k2u, k3u)
        k4u = v + h * k3v
        k4v = dv(r + h, u + h * k3u, k4u)
        return (
            u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )

    def root_in_step(self, r, u, v, h, comp):
        """Bisect ``tau`` in ``(0, h]`` for the sign change of ``comp`` (0: u, 1: v)."""
        s0 = (u, v)[comp]
        lo, hi = 0.0, h
        while hi - lo > _ROOT_TOL:
            mid = 0.5 * (lo + hi)
            s = self.step(r, u, v, mid)[comp]
            if (s > 0.0) == (s0 > 0.0) and s != 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def rk4_propagate(st: State, P: Params, h: float, r_end: float) -> State:
    """Plain fixed-step RK4 from ``st`` to ``r_end`` (last step shortened).

    No event handling; meant for smooth arcs.
    """
    rk = _RK4(P)
    r, u, v = st
    n = max(1, int(round((r_end - r) / h)))
    hs = (r_end - r) / n
    for i in range(n):
        u, v = rk.step(r, u, v, hs)
        r = st.r + (i + 1) * hs
    return State(r_end, u, v)


def _single_run(a, P, h, r_max, stops, stride, until_zero):
    rk = _RK4(P)
    st = taylor_start(a, _START_H, P)
    r, u, v = st
    rs, us, vs = [0.0, r], [a, u], [0.0, v]
    events: list[Event] = []
    at: dict[float, State] = {}
    pending = sorted(s for s in stops if s > r)
    n_step = 0
    grade_out = None  # current step size while leaving a zero of u
    last_zero = -math.inf
    termination = Termination.REACHED_R_MAX

    def record(force=False):
        if force or n_step % stride == 0:
            rs.append(r)
            us.append(u)
            vs.append(v)

    while r < r_max:
        hs = h if grade_out is None else grade_out
        target = min(r + hs, r_max)
        if pending and target >= pending[0]:
            target = pending[0]
        hs = target - r
        u1, v1 = rk.step(r, u, v, hs)
        if not (math.isfinite(u1) and math.isfinite(v1)):
            termination = Termination.STEP_LIMIT
            break

        crossing = u != 0.0 and u1 != 0.0 and (u1 > 0.0) != (u > 0.0)
        if crossing and r - last_zero > 1e3 * _ROOT_TOL:
            # graded approach towards the zero of u
            end = target
            dist = rk.root_in_step(r, u, v, hs, 0)
            while dist > _ROOT_TOL:
                step = dist * (1.0 - 1.0 / _GRADE)
                u, v = rk.step(r, u, v, step)
                r += step
                n_step += 1
                dist = rk.root_in_step(r, u, v, min(end - r, 2.0 * (dist - step)), 0)
            u, v = rk.step(r, u, v, dist)
            r += dist
            n_step += 1
            events.append(Event(EventKind.ZERO_OF_U, r, State(r, u, v)))
            last_zero = r
            record(force=True)
            if until_zero:
                break
            grade_out = _ROOT_TOL
            continue

        if v != 0.0 and v1 != 0.0 and (v1 > 0.0) != (v > 0.0):
            tau = rk.root_in_step(r, u, v, hs, 1)
            ue, ve = rk.step(r, u, v, tau)
            events.append(Event(EventKind.ZERO_OF_V, r + tau, State(r + tau, ue, ve)))

        u, v, r = u1, v1, target
        n_step += 1
        if grade_out is not None:
            grade_out *= _GRADE
            if grade_out >= h:
                grade_out = None
        if pending and r == pending[0]:
            at[pending.pop(0)] = State(r, u, v)
            record(force=True)
        else:
            record(force=r >= r_max)
    return rs, us, vs, events, at, termination


def reference_solve(
    a: float,
    P: Params,
    h: float = 1e-4,
    r_max: float = 10.0,
    stops: Sequence[float] = (),
    stride: int = 1,
    until_zero: bool = False,
) -> ReferenceTrajectory:
    """Fixed-step RK4 reference run at ``h``, paired with a run at ``h/2``.

    The returned trajectory is the step-``h/2`` run; ``error_estimate`` is the
    Richardson estimate ``max |y_h - y_{h/2}| / 15`` over ``r_max`` and the
    requested ``stops``, and ``at`` maps each stop radius to the state there.
    With ``until_zero`` both runs stop at the first zero of ``u`` and the
    estimate also covers its location.
    """
    if a == 0.0:
        raise DomainError("a = 0 is the trivial solution")
    if not (0.0 < h <= _START_H):
        raise DomainError("reference step must satisfy 0 < h <= 1e-4")
    stops = sorted(set(float(s) for s in stops if 0.0 < s <= r_max) | {float(r_max)})
    coarse = _single_run(float(a), P, h, r_max, stops, stride, until_zero)
    fine = _single_run(float(a), P, 0.5 * h, r_max, stops, 2 * stride, until_zero)
    err = 0.0
    for s in stops:
        if s in fine[4] and s in coarse[4]:
            yf, yc = fine[4][s], coarse[4][s]
            err = max(err, abs(yf.u - yc.u), abs(yf.v - yc.v))
    zf = [e.r for e in fine[3] if e.kind is EventKind.ZERO_OF_U]
    zc = [e.r for e in coarse[3] if e.kind is EventKind.ZERO_OF_U]
    if zf and zc:
        err = max(err, abs(zf[0] - zc[0]))
    rs, us, vs, events, at, termination = fine
    cfg = IntegratorConfig(r_max=max(r_max, 2 * _START_H), h_init=_START_H)
    return ReferenceTrajectory(
        P,
        float(a),
        np.array(rs),
        np.array(us),
        np.array(vs),
        events,
        termination,
        cfg,
        h=0.5 * h,
        error_estimate=err / 15.0,
        at=at,
    )
