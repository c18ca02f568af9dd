"""Adaptive integration of the radial problem from the singular point r = 0.

The ODE ``u'' + (d-1)/r u' + f(u) = 0`` is written as the first-order system
``u' = v, v' = -(d-1)/r v - f(u)`` and advanced with the Dormand-Prince 5(4)
pair. Sign changes of ``u``, ``v``, ``u - 1`` and ``u + 1`` are located on a
cubic Hermite interpolant and polished with the full right-hand side.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError
from .nonlin import Params, State, energy, f, g

__all__ = [
    "IntegratorConfig",
    "EventKind",
    "Event",
    "Termination",
    "Trajectory",
    "rhs",
    "taylor_start",
    "integrate",
    "resume",
    "concatenate",
    "write_trajectory_csv",
    "write_events_csv",
]

# longest step the controller may take; keeps at most one extremum per step
_H_MAX = 0.25
_SAFETY = 0.9
_BETA = 0.04  # PI (Gustafsson) controller memory
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r_max: float = 200.0
    h_init: float = 1e-4
    h_min: float = 1e-12
    event_tol: float = 1e-12
    dead_core_eps: float = 1e-9
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "h_init", "h_min", "event_tol", "dead_core_eps"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not (self.h_min < self.h_init < self.r_max):
            raise ValueError("need h_min < h_init < r_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    def with_r_max(self, r_max: float) -> "IntegratorConfig":
        return replace(self, r_max=float(r_max))


class EventKind(str, enum.Enum):
    ZERO_OF_U = "ZeroOfU"
    ZERO_OF_V = "ZeroOfV"
    CROSS_UP_1 = "CrossUp1"
    CROSS_DOWN_1 = "CrossDown1"
    CROSS_UP_MINUS_1 = "CrossUpMinus1"
    CROSS_DOWN_MINUS_1 = "CrossDownMinus1"
    DEAD_CORE = "DeadCore"


class Termination(str, enum.Enum):
    REACHED_R_MAX = "ReachedRMax"
    DEAD_CORE = "DeadCore"
    STEP_UNDERFLOW = "StepUnderflow"
    STEP_LIMIT = "StepLimit"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    r: float
    state: State


@dataclass
class Trajectory:
    """Accepted steps of one integration run plus the events found on them.

    ``r``, ``u`` and ``v`` are aligned arrays; ``energies`` is recomputed from
    them at construction.
    """

    params: Params
    a: float
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    events: list[Event]
    termination: Termination
    config: IntegratorConfig
    energies: np.ndarray = field(init=False)

    def __post_init__(self):
        P = self.params
        self.energies = np.array(
            [energy(State(0.0, ui, vi), P) for ui, vi in zip(self.u.tolist(), self.v.tolist())]
        )

    @property
    def states(self) -> list[State]:
        return [State(*t) for t in zip(self.r.tolist(), self.u.tolist(), self.v.tolist())]

    @property
    def final(self) -> State:
        return State(float(self.r[-1]), float(self.u[-1]), float(self.v[-1]))

    def events_of(self, *kinds: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    def sample(self, r: float | Sequence[float]) -> np.ndarray:
        """Evaluate ``(u, v)`` on the cubic Hermite dense output.

        Returns an array of shape ``(2,)`` for scalar input and ``(n, 2)``
        otherwise.
        """
        scalar = np.ndim(r) == 0
        rs = np.atleast_1d(np.asarray(r, dtype=float))
        if rs.min() < self.r[0] or rs.max() > self.r[-1]:
            raise ValueError("sample point outside the integrated range")
        idx = np.clip(np.searchsorted(self.r, rs, side="right") - 1, 0, len(self.r) - 2)
        out = np.empty((len(rs), 2))
        d = self.params.d
        for j, (i, x) in enumerate(zip(idx.tolist(), rs.tolist())):
            r0, r1 = float(self.r[i]), float(self.r[i + 1])
            y0 = (float(self.u[i]), float(self.v[i]))
            y1 = (float(self.u[i + 1]), float(self.v[i + 1]))
            out[j] = _hermite(x, r0, r1, y0, _deriv(r0, *y0, d, self.params), y1,
                              _deriv(r1, *y1, d, self.params))
        return out[0] if scalar else out


def rhs(st: State, P: Params) -> tuple[float, float]:
    if not st.r > 0.0:
        raise DomainError("rhs is singular at r = 0; start with taylor_start")
    return st.v, -(P.d - 1.0) / st.r * st.v - f(st.u, P)


def taylor_start(a: float, h: float, P: Params) -> State:
    """Second-order expansion of the regular solution, ``u''(0) = -a g(a)/d``."""
    if a == 0.0:
        raise DomainError("a = 0 gives the trivial solution; nothing to integrate")
    curv = -a * g(a, P) / P.d
    return State(h, a + 0.5 * curv * h * h, curv * h)


def _deriv(r: float, u: float, v: float, d: float, P: Params) -> tuple[float, float]:
    if r == 0.0:
        # regular limit of the first-order system: v' -> u''(0) = -u g(u)/d
        return 0.0, -f(u, P) / d
    return v, -(d - 1.0) / r * v - f(u, P)


def _hermite(x, r0, r1, y0, dy0, y1, dy1):
    h = r1 - r0
    t = (x - r0) / h
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return (
        h00 * y0[0] + h10 * h * dy0[0] + h01 * y1[0] + h11 * h * dy1[0],
        h00 * y0[1] + h10 * h * dy0[1] + h01 * y1[1] + h11 * h * dy1[1],
    )


class _Stepper:
    """Single Dormand-Prince steps for one parameter set."""

    def __init__(self, P: Params):
        self.P = P
        self.dm1 = P.d - 1.0
        self.alpha = 1.0 - 2.0 * P.theta

    def fu(self, u: float) -> float:
        if u == 0.0:
            return 0.0
        return u - math.copysign(math.exp(self.alpha * math.log(abs(u))), u)

    def deriv(self, r: float, u: float, v: float) -> float:
        return -self.dm1 / r * v - self.fu(u)

    def step(self, r, u, v, ku1, kv1, h):
        """One step from ``(r, u, v)`` with first stage ``(ku1, kv1)``.

        Returns the fifth-order solution, its derivative (FSAL stage) and the
        embedded error components.
        """
        dv = self.deriv
        ku2 = v + h * _A21 * kv1
        kv2 = dv(r + _C2 * h, u + h * _A21 * ku1, ku2)
        ku3 = v + h * (_A31 * kv1 + _A32 * kv2)
        kv3 = dv(r + _C3 * h, u + h * (_A31 * ku1 + _A32 * ku2), ku3)
        ku4 = v + h * (_A41 * kv1 + _A42 * kv2 + _A43 * kv3)
        kv4 = dv(r + _C4 * h, u + h * (_A41 * ku1 + _A42 * ku2 + _A43 * ku3), ku4)
        ku5 = v + h * (_A51 * kv1 + _A52 * kv2 + _A53 * kv3 + _A54 * kv4)
        kv5 = dv(
            r + _C5 * h,
            u + h * (_A51 * ku1 + _A52 * ku2 + _A53 * ku3 + _A54 * ku4),
            ku5,
        )
        ku6 = v + h * (_A61 * kv1 + _A62 * kv2 + _A63 * kv3 + _A64 * kv4 + _A65 * kv5)
        kv6 = dv(
            r + h,
            u + h * (_A61 * ku1 + _A62 * ku2 + _A63 * ku3 + _A64 * ku4 + _A65 * ku5),
            ku6,
        )
        u1 = u + h * (_B1 * ku1 + _B3 * ku3 + _B4 * ku4 + _B5 * ku5 + _B6 * ku6)
        v1 = v + h * (_B1 * kv1 + _B3 * kv3 + _B4 * kv4 + _B5 * kv5 + _B6 * kv6)
        ku7 = v1
        kv7 = dv(r + h, u1, v1)
        eu = h * (_E1 * ku1 + _E3 * ku3 + _E4 * ku4 + _E5 * ku5 + _E6 * ku6 + _E7 * ku7)
        ev = h * (_E1 * kv1 + _E3 * kv3 + _E4 * kv4 + _E5 * kv5 + _E6 * kv6 + _E7 * kv7)
        return u1, v1, ku7, kv7, eu, ev


# event functions: (value extractor, kind on increase, kind on decrease)
_EVENT_SPECS = (
    (lambda u, v: u, EventKind.ZERO_OF_U, EventKind.ZERO_OF_U),
    (lambda u, v: v, EventKind.ZERO_OF_V, EventKind.ZERO_OF_V),
    (lambda u, v: u - 1.0, EventKind.CROSS_UP_1, EventKind.CROSS_DOWN_1),
    (lambda u, v: u + 1.0, EventKind.CROSS_UP_MINUS_1, EventKind.CROSS_DOWN_MINUS_1),
)


def _sign(x: float) -> int:
    return (x > 0.0) - (x < 0.0)


def _refine(stepper: _Stepper, which: int, r0, y0, dy0, r1, y1, dy1, tol):
    """Locate the root of event ``which`` inside ``[r0, r1]``."""
    extract = _EVENT_SPECS[which][0]

    def on_interp(x):
        return extract(*_hermite(x, r0, r1, y0, dy0, y1, dy1))

    s0, s1 = extract(*y0), extract(*y1)
    if s1 == 0.0:
        return r1, y1
    if s0 == 0.0:
        return r0, y0
    root = brentq(on_interp, r0, r1, xtol=tol, rtol=4 * np.finfo(float).eps)
    # polish: exact RK sub-step to the root, then Newton with the true slope
    for _ in range(4):
        h = root - r0
        if h <= 0.0:
            return r0, y0
        if root >= r1:
            return r1, y1
        u, v, _, _, _, _ = stepper.step(r0, y0[0], y0[1], dy0[0], dy0[1], h)
        s = extract(u, v)
        slope = v if which != 1 else stepper.deriv(root, u, v)
        if abs(s) <= tol or slope == 0.0:
            break
        new_root = root - s / slope
        if not (r0 < new_root < r1):
            break
        root = new_root
    if r1 - root <= tol:
        return r1, y1
    return root, (u, v)


def _run(
    P: Params,
    a: float,
    start: list[State],
    cfg: IntegratorConfig,
) -> Trajectory:
    """Advance from ``start[-1]`` to ``cfg.r_max``; ``start`` seeds the output."""
    stepper = _Stepper(P)
    rs = [s.r for s in start]
    us = [s.u for s in start]
    vs = [s.v for s in start]
    events: list[Event] = []

    r, u, v = start[-1]
    r_end = cfg.r_max
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    # last non-zero sign of each event function
    signs = []
    for extract, _, _ in _EVENT_SPECS:
        sg = _sign(extract(u, v))
        if sg == 0 and len(start) > 1:
            sg = _sign(extract(start[-2].u, start[-2].v))
        signs.append(sg)

    termination = Termination.REACHED_R_MAX
    if r >= r_end:
        return Trajectory(P, a, np.array(rs), np.array(us), np.array(vs), events, termination, cfg)

    ku, kv = v, stepper.deriv(r, u, v)
    h = min(cfg.h_init, _H_MAX, r_end - r)
    err_old = 1e-4
    n_steps = 0
    last_event_r = -math.inf

    while r < r_end:
        if n_steps >= cfg.max_steps:
            termination = Termination.STEP_LIMIT
            break
        if h < cfg.h_min:
            termination = Termination.STEP_UNDERFLOW
            break
        last = False
        if r + h >= r_end or r_end - (r + h) < cfg.h_min:
            h = r_end - r
            last = True
        u1, v1, ku1, kv1, eu, ev = stepper.step(r, u, v, ku, kv, h)
        n_steps += 1
        sk_u = atol + rtol * max(abs(u), abs(u1))
        sk_v = atol + rtol * max(abs(v), abs(v1))
        err = math.sqrt(0.5 * ((eu / sk_u) ** 2 + (ev / sk_v) ** 2))
        if not math.isfinite(err):
            h *= _FAC_MIN
            continue
        fac = err**_EXPO
        if err > 1.0:
            h = h / min(1.0 / _FAC_MIN, fac / _SAFETY)
            continue

        r1 = r_end if last else r + h
        y0, dy0 = (u, v), (ku, kv)
        y1, dy1 = (u1, v1), (ku1, kv1)
        found = []
        for k, (extract, up_kind, down_kind) in enumerate(_EVENT_SPECS):
            s1 = _sign(extract(u1, v1))
            if s1 == 0:
                if signs[k] != 0:
                    kind = up_kind if signs[k] < 0 else down_kind
                    found.append((r1, y1, kind))
                    signs[k] = -signs[k]
                continue
            if signs[k] == 0:
                signs[k] = s1
                continue
            if s1 != signs[k]:
                kind = up_kind if s1 > 0 else down_kind
                rr, yy = _refine(stepper, k, r, y0, dy0, r1, y1, dy1, cfg.event_tol)
                found.append((rr, yy, kind))
                signs[k] = s1
        found.sort(key=lambda t: t[0])
        for rr, yy, kind in found:
            if rr <= last_event_r:
                rr = math.nextafter(last_event_r, math.inf)
            events.append(Event(kind, rr, State(rr, float(yy[0]), float(yy[1]))))
            last_event_r = rr

        r, u, v, ku, kv = r1, u1, v1, ku1, kv1
        rs.append(r)
        us.append(u)
        vs.append(v)

        eps = cfg.dead_core_eps
        if abs(u) < eps and abs(v) < eps and abs(energy(State(r, u, v), P)) < eps:
            events.append(Event(EventKind.DEAD_CORE, r, State(r, u, v)))
            termination = Termination.DEAD_CORE
            break

        err_c = max(err, 1e-10)
        fac = _SAFETY * err_c ** (-_EXPO) * err_old**_BETA
        fac = min(_FAC_MAX, max(_FAC_MIN, fac))
        err_old = max(err, 1e-4)
        h = min(h * fac, _H_MAX)

    return Trajectory(P, a, np.array(rs), np.array(us), np.array(vs), events, termination, cfg)


def integrate(a: float, P: Params, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate problem ``u(0) = a, u'(0) = 0`` out to ``cfg.r_max``.

    Termination anomalies (step underflow, step limit) are reported in
    ``Trajectory.termination`` rather than raised.
    """
    cfg = cfg or IntegratorConfig()
    a = float(a)
    first = taylor_start(a, cfg.h_init, P)
    return _run(P, a, [State(0.0, a, 0.0), first], cfg)


def resume(traj: Trajectory, from_state: State, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Continue from an interior state with the same stepping and events.

    The returned trajectory starts at ``from_state``; join it to a prefix with
    :func:`concatenate`.
    """
    cfg = cfg or traj.config
    if not from_state.r > 0.0:
        raise DomainError("resume needs r > 0")
    return _run(traj.params, traj.a, [State(*map(float, from_state))], cfg)


def concatenate(head: Trajectory, tail: Trajectory) -> Trajectory:
    """Join ``head`` (cut at ``tail``'s first radius) and ``tail``."""
    r_cut = float(tail.r[0])
    keep = head.r < r_cut
    return Trajectory(
        head.params,
        head.a,
        np.concatenate([head.r[keep], tail.r]),
        np.concatenate([head.u[keep], tail.u]),
        np.concatenate([head.v[keep], tail.v]),
        [e for e in head.events if e.r < r_cut] + list(tail.events),
        tail.termination,
        tail.config,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["r", "u", "v", "E"])
    for row in zip(traj.r.tolist(), traj.u.tolist(), traj.v.tolist(), traj.energies.tolist()):
        w.writerow([_fmt(x) for x in row])


def write_events_csv(traj: Trajectory, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["kind", "r", "u", "v"])
    for e in traj.events:
        w.writerow([e.kind.value, _fmt(e.r), _fmt(e.state.u), _fmt(e.state.v)])
