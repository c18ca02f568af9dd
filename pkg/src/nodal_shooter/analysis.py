"""Reading trajectories: regime classification and the lemma checks.

Every check takes a finished :class:`~nodal_shooter.integrator.Trajectory`
and returns a :class:`LemmaReport`; none of them compares ``a`` with the
threshold ``p``, so a sweep over ``a`` gives an independent test of where the
regimes actually change.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import MissingEvent, NotSupported, PreconditionError
from .integrator import EventKind, IntegratorConfig, Termination, Trajectory, integrate
from .nonlin import F, Params, State

__all__ = [
    "RegimeTag",
    "Attractor",
    "Regime",
    "OscillationSkeleton",
    "LemmaId",
    "LemmaReport",
    "FirstCriticalCase",
    "classify",
    "extract_skeleton",
    "check_zero_slope",
    "check_below_a",
    "check_not_monotone",
    "check_first_critical",
    "check_excluded_pattern",
    "check_energy_limit",
    "lambda1_threshold",
    "dissipation_defect",
    "CAPTURE_TAGS",
]

# slack on "E is non-increasing" between accepted steps
ENERGY_SLACK = 1e-8
# fraction of the radius span regarded as the tail
TAIL_FRACTION = 0.1
MIN_LEVEL_CROSSINGS = 3


class RegimeTag(str, enum.Enum):
    TRIVIAL_ZERO = "TrivialZero"
    EQUILIBRIUM_PLUS = "EquilibriumPlus"
    EQUILIBRIUM_MINUS = "EquilibriumMinus"
    OSC_AROUND_ONE = "OscAroundOne"
    OSC_AROUND_MINUS_ONE = "OscAroundMinusOne"
    POSITIVE_OSCILLATORY = "PositiveOscillatory"
    NODAL_FINITE_ZERO = "NodalFiniteZero"
    DEAD_CORE_CANDIDATE = "DeadCoreCandidate"
    UNDETERMINED = "Undetermined"


class Attractor(str, enum.Enum):
    PLUS1 = "Plus1"
    MINUS1 = "Minus1"


CAPTURE_TAGS = frozenset(
    {
        RegimeTag.EQUILIBRIUM_PLUS,
        RegimeTag.EQUILIBRIUM_MINUS,
        RegimeTag.OSC_AROUND_ONE,
        RegimeTag.OSC_AROUND_MINUS_ONE,
        RegimeTag.POSITIVE_OSCILLATORY,
    }
)


@dataclass
class Regime:
    tag: RegimeTag
    a: float
    rho_a: Optional[float] = None
    zero_count: int = 0
    final_attractor: Optional[Attractor] = None
    E_end: float = 0.0
    u_end: float = 0.0
    min_u: float = 0.0
    termination: Optional[Termination] = None

    @property
    def capture_residual(self) -> Optional[float]:
        """``|u(r_end) - 1|`` or ``|u(r_end) + 1|`` for captured runs."""
        if self.final_attractor is None:
            return None
        target = 1.0 if self.final_attractor is Attractor.PLUS1 else -1.0
        return abs(self.u_end - target)

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "tag": self.tag.value,
            "rho_a": self.rho_a,
            "zero_count": self.zero_count,
            "final_attractor": None if self.final_attractor is None else self.final_attractor.value,
            "E_end": self.E_end,
            "capture_residual": self.capture_residual,
            "termination": None if self.termination is None else self.termination.value,
        }


@dataclass
class OscillationSkeleton:
    """Event radii grouped the way the oscillation proofs name them.

    ``t_k`` holds zeros of ``u``. The sequence of critical points is kept
    separately in ``zeta_k``, with the values of ``u`` there in ``maxima``.
    """

    r_k: list[float] = field(default_factory=list)
    z_k: list[float] = field(default_factory=list)
    t_k: list[float] = field(default_factory=list)
    zeta_k: list[float] = field(default_factory=list)
    maxima: list[float] = field(default_factory=list)

    def envelope(self) -> np.ndarray:
        """``||u(zeta_k)| - 1|`` along the critical points."""
        return np.abs(np.abs(np.asarray(self.maxima, dtype=float)) - 1.0)

    def interleaves(self, level_radii: Optional[list[float]] = None) -> bool:
        """True when crossings and critical points alternate: ``r_k < zeta_k < r_{k+1}``."""
        crossings = self.r_k if level_radii is None else level_radii
        merged = sorted([(r, 0) for r in crossings] + [(r, 1) for r in self.zeta_k])
        kinds = [k for _, k in merged]
        return all(k1 != k2 for k1, k2 in zip(kinds, kinds[1:]))


class LemmaId(str, enum.Enum):
    ZERO_IMPLIES_SLOPE = "ZeroImpliesSlope"
    BELOW_A = "BelowA"
    NOT_MONOTONE = "NotMonotone"
    FIRST_CRITICAL_BELOW_ONE = "FirstCriticalBelowOne"
    OSCILLATES_AFTER_R1 = "OscillatesAfterR1"
    EXCLUDED_PATTERN = "ExcludedPattern"
    ENERGY_LIMIT = "EnergyLimit"


class FirstCriticalCase(str, enum.Enum):
    BETWEEN_ZERO_AND_ONE = "u(r1) in (0,1)"
    BETWEEN_MINUS_ONE_AND_ZERO = "u(r1) in (-1,0)"
    BELOW_MINUS_ONE = "u(r1) <= -1"
    AT_ZERO = "u(r1) = 0"
    AT_OR_ABOVE_ONE = "u(r1) >= 1"


@dataclass
class LemmaReport:
    lemma_id: LemmaId
    holds: bool
    margin: float
    witness: Optional[tuple[float, State]] = None
    detail: Optional[str] = None

    def __post_init__(self):
        if not self.holds and self.witness is None:
            raise ValueError("a failed check must carry a witness")

    def to_json(self) -> dict:
        return {
            "lemma_id": self.lemma_id.value,
            "holds": self.holds,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "witness_r": None if self.witness is None else self.witness[0],
            "detail": self.detail,
        }


def extract_skeleton(traj: Trajectory) -> OscillationSkeleton:
    sk = OscillationSkeleton()
    for e in traj.events:
        if e.kind in (EventKind.CROSS_UP_1, EventKind.CROSS_DOWN_1):
            sk.r_k.append(e.r)
        elif e.kind in (EventKind.CROSS_UP_MINUS_1, EventKind.CROSS_DOWN_MINUS_1):
            sk.z_k.append(e.r)
        elif e.kind is EventKind.ZERO_OF_U:
            sk.t_k.append(e.r)
        elif e.kind is EventKind.ZERO_OF_V:
            sk.zeta_k.append(e.r)
            sk.maxima.append(e.state.u)
    return sk


def _tail_sign(traj: Trajectory) -> int:
    """Sign of ``u`` on the last tenth of the radius span, 0 if it varies."""
    r0, r1 = float(traj.r[0]), float(traj.r[-1])
    tail = traj.u[traj.r >= r1 - TAIL_FRACTION * (r1 - r0)]
    if len(tail) == 0:
        return 0
    if np.all(tail > 0.0):
        return 1
    if np.all(tail < 0.0):
        return -1
    return 0


def _captured_sign(traj: Trajectory) -> int:
    """Sign of the well the run ends trapped in, 0 if not trapped.

    ``E < 0`` together with a fixed sign of ``u`` is a certificate: ``E`` never
    increases and ``F >= 0`` at ``u = 0``, so ``u`` can no longer vanish.
    """
    if traj.termination is not Termination.REACHED_R_MAX:
        return 0
    s = _tail_sign(traj)
    if s == 0 or not traj.energies[-1] < 0.0:
        return 0
    return s


def _one_sided_envelope_ok(maxima: list[float], centre: float, tol: float = 1e-9) -> bool:
    """Extrema above ``centre`` decrease and those below increase."""
    above = [m for m in maxima if m > centre]
    below = [m for m in maxima if m < centre]
    return all(b <= a + tol for a, b in zip(above, above[1:])) and all(
        b >= a - tol for a, b in zip(below, below[1:])
    )


def classify(
    a: float, P: Params, cfg: Optional[IntegratorConfig] = None
) -> tuple[Regime, OscillationSkeleton, Optional[Trajectory]]:
    """Integrate from ``u(0) = a`` and name the behaviour that results.

    ``a = 0`` returns ``TrivialZero`` without integrating. A run with no zero
    of ``u`` counts as captured by ``+1`` or ``-1`` when it crosses that level
    at least three times, its extrema move monotonically towards the level on
    each side, and it ends with negative energy and a fixed sign. Anything
    that fits no pattern is ``Undetermined``.
    """
    cfg = cfg or IntegratorConfig()
    a = float(a)
    if a == 0.0:
        return Regime(RegimeTag.TRIVIAL_ZERO, a), OscillationSkeleton(), None

    traj = integrate(a, P, cfg)
    sk = extract_skeleton(traj)
    zeros = sk.t_k
    reg = Regime(
        RegimeTag.UNDETERMINED,
        a,
        rho_a=zeros[0] if zeros else None,
        zero_count=len(zeros),
        E_end=float(traj.energies[-1]),
        u_end=float(traj.u[-1]),
        min_u=float(traj.u.min()) if a > 0 else float(traj.u.max()),
        termination=traj.termination,
    )
    captured = _captured_sign(traj)
    if captured:
        reg.final_attractor = Attractor.PLUS1 if captured > 0 else Attractor.MINUS1

    if abs(a) == 1.0:
        reg.tag = RegimeTag.EQUILIBRIUM_PLUS if a > 0 else RegimeTag.EQUILIBRIUM_MINUS
        return reg, sk, traj
    if traj.termination is Termination.DEAD_CORE:
        reg.tag = RegimeTag.DEAD_CORE_CANDIDATE
        return reg, sk, traj
    if traj.termination is not Termination.REACHED_R_MAX:
        return reg, sk, traj
    if zeros:
        reg.tag = RegimeTag.NODAL_FINITE_ZERO
        return reg, sk, traj

    sign = 1 if a > 0 else -1
    one_signed = bool(np.all(traj.u * sign > 0.0))
    crossings = sk.r_k if sign > 0 else sk.z_k
    if (
        one_signed
        and captured == sign
        and len(crossings) >= MIN_LEVEL_CROSSINGS
        and _one_sided_envelope_ok(sk.maxima, float(sign))
    ):
        if sign < 0:
            reg.tag = RegimeTag.OSC_AROUND_MINUS_ONE
        elif a > 1.0:
            reg.tag = RegimeTag.POSITIVE_OSCILLATORY
        else:
            reg.tag = RegimeTag.OSC_AROUND_ONE
    return reg, sk, traj


def check_zero_slope(traj: Trajectory) -> LemmaReport:
    """Every zero of ``u`` is crossed with non-zero slope."""
    tol = 10.0 * traj.config.event_tol
    margin = math.inf
    witness = None
    for e in traj.events_of(EventKind.ZERO_OF_U):
        if abs(e.state.v) < margin:
            margin = abs(e.state.v)
        if abs(e.state.v) < tol and witness is None:
            witness = (e.r, e.state)
    # touching states recorded without an event (e.g. hand-built fixtures)
    for st in traj.states[1:]:
        if abs(st.u) <= traj.config.event_tol and abs(st.v) < tol:
            margin = min(margin, abs(st.v))
            if witness is None:
                witness = (st.r, st)
    return LemmaReport(LemmaId.ZERO_IMPLIES_SLOPE, witness is None, margin, witness)


def _require_above_one(traj: Trajectory) -> None:
    if not traj.a > 1.0:
        raise PreconditionError(f"check applies to a > 1, got a = {traj.a}")


def check_below_a(traj: Trajectory) -> LemmaReport:
    _require_above_one(traj)
    gap = traj.a - traj.u[1:]
    i = int(np.argmin(gap))
    margin = float(gap[i])
    if margin > 0.0:
        return LemmaReport(LemmaId.BELOW_A, True, margin)
    st = traj.states[i + 1]
    return LemmaReport(LemmaId.BELOW_A, False, margin, (st.r, st))


def check_not_monotone(traj: Trajectory) -> LemmaReport:
    """A first critical point exists before the run ended."""
    _require_above_one(traj)
    crit = traj.events_of(EventKind.ZERO_OF_V)
    if crit:
        return LemmaReport(
            LemmaId.NOT_MONOTONE, True, float(traj.r[-1]) - crit[0].r,
            detail=f"r1 = {crit[0].r!r}",
        )
    st = traj.final
    return LemmaReport(LemmaId.NOT_MONOTONE, False, 0.0, (st.r, st))


def _first_critical_case(u1: float, tol: float) -> FirstCriticalCase:
    if u1 >= 1.0:
        return FirstCriticalCase.AT_OR_ABOVE_ONE
    if abs(u1) <= tol:
        return FirstCriticalCase.AT_ZERO
    if u1 > 0.0:
        return FirstCriticalCase.BETWEEN_ZERO_AND_ONE
    if u1 > -1.0:
        return FirstCriticalCase.BETWEEN_MINUS_ONE_AND_ZERO
    return FirstCriticalCase.BELOW_MINUS_ONE


def check_first_critical(traj: Trajectory) -> LemmaReport:
    """``u`` at the first critical point lies below 1.

    ``detail`` names which of the possible positions of ``u(r1)`` occurred.
    """
    crit = traj.events_of(EventKind.ZERO_OF_V)
    if not crit:
        raise MissingEvent("no critical point before the end of the run")
    _require_above_one(traj)
    e = crit[0]
    margin = 1.0 - e.state.u
    case = _first_critical_case(e.state.u, traj.config.dead_core_eps)
    holds = e.state.u < 1.0 - 1e-9
    return LemmaReport(
        LemmaId.FIRST_CRITICAL_BELOW_ONE,
        holds,
        margin,
        None if holds else (e.r, e.state),
        detail=case.value,
    )


def check_excluded_pattern(traj: Trajectory) -> LemmaReport:
    """No endless alternation between extrema beyond +1 and below -1.

    On a finite run this means: the alternations happen before the tail, the
    tail keeps one sign with no zero of ``u``, and at every zero the energy
    equals ``v^2/2 >= 0``.
    """
    big = [e for e in traj.events_of(EventKind.ZERO_OF_V) if abs(e.state.u) >= 1.0]
    alternations = sum(
        1 for e1, e2 in zip(big, big[1:]) if (e1.state.u > 0.0) != (e2.state.u > 0.0)
    )
    r_end = float(traj.r[-1])
    r_tail = r_end - TAIL_FRACTION * (r_end - float(traj.r[0]))
    zeros = traj.events_of(EventKind.ZERO_OF_U)
    P = traj.params

    margin = math.inf
    witness = None
    for e in zeros:
        E = 0.5 * e.state.v**2 + F(e.state.u, P)
        margin = min(margin, E)
        if E < -1e-12 and witness is None:
            witness = (e.r, e.state)
    late = [e for e in zeros if e.r >= r_tail]
    if late and witness is None:
        witness = (late[0].r, late[0].state)
    if traj.termination is Termination.REACHED_R_MAX and _tail_sign(traj) == 0 and witness is None:
        st = traj.final
        witness = (st.r, st)
    return LemmaReport(
        LemmaId.EXCLUDED_PATTERN,
        witness is None,
        margin,
        witness,
        detail=f"{alternations} sign alternations among extrema with |u| >= 1",
    )


def check_energy_limit(traj: Trajectory, P: Optional[Params] = None) -> LemmaReport:
    """Energy settles at ``F(1) = -θ/(2(1-θ))`` for captured runs.

    Holds when ``|E(r_end) - F_min| <= 1e-4`` and the energy never rose by
    more than the step slack.
    """
    P = P or traj.params
    if abs(traj.a) != 1.0 and _captured_sign(traj) == 0:
        raise PreconditionError("run was not captured by +1 or -1 before it ended")
    E = traj.energies
    margin = abs(float(E[-1]) - P.F_min)
    rise = E[1:] - E[:-1] - ENERGY_SLACK * (1.0 + np.abs(E[:-1]))
    bad = np.flatnonzero(rise > 0.0)
    holds = margin <= 1e-4 and len(bad) == 0
    witness = None
    if not holds:
        i = int(bad[0]) + 1 if len(bad) else len(E) - 1
        st = traj.states[i]
        witness = (st.r, st)
    return LemmaReport(LemmaId.ENERGY_LIMIT, holds, margin, witness)


def dissipation_defect(traj: Trajectory, window: float = 1.0, sub: int = 8) -> float:
    """Largest ``|ΔE + ∫ (d-1)/r v² dr|`` over consecutive windows of length ``window``.

    The integral uses composite Simpson on ``sub`` Hermite samples per step.
    """
    d = traj.params.d
    r = traj.r
    r_end = float(r[-1])
    # per-step integrals of (d-1)/r v^2
    n_sub = 2 * (sub // 2)
    w = np.ones(n_sub + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    step_int = np.zeros(len(r) - 1)
    for i in range(len(r) - 1):
        r0, r1 = float(r[i]), float(r[i + 1])
        xs = np.linspace(r0, r1, n_sub + 1)
        vs = traj.sample(xs)[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(xs > 0.0, (d - 1.0) / xs * vs * vs, 0.0)
        step_int[i] = (r1 - r0) / (3.0 * n_sub) * float(w @ y)
    cum = np.concatenate([[0.0], np.cumsum(step_int)])
    E = traj.energies
    worst = 0.0
    edges = np.arange(0.0, r_end + window, window)
    # windows are snapped to accepted-step radii
    idx = np.unique(np.clip(np.searchsorted(r, edges), 0, len(r) - 1))
    for i0, i1 in zip(idx, idx[1:]):
        length = max(float(r[i1] - r[i0]), 1e-300)
        defect = abs((E[i1] - E[i0]) + (cum[i1] - cum[i0]))
        worst = max(worst, defect / max(length, window) * window)
    return worst


def _bessel_j(nu: float, x: float) -> float:
    """Ascending series ``sum (-1)^k (x/2)^{2k+nu} / (k! Γ(k+nu+1))``."""
    half = 0.5 * x
    term = math.exp(nu * math.log(half) - math.lgamma(nu + 1.0)) if x > 0 else 0.0
    total = term
    q = -half * half
    k = 0
    while abs(term) > 1e-18 * max(1.0, abs(total)):
        k += 1
        term *= q / (k * (k + nu))
        total += term
    return total


def lambda1_threshold(d: float) -> float:
    """``sqrt(λ1)`` of the unit ball: first positive zero of ``J_{(d-2)/2}``.

    Only ``d`` in {2, 3} is supported.
    """
    if d not in (2, 3):
        raise NotSupported(f"lambda1_threshold implemented for d in {{2, 3}}, got {d}")
    nu = 0.5 * (d - 2.0)
    lo, step = 0.5, 0.05
    hi = lo + step
    while _bessel_j(nu, hi) > 0.0:
        lo, hi = hi, hi + step
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if _bessel_j(nu, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
