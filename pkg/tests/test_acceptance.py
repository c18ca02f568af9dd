"""Acceptance criteria, one test and one verdict line per criterion.

Run ``pytest tests/test_acceptance.py`` (the verdicts appear in the
"acceptance criteria" summary section) or ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
from nodal_shooter import cli
from nodal_shooter.analysis import (
    RegimeTag,
    check_below_a,
    check_energy_limit,
    check_excluded_pattern,
    check_first_critical,
    check_not_monotone,
    check_zero_slope,
    classify,
    dissipation_defect,
    lambda1_threshold,
)
from nodal_shooter.exceptions import MissingEvent, PreconditionError
from nodal_shooter.integrator import EventKind, IntegratorConfig, Trajectory, integrate
from nodal_shooter.nonlin import F, State, f_prime, g, make_params
from nodal_shooter.picard import picard_solve
from nodal_shooter.refsolver import reference_solve, rk4_propagate

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

DIMS = (2, 3)
THETAS = (0.1, 0.25, 0.4)
GRID = [(d, th) for d in DIMS for th in THETAS]
INNER_A = [s * x for x in (0.1, 0.3, 0.5, 0.7, 0.9) for s in (1.0, -1.0)]
ENERGY_A = (0.5, 1.5, 2.5, -0.5, 3.5)
R_MAX = 200.0


def positive_band_a(P):
    return [1.0 + (P.p - 1.0) * k / 10.0 for k in range(1, 10)]


def report(n, ok, detail, elapsed, budget=None):
    timing = f"{elapsed:.1f}s" + (f" (budget {budget:g}s)" if budget else "")
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {timing}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def c1_threshold_identities():
    t0 = time.perf_counter()
    worst = [0.0, 0.0, 0.0]
    for k in range(1, 10):
        P = make_params(3, 0.05 * k)
        worst[0] = max(worst[0], abs(F(P.p, P)))
        worst[1] = max(worst[1], abs(f_prime(P.s_theta, P)))
        worst[2] = max(worst[2], abs(P.F_min + P.theta / (2.0 * (1.0 - P.theta))))
    el = time.perf_counter() - t0
    ok = worst[0] <= 1e-14 and worst[1] <= 1e-12 and worst[2] <= 1e-15 and el < 1.0
    return report(1, ok, f"max|F(p)|={worst[0]:.1e} max|f'(s)|={worst[1]:.1e} "
                         f"F_min err={worst[2]:.1e}", el, 1)


def c2_energy_dissipation():
    t0 = time.perf_counter()
    bad = []
    worst_defect = 0.0
    for d, th in GRID:
        P = make_params(d, th)
        for a in ENERGY_A:
            tr = integrate(a, P, IntegratorConfig(r_max=R_MAX))
            E = tr.energies
            rising = np.any(E[1:] > E[:-1] + 1e-8 * (1.0 + np.abs(E[:-1])))
            floor = E.min() < P.F_min - 1e-8
            defect = dissipation_defect(tr)
            worst_defect = max(worst_defect, defect)
            if rising or floor or defect > 1e-6:
                bad.append((d, th, a))
    el = time.perf_counter() - t0
    ok = not bad and el < 30.0
    return report(2, ok, f"30 runs, violations={bad}, max identity defect={worst_defect:.1e}", el, 30)


def c3_inner_band_capture():
    t0 = time.perf_counter()
    wrong_tag, envelope_up, far = [], [], []
    worst_res = 0.0
    for d, th in GRID:
        P = make_params(d, th)
        for a in INNER_A:
            reg, sk, tr = classify(a, P, IntegratorConfig(r_max=R_MAX))
            want = RegimeTag.OSC_AROUND_ONE if a > 0 else RegimeTag.OSC_AROUND_MINUS_ONE
            if reg.zero_count != 0 or reg.tag is not want:
                wrong_tag.append((d, th, a))
            env = sk.envelope()
            if len(env) > 1 and np.max(np.diff(env)) > 1e-9:
                envelope_up.append((d, th, a, float(np.max(np.diff(env)))))
            res = abs(tr.u[-1] - math.copysign(1.0, a))
            worst_res = max(worst_res, res)
            if res > 1e-3:
                far.append((d, th, a))
    el = time.perf_counter() - t0
    ok = not wrong_tag and not envelope_up and not far and el < 60.0
    detail = (f"60 runs: tag/zero mismatches={len(wrong_tag)}; envelope rises={len(envelope_up)} "
              f"{[(d, th, a, f'{x:.1e}') for d, th, a, x in envelope_up]}; "
              f"|u(200)-+1|>1e-3 in {len(far)} runs (max {worst_res:.1e})")
    return report(3, ok, detail, el, 60)


def c4_positive_band():
    t0 = time.perf_counter()
    bad = []
    for d, th in GRID:
        P = make_params(d, th)
        for a in positive_band_a(P):
            reg, _, tr = classify(a, P, IntegratorConfig(r_max=R_MAX))
            if reg.tag is not RegimeTag.POSITIVE_OSCILLATORY or not tr.u.min() > 0.0:
                bad.append((d, th, round(a, 6)))
    el = time.perf_counter() - t0
    ok = not bad and el < 60.0
    return report(4, ok, f"54 runs, failures={bad}", el, 60)


LEMMA_CHECKS = (
    check_zero_slope,
    check_below_a,
    check_not_monotone,
    check_first_critical,
    check_excluded_pattern,
    check_energy_limit,
)


def c5_lemma_suite():
    t0 = time.perf_counter()
    failures: dict[str, list] = {c.__name__: [] for c in LEMMA_CHECKS}
    applied = {c.__name__: 0 for c in LEMMA_CHECKS}
    for d, th in GRID:
        P = make_params(d, th)
        avals = INNER_A + positive_band_a(P) + [m * P.p for m in (1.1, 1.5, 3.0)]
        for a in avals:
            tr = integrate(a, P, IntegratorConfig(r_max=R_MAX))
            for check in LEMMA_CHECKS:
                try:
                    rep = check(tr)
                except (PreconditionError, MissingEvent):
                    continue
                applied[check.__name__] += 1
                if not rep.holds:
                    failures[check.__name__].append((d, th, round(a, 4)))
    # negative control: an injected (u, v) = (0, 0) state must be caught
    P = make_params(3, 0.25)
    tr = integrate(0.5, P, IntegratorConfig(r_max=5.0))
    u, v = tr.u.copy(), tr.v.copy()
    u[10] = v[10] = 0.0
    control = check_zero_slope(Trajectory(P, tr.a, tr.r, u, v, tr.events, tr.termination, tr.config))
    el = time.perf_counter() - t0
    ok = all(not f for f in failures.values()) and not control.holds and el < 60.0
    parts = [f"{k[6:]} {applied[k] - len(v)}/{applied[k]}" for k, v in failures.items()]
    energy_fail = failures["check_energy_limit"]
    detail = (", ".join(parts) + f"; negative control caught={not control.holds}"
              + (f"; energy-limit misses at {energy_fail}" if energy_fail else ""))
    return report(5, ok, detail, el, 60)


def c6_rho_finite():
    t0 = time.perf_counter()
    missing, mismatch = [], []
    worst = 0.0
    for d, th in GRID:
        P = make_params(d, th)
        for m in (1.05, 1.5, 2.0, 3.0):
            a = m * P.p
            tr = integrate(a, P, IntegratorConfig(r_max=50.0))
            zeros = tr.events_of(EventKind.ZERO_OF_U)
            if not zeros:
                missing.append((d, th, m))
                continue
            ref = reference_solve(a, P, r_max=50.0, until_zero=True)
            dev = abs(zeros[0].r - ref.events_of(EventKind.ZERO_OF_U)[0].r)
            worst = max(worst, dev)
            if dev > 1e-7:
                mismatch.append((d, th, m, dev))
    el = time.perf_counter() - t0
    ok = not missing and not mismatch
    return report(6, ok, f"no zero before r=50 for (d, theta, a/p) in {missing}; "
                         f"rho mismatches={mismatch}, max |rho - rho_ref|={worst:.1e}", el)


def c7_picard():
    t0 = time.perf_counter()
    P = make_params(3, 0.25)
    sup, curv = 0.0, 0.0
    for a in (0.5, 1.5, 2.5):
        grid = picard_solve(a, 0.3, P, n=4096)
        ref = integrate(a, P, IntegratorConfig(r_max=1.0)).sample(grid.r)
        sup = max(sup, float(np.max(np.abs(ref[:, 0] - grid.u))))
        est = (grid.u[2] - 2.0 * grid.u[1] + grid.u[0]) / grid.h**2
        curv = max(curv, abs(est + a * g(a, P) / 3.0))
    el = time.perf_counter() - t0
    ok = sup <= 1e-6 and curv <= 1e-4
    return report(7, ok, f"sup deviation={sup:.1e}, u''(0) error={curv:.1e}", el)


def c8_eigenvalue_gate():
    t0 = time.perf_counter()
    P = make_params(3, 0.25)
    code = cli.main(["shoot", "--R", "0.5", "--zeros", "0", "--a-min", "1.05", "--a-max",
                     repr(P.p - 0.01), "--theta", "0.25", "--dim", "3"])
    e3 = abs(lambda1_threshold(3) - math.pi)
    e2 = abs(lambda1_threshold(2) - 2.4048256)
    el = time.perf_counter() - t0
    ok = code == 3 and e3 <= 1e-10 and e2 <= 1e-6
    return report(8, ok, f"shoot exit={code}, |l1(3)-pi|={e3:.1e}, |l1(2)-2.4048256|={e2:.1e}", el)


def c9_oracle():
    t0 = time.perf_counter()
    stops = (1.0, 5.0, 10.0)
    worst = 0.0
    for d, th in GRID:
        P = make_params(d, th)
        for a in ENERGY_A:
            tr = integrate(a, P, IntegratorConfig(r_max=10.0))
            ref = reference_solve(a, P, r_max=10.0, stops=stops, stride=256)
            for r in stops:
                worst = max(worst, abs(float(tr.sample(r)[0]) - ref.at[r].u))
    ratios = []
    for th in THETAS:
        P = make_params(3, th)
        for a in (0.5, 1.5):
            u1, v1 = integrate(a, P, IntegratorConfig(r_max=1.0)).final[1:]
            st = State(1.0, u1, v1)
            sols = [rk4_propagate(st, P, h, 10.0).u for h in (0.2, 0.1, 0.05, 0.025)]
            errs = [abs(y - x) for x, y in zip(sols, sols[1:])]
            ratios += [e0 / e1 for e0, e1 in zip(errs, errs[1:])]
    el = time.perf_counter() - t0
    ok = worst <= 1e-7 and all(12.0 <= q <= 20.0 for q in ratios)
    return report(9, ok, f"max |u - u_ref| at r=1,5,10: {worst:.1e}; RK4 ratios in "
                         f"[{min(ratios):.1f}, {max(ratios):.1f}]", el)


def c10_determinism(tmp: Path):
    t0 = time.perf_counter()
    common = ["sweep", "--a-from", "2", "--a-to", "5", "--a-steps", "300", "--theta", "0.25", "--dim", "3"]
    codes = []
    for jobs in ("1", "8"):
        codes.append(cli.main(common + ["--jobs", jobs, "--out", str(tmp / f"jobs{jobs}")]))
    same = all((tmp / "jobs1" / n).read_bytes() == (tmp / "jobs8" / n).read_bytes()
               for n in ("sweep.csv", "zeros.dat"))
    el = time.perf_counter() - t0
    ok = codes == [0, 0] and same
    return report(10, ok, f"exit codes={codes}, byte-identical={same}", el)


def test_criterion_01():
    assert c1_threshold_identities()


def test_criterion_02():
    assert c2_energy_dissipation()


def test_criterion_03():
    assert c3_inner_band_capture()


def test_criterion_04():
    assert c4_positive_band()


def test_criterion_05():
    assert c5_lemma_suite()


def test_criterion_06():
    assert c6_rho_finite()


def test_criterion_07():
    assert c7_picard()


def test_criterion_08():
    assert c8_eigenvalue_gate()


def test_criterion_09():
    assert c9_oracle()


def test_criterion_10(tmp_path):
    assert c10_determinism(tmp_path)


if __name__ == "__main__":
    import tempfile

    results = [c1_threshold_identities(), c2_energy_dissipation(), c3_inner_band_capture(), c4_positive_band(),
               c5_lemma_suite(), c6_rho_finite(), c7_picard(), c8_eigenvalue_gate(), c9_oracle()]
    with tempfile.TemporaryDirectory() as tmp:
        results.append(c10_determinism(Path(tmp)))
    sys.exit(0 if all(results) else 1)
