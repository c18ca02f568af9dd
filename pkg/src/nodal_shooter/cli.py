"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 Undetermined, 3 BracketError, 4 NoConvergence.
The environment variable NODAL_SHOOTER_SEED is reserved; nothing here is
random.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .exceptions import BracketError, DomainError, NoConvergence, PreconditionError
from .integrator import IntegratorConfig, integrate, write_events_csv, write_trajectory_csv
from .nonlin import Params, make_params
from .picard import picard_solve
from .refsolver import reference_solve
from .shooting import solve_dirichlet

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNDETERMINED = 2
EXIT_BRACKET = 3
EXIT_NO_CONVERGENCE = 4

ORACLE_R_MAX = 20.0
PICARD_PASS = 1e-5
PICARD_ATTEMPTS = 6


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; here usage errors are 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _dump(obj) -> None:
    print(json.dumps(obj, allow_nan=False))


def _finite(x: Optional[float]) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else x


def _params(args) -> Params:
    try:
        return make_params(args.dim, args.theta)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _config(args) -> IntegratorConfig:
    kw = {"r_max": args.rmax}
    if getattr(args, "tol", None) is not None:
        kw["rel_tol"] = args.tol
    try:
        return IntegratorConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_classify(args) -> int:
    P = _params(args)
    cfg = _config(args)
    reg, _, traj = analysis.classify(args.a, P, cfg)
    report = reg.to_json()
    if args.out is not None and traj is not None:
        out = Path(args.out)
        with out.open("w", newline="") as fh:
            write_trajectory_csv(traj, fh)
        with out.with_name(out.stem + "_events.csv").open("w", newline="") as fh:
            write_events_csv(traj, fh)
    if args.oracle and traj is not None:
        stops = [r for r in (1.0, 5.0, 10.0, 20.0) if r <= min(args.rmax, ORACLE_R_MAX)]
        ref = reference_solve(args.a, P, r_max=min(args.rmax, ORACLE_R_MAX), stops=stops, stride=64)
        dev = 0.0
        for r, st in ref.at.items():
            u, v = traj.sample(r)
            dev = max(dev, abs(u - st.u), abs(v - st.v))
        report["oracle_max_deviation"] = dev
        report["oracle_error_estimate"] = ref.error_estimate
    _dump(report)
    return EXIT_UNDETERMINED if reg.tag is analysis.RegimeTag.UNDETERMINED else EXIT_OK


def _sweep_row(job: tuple[float, float, float, float]) -> list[str]:
    a, d, theta, rmax = job
    P = make_params(d, theta)
    reg, _, _ = analysis.classify(a, P, IntegratorConfig(r_max=rmax))
    attractor = "" if reg.final_attractor is None else reg.final_attractor.value
    return [_fmt(a), reg.tag.value, str(reg.zero_count), _fmt(reg.rho_a), attractor, _fmt(reg.E_end)]


def cmd_sweep(args) -> int:
    P = _params(args)
    _config(args)
    if args.a_steps < 1:
        raise UsageError("--a-steps must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    avals = np.linspace(args.a_from, args.a_to, args.a_steps).tolist()
    jobs = [(a, P.d, P.theta, args.rmax) for a in avals]
    if args.jobs == 1:
        rows = [_sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "tag", "zero_count", "rho_a", "final_attractor", "E_end"])
            w.writerows(rows)
        with (out / "zeros.dat").open("w", newline="") as fh:
            fh.write("# a zero_count\n")
            for row in rows:
                fh.write(f"{row[0]} {row[2]}\n")
    except OSError as exc:
        print(f"cannot write sweep output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    undetermined = sum(1 for row in rows if row[1] == analysis.RegimeTag.UNDETERMINED.value)
    _dump({"rows": len(rows), "undetermined": undetermined, "out": str(out)})
    return EXIT_OK


def cmd_shoot(args) -> int:
    P = _params(args)
    if args.zeros < 0 or not args.R > 0.0 or not args.a_min < args.a_max:
        raise UsageError("need --zeros >= 0, --R > 0 and --a-min < --a-max")
    cfg = IntegratorConfig()
    try:
        roots = solve_dirichlet(args.R, args.zeros, (args.a_min, args.a_max), P, cfg, tol_a=args.tol_a)
    except BracketError as exc:
        print(str(exc), file=sys.stderr)
        _dump([])
        return EXIT_BRACKET
    except PreconditionError as exc:
        raise UsageError(str(exc)) from exc
    _dump(roots)
    return EXIT_OK


def cmd_picard_check(args) -> int:
    P = _params(args)
    if args.a == 0.0:
        raise UsageError("--a 0 is the trivial solution; nothing to check")
    if not args.delta > 0.0 or args.n < 8:
        raise UsageError("need --delta > 0 and --n >= 8")
    delta = args.delta
    for _ in range(PICARD_ATTEMPTS):
        try:
            grid = picard_solve(args.a, delta, P, n=args.n)
            break
        except (NoConvergence, DomainError):
            delta *= 0.5
    else:
        print(f"Picard iteration did not converge after {PICARD_ATTEMPTS} attempts", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    traj = integrate(args.a, P, IntegratorConfig(r_max=max(delta, 1.0)))
    ref = traj.sample(grid.r)
    sup = float(np.max(np.abs(ref[:, 0] - grid.u)))
    _dump({"sup_diff": sup, "sweeps": grid.sweeps, "delta": delta})
    return EXIT_OK if sup <= PICARD_PASS else EXIT_NO_CONVERGENCE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nodal-shooter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model(p, rmax=True):
        p.add_argument("--theta", type=float, required=True)
        p.add_argument("--dim", type=float, required=True)
        if rmax:
            p.add_argument("--rmax", type=float, default=200.0)

    p = sub.add_parser("classify", help="classify a single initial value")
    p.add_argument("--a", type=float, required=True)
    model(p)
    p.add_argument("--tol", type=float, default=None, help="relative tolerance")
    p.add_argument("--out", default=None, help="trajectory CSV; events go next to it")
    p.add_argument("--oracle", action="store_true", help="compare with the RK4 reference")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="classify a grid of initial values")
    p.add_argument("--a-from", type=float, required=True)
    p.add_argument("--a-to", type=float, required=True)
    p.add_argument("--a-steps", type=int, required=True)
    model(p)
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("shoot", help="Dirichlet roots on a ball")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--zeros", type=int, required=True)
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    model(p, rmax=False)
    p.add_argument("--tol-a", type=float, default=1e-12)
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("picard-check", help="Picard iterate against the integrator")
    p.add_argument("--a", type=float, required=True)
    model(p, rmax=False)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--n", type=int, default=4096)
    p.set_defaults(func=cmd_picard_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nodal-shooter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
