"""Command line interface.

Exit codes: 0 success, 1 verification or theory check failed, 2 invalid
input, 3 solver did not converge, 4 file could not be read or written.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import check_p, integral_curvature, lp_curvature, mc_curvature_oracle
from .entropy import QuadratureSpec, ball_constants, entropy, entropy_gradient
from .errors import LpAlexError, ParseError, QuadratureNotConverged, ValidationError
from .geometry import build_polytope
from .io import (atomic_write, dumps, parse_measure, parse_scenario, read_report, report_document,
                 theory_document)
from .solver import CONVERGED, Objective, SolveOptions, maximize_phi, phi, verify
from .theory import DEFAULT_T_GRID, degeneracy_gain_check

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NOCONV, EXIT_IO = 0, 1, 2, 3, 4
RESIDUAL_TOL = 1e-3

log = logging.getLogger("lpalex")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _p_value(args, p_file: float | None) -> float:
    p = args.p if getattr(args, "p", None) is not None else p_file
    if p is None:
        raise ValidationError("p is neither in the measure file nor given with --p")
    if not check_p(p):
        if not getattr(args, "allow_any_p", False):
            raise ValidationError(f"p = {p} outside (-1, 0); pass --allow-any-p to proceed anyway")
        warnings.warn(f"p = {p} outside (-1, 0): no existence guarantee", UserWarning)
    return p


def _quad(args) -> QuadratureSpec:
    return QuadratureSpec(degree=args.quad_degree)


def _radii(args, size: int) -> np.ndarray:
    if args.report:
        radii = read_report(args.report).radii
    elif args.radii:
        try:
            radii = np.array([float(x) for x in args.radii.split(",")])
        except ValueError as exc:
            raise ValidationError(f"--radii: {exc}") from exc
    else:
        radii = np.ones(size)
    if radii.shape != (size,):
        raise ValidationError(f"expected {size} radii, got {radii.size}")
    return radii


def _export_stem(args) -> Path:
    if args.out:
        out = Path(args.out)
        return out.with_name(out.name[:-5] if out.name.endswith(".json") else out.name)
    return Path(Path(args.measure).stem)


def cmd_solve(args) -> int:
    mi = parse_measure(args.measure, require_spanning=True)
    p = _p_value(args, mi.p)
    opts = SolveOptions(max_iters=args.max_iters, grad_tol=args.grad_tol, multistarts=args.multistarts,
                        seed=args.seed, threads=args.threads)
    objective = Objective(mi.measure, p, _quad(args))
    t0 = time.perf_counter()
    report = maximize_phi(objective, opts)
    elapsed = time.perf_counter() - t0
    doc = report_document(report, mi.measure, p, opts, stable=args.stable, elapsed=elapsed)
    if args.out:
        atomic_write(args.out, dumps(doc))
    else:
        sys.stdout.write(dumps(doc))
    if args.export:
        from .export import export
        kinds = list(dict.fromkeys(args.export))
        if "svg" in kinds and mi.measure.n != 2:
            raise ValidationError("--export svg needs n = 2")
        if "obj" in kinds and mi.measure.n != 3:
            raise ValidationError("--export obj needs n = 3")
        for path in export(report, mi.measure, p, _export_stem(args), kinds):
            log.info("wrote %s", path)
    ok = report.max_residual <= args.tol
    log.info("status %s after %d iterations, Phi = %r, c = %r, max residual %.3e", report.status,
             report.iterations, report.phi, report.scale, report.max_residual)
    if report.status != CONVERGED:
        return EXIT_NOCONV
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    mi = parse_measure(args.measure)
    rep = read_report(args.report)
    if rep.radii.shape != (mi.measure.size,):
        raise ValidationError(f"report has {rep.radii.size} radii, measure has {mi.measure.size} atoms")
    P = build_polytope(mi.measure, rep.radii)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = verify(P, rep.scale, mi.measure, rep.p, tol=args.tol)
    _say(args, f"total J over +/- pairs = {result.total_J!r} (n omega_n = {result.surface!r}, "
               f"deviation {result.total_J - result.surface:.3e})")
    for k, r in enumerate(result.residuals):
        _say(args, f"atom {k}: residual {r:.3e}")
    _say(args, f"max residual {result.max_residual:.3e} vs tol {args.tol:g}: "
               f"{'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_entropy(args) -> int:
    mi = parse_measure(args.measure)
    radii = _radii(args, mi.measure.size)
    P = build_polytope(mi.measure, radii)
    E = entropy(P, _quad(args))
    _say(args, f"E = {E!r}")
    for k, g in enumerate(entropy_gradient(P).tolist()):
        _say(args, f"atom {k}: rho {float(P.radii[k])!r}  dE/dlog rho {g!r}")
    p = args.p if args.p is not None else mi.p
    if p is not None and mi.spans:
        _say(args, f"Phi = {phi(Objective(mi.measure, p, _quad(args)), radii)!r}")
    return EXIT_OK


def cmd_curvature(args) -> int:
    mi = parse_measure(args.measure)
    radii = _radii(args, mi.measure.size)
    P = build_polytope(mi.measure, radii)
    p = args.p if args.p is not None else mi.p
    J = integral_curvature(P)
    Jp = lp_curvature(P, p, J=J).Jp if p is not None else None
    mc = mc_curvature_oracle(P, args.mc, seed=args.seed) if args.mc else None
    for k in range(mi.measure.size):
        line = f"atom {k}: {'vertex  ' if P.is_vertex[k] else 'absorbed'} J {float(J[k])!r}"
        if Jp is not None:
            line += f"  Jp {float(Jp[k])!r}"
        if mc is not None:
            z = (J[k] - mc.J[k]) / mc.stderr[k] if mc.stderr[k] > 0 else 0.0
            line += f"  MC {mc.J[k]:.6f} +/- {mc.stderr[k]:.1e} (z = {z:+.2f})"
        _say(args, line)
    surface = ball_constants(P.n).surface
    _say(args, f"total J over +/- pairs = {2.0 * float(np.sum(J))!r} (n omega_n = {surface!r})")
    return EXIT_OK


def _t_grid(text: str):
    if text == "auto":
        return "auto"
    try:
        grid = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--t-grid: {exc}") from exc
    return grid


def cmd_theory_check(args) -> int:
    scenario = parse_scenario(args.scenario)
    if not check_p(scenario.p):
        warnings.warn(f"p = {scenario.p} outside (-1, 0): exploratory run", UserWarning)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = degeneracy_gain_check(scenario, _t_grid(args.t_grid), samples=args.samples, seed=args.seed)
    doc = theory_document(report, stable=args.stable, elapsed=time.perf_counter() - t0)
    if args.out:
        atomic_write(args.out, dumps(doc))
    else:
        sys.stdout.write(dumps(doc))
    for t, why in report.skipped:
        log.info("t = %g skipped: %s", t, why)
    for name, ok in report.verdicts.items():
        log.info("%-14s %s", name, "pass" if ok else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpalex", description="Discrete L_p Aleksandrov solver for -1 < p < 0.",
                                     epilog="exit codes: 0 ok, 1 check failed, 2 invalid input, 3 no convergence, 4 I/O error")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="suppress progress and warnings")
    parser.add_argument("--stable", action="store_true",
                        help="omit timestamps and timings so reports are byte-identical across runs")
    parser.add_argument("--threads", type=int, default=1, help="threads for multistart runs")
    sub = parser.add_subparsers(dest="command", required=True)

    def quad_flag(sp):
        sp.add_argument("--quad-degree", type=int, default=16, help="Gauss points per panel")

    sp = sub.add_parser("solve", help="solve the L_p Aleksandrov problem for a measure file")
    sp.add_argument("measure")
    sp.add_argument("--p", type=float, help="override p from the measure file")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--multistarts", type=int, default=8)
    sp.add_argument("--grad-tol", type=float, default=1e-8)
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--tol", type=float, default=RESIDUAL_TOL, help="residual tolerance for exit 0")
    quad_flag(sp)
    sp.add_argument("--out", help="report path (JSON); stdout when omitted")
    sp.add_argument("--export", action="append", choices=("svg", "obj", "csv"),
                    help="also write an SVG (n=2), OBJ mesh (n=3) or CSV tables; repeatable")
    sp.add_argument("--allow-any-p", action="store_true", help="accept p outside (-1, 0) with a warning")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="recheck a report against its measure")
    sp.add_argument("report")
    sp.add_argument("measure")
    sp.add_argument("--tol", type=float, default=RESIDUAL_TOL)
    sp.set_defaults(func=cmd_verify)

    for name, func, text in (("entropy", cmd_entropy, "entropy integral of a polytope"),
                             ("curvature", cmd_curvature, "integral and L_p curvature of a polytope")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("measure")
        group = sp.add_mutually_exclusive_group()
        group.add_argument("--radii", help="comma separated radii (default all 1)")
        group.add_argument("--report", help="take the radii from a solve report")
        sp.add_argument("--p", type=float)
        quad_flag(sp)
        if name == "curvature":
            sp.add_argument("--mc", type=int, default=0, help="Monte Carlo samples for the oracle check")
            sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=func)

    sp = sub.add_parser("theory-check", help="check the degeneracy gain inequalities on a scenario")
    sp.add_argument("scenario")
    sp.add_argument("--t-grid", default=",".join(repr(t) for t in DEFAULT_T_GRID),
                    help="comma separated t values, or 'auto' to add points below the peak of G")
    sp.add_argument("--samples", type=int, default=10 ** 5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="report path (JSON); stdout when omitted")
    sp.set_defaults(func=cmd_theory_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr, force=True)
    with warnings.catch_warnings():
        if args.quiet:
            warnings.simplefilter("ignore")
        else:
            warnings.simplefilter("default")
            warnings.showwarning = lambda msg, cat, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            if args.threads < 1:
                raise ValidationError("--threads must be positive")
            return args.func(args)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (ValueError, ParseError, LpAlexError) as exc:
            if isinstance(exc, QuadratureNotConverged):
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_NOCONV
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
