"""JSON documents for measures, solve reports and subspace scenarios.

Floats are written with Python's shortest round-trip repr, so reading a
document back gives the same binary values.  Files are written atomically
through a temporary file in the target directory.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, ValidationError
from .geometry import ATOM_MERGE_TOL, DiscreteEvenMeasure, check_dimension
from .solver import SolveOptions, SolveReport
from .theory import SubspaceScenario, TheoryCheckReport

# directions are normalized silently up to NORM_SILENT, with a warning up
# to NORM_REJECT, and rejected beyond
NORM_SILENT = 1e-6
NORM_REJECT = 1e-3


class MeasureWarning(UserWarning):
    """Input was altered on load (normalized or merged atoms)."""


@dataclass(frozen=True)
class MeasureInput:
    measure: DiscreteEvenMeasure
    p: float | None
    spans: bool


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def read_document(path) -> dict:
    """Load a JSON object; OSError propagates, malformed content raises ParseError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    return doc


def _floats(x, what: str) -> np.ndarray:
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: expected numbers") from exc
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what}: non-finite value")
    return a


def _dimension(doc: dict) -> int:
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ParseError("field 'n' must be an integer")
    check_dimension(n)
    return n


def _directions(atoms, n: int) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(atoms, list) or not atoms:
        raise ParseError("field 'atoms' must be a non-empty list")
    dirs, ws = [], []
    for k, atom in enumerate(atoms):
        if not isinstance(atom, dict) or "u" not in atom or "w" not in atom:
            raise ParseError(f"atom {k}: expected an object with 'u' and 'w'")
        u = _floats(atom["u"], f"atom {k} u")
        if u.shape != (n,):
            raise ValidationError(f"atom {k}: u must have {n} components")
        w = float(_floats(atom["w"], f"atom {k} w"))
        if w <= 0.0:
            raise ValidationError(f"atom {k}: weight must be positive")
        dev = abs(float(np.linalg.norm(u)) - 1.0)
        if dev > NORM_REJECT:
            raise ValidationError(f"atom {k}: |u| deviates from 1 by {dev:.3g}")
        if dev > NORM_SILENT:
            warnings.warn(f"atom {k}: |u| deviates from 1 by {dev:.3g}; normalized", MeasureWarning,
                          stacklevel=3)
        dirs.append(u)
        ws.append(w)
    return np.array(dirs), np.array(ws)


def measure_from_document(doc: dict, require_spanning: bool = False) -> MeasureInput:
    n = _dimension(doc)
    dirs, ws = _directions(doc.get("atoms"), n)
    measure = DiscreteEvenMeasure.from_atoms(dirs, ws, tol=ATOM_MERGE_TOL)
    if measure.merged:
        warnings.warn(f"{measure.merged} duplicate or antipodal atom(s) merged, weights summed",
                      MeasureWarning, stacklevel=2)
    p = doc.get("p")
    if p is not None:
        p = float(_floats(p, "p"))
    spans = measure.spans
    if require_spanning and not spans:
        raise ValidationError("measure is concentrated on a great subsphere (directions do not span)")
    return MeasureInput(measure=measure, p=p, spans=spans)


def parse_measure(path, require_spanning: bool = False) -> MeasureInput:
    return measure_from_document(read_document(path), require_spanning)


def measure_document(measure: DiscreteEvenMeasure, p: float | None = None) -> dict:
    doc: dict = {"n": measure.n}
    if p is not None:
        doc["p"] = float(p)
    doc["atoms"] = [{"u": [float(x) for x in u], "w": float(w)}
                    for u, w in zip(measure.directions, measure.weights)]
    return doc


def write_measure(path, measure: DiscreteEvenMeasure, p: float | None = None) -> None:
    atomic_write(path, dumps(measure_document(measure, p)))


def _header(stable: bool, elapsed: float | None) -> dict:
    return {
        "tool": "lpalex",
        "version": __version__,
        "created": None if stable else _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": None if stable or elapsed is None else round(elapsed, 3),
    }


def _num(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def report_document(report: SolveReport, measure: DiscreteEvenMeasure, p: float,
                    opts: SolveOptions, stable: bool = False, elapsed: float | None = None) -> dict:
    P = report.polytope
    curv = report.curvature
    atoms = [{"u": [float(x) for x in u], "mu": float(mu), "rho": float(rho), "vertex": bool(vx),
              "J": float(J), "Jp": float(Jp), "residual": float(res)}
             for u, mu, rho, vx, J, Jp, res in zip(measure.directions, measure.weights, P.radii,
                                                   P.is_vertex, curv.J, curv.Jp, report.residuals)]
    return {
        "header": _header(stable, elapsed),
        "status": report.status,
        "n": measure.n,
        "p": float(p),
        "seed": opts.seed,
        "multistarts": opts.multistarts,
        "grad_tol": opts.grad_tol,
        "scale": float(report.scale),
        "phi": float(report.phi),
        "grad_norm": float(report.grad_norm),
        "max_residual": report.max_residual,
        "iterations": report.iterations,
        "best_start": report.start,
        "total_J": curv.total_J,
        "radii": [float(r) for r in P.radii],
        "atoms": atoms,
        "phi_trace": [float(v) for v in report.phi_trace],
        "optima": [{"start": o["start"], "phi": float(o["phi"]), "status": o["status"],
                    "radii": [float(r) for r in o["radii"]]} for o in report.optima],
    }


@dataclass(frozen=True)
class ReportInput:
    radii: np.ndarray
    scale: float
    p: float
    residuals: np.ndarray | None
    doc: dict


def report_from_document(doc: dict) -> ReportInput:
    for key in ("radii", "scale", "p"):
        if key not in doc:
            raise ParseError(f"report lacks field {key!r}")
    radii = _floats(doc["radii"], "radii").ravel()
    if np.any(radii <= 0):
        raise ValidationError("report radii must be positive")
    scale = float(_floats(doc["scale"], "scale"))
    if scale <= 0:
        raise ValidationError("report scale must be positive")
    residuals = None
    if isinstance(doc.get("atoms"), list):
        residuals = _floats([a.get("residual", math.nan) for a in doc["atoms"]], "residual")
    return ReportInput(radii=radii, scale=scale, p=float(_floats(doc["p"], "p")), residuals=residuals,
                       doc=doc)


def read_report(path) -> ReportInput:
    return report_from_document(read_document(path))


def scenario_from_document(doc: dict) -> SubspaceScenario:
    """Scenario documents list the atoms spanning S (with radii) and the
    atoms outside S::

        {"n": 2, "p": -0.5,
         "inside": [{"u": [1, 0], "w": 1, "rho": 1}],
         "outside": [{"u": [0, 1], "w": 1}],
         "R": 1, "normalize": false}

    ``R`` defaults to the largest inside radius.  With ``normalize`` the
    inside radii are canonicalized and dilated so that K^0 contains the unit
    ball of S exactly.
    """
    n = _dimension(doc)
    inside, outside = doc.get("inside"), doc.get("outside")
    if not isinstance(inside, list) or not inside or not isinstance(outside, list) or not outside:
        raise ParseError("scenario needs non-empty 'inside' and 'outside' atom lists")
    d_in, w_in = _directions(inside, n)
    d_out, w_out = _directions(outside, n)
    try:
        rho = _floats([a["rho"] for a in inside], "inside rho")
    except KeyError as exc:
        raise ParseError("every inside atom needs 'rho'") from exc
    if "p" not in doc:
        raise ParseError("scenario lacks field 'p'")
    p = float(_floats(doc["p"], "p"))
    measure = DiscreteEvenMeasure.from_atoms(np.vstack([d_in, d_out]), np.concatenate([w_in, w_out]))
    if measure.merged:
        raise ValidationError("scenario atoms must be pairwise distinct up to sign")
    s = len(d_in)
    if doc.get("normalize", False):
        return SubspaceScenario.normalized(measure, s, rho, p)
    R = float(_floats(doc.get("R", float(np.max(rho))), "R"))
    return SubspaceScenario(measure=measure, s=s, radii=rho, R=R, p=p)


def parse_scenario(path) -> SubspaceScenario:
    return scenario_from_document(read_document(path))


def scenario_document(scenario: SubspaceScenario) -> dict:
    m, s = scenario.measure, scenario.s
    return {
        "n": m.n,
        "p": float(scenario.p),
        "R": float(scenario.R),
        "inside": [{"u": [float(x) for x in m.directions[i]], "w": float(m.weights[i]),
                    "rho": float(scenario.radii[i])} for i in range(s)],
        "outside": [{"u": [float(x) for x in m.directions[i]], "w": float(m.weights[i])}
                    for i in range(s, m.size)],
    }


def theory_document(report: TheoryCheckReport, stable: bool = False,
                    elapsed: float | None = None) -> dict:
    rows = []
    for j, t in enumerate(report.t_grid):
        row = {"t": t, "g1": report.g1[j], "g2": report.g2[j], "G": report.G[j],
               "lhs": _num(report.lhs[j]), "entropy_gap": _num(report.entropy_gap[j])}
        if report.partition:
            pv = report.partition[j]
            row["partition"] = {"counts": list(pv.counts), "violations": pv.violations,
                                "worst_excess": pv.worst, "verdict": pv.verdict}
        rows.append(row)
    return {
        "header": _header(stable, elapsed),
        "passed": report.passed,
        "p": report.p,
        "k": report.k,
        "R": report.R,
        "c_f": report.c_f,
        "delta0": report.delta0,
        "verdicts": report.verdicts,
        "grid": rows,
        "skipped": [{"t": t, "reason": why} for t, why in report.skipped],
    }
