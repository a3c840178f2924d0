"""File exports for solve results: SVG figure (n=2), OBJ mesh (n=3), CSV tables."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon, Wedge  # noqa: E402

import numpy as np  # noqa: E402

from .geometry import DiscreteEvenMeasure, SymmetricPolytope  # noqa: E402
from .io import atomic_write  # noqa: E402
from .solver import SolveReport  # noqa: E402

# residual sign colors: curvature above the target, below, or matched
OVER, UNDER, MATCHED = "#c0392b", "#2e6da4", "#7f8c8d"
FAN_RADIUS = 0.35


def _polygon_2d(P: SymmetricPolytope) -> np.ndarray:
    pts = P.points[P.is_vertex]
    pts = np.vstack([pts, -pts])
    return pts[np.argsort(np.arctan2(pts[:, 1], pts[:, 0]))]


def _sign_color(signed: float, tol: float) -> str:
    if abs(signed) <= tol:
        return MATCHED
    return OVER if signed > 0 else UNDER


def render_svg(report: SolveReport, measure: DiscreteEvenMeasure, p: float, match_tol: float = 1e-6) -> str:
    """Polygon, atom rays and the normal fan, each cone drawn as a sector
    colored by the sign of c^p Jp_i - mu_i."""
    P = report.polytope
    if P.n != 2:
        raise ValueError("SVG export is available for n = 2 only")
    signed = report.scale ** p * report.curvature.Jp - measure.weights
    reach = float(np.max(P.radii))
    fan_r = FAN_RADIUS * reach

    with plt.rc_context({"svg.hashsalt": "lpalex", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        ax.add_patch(Polygon(_polygon_2d(P), closed=True, facecolor="#f4f1e8", edgecolor="black", lw=1.2))
        for k, cone in enumerate(P.cones):
            if cone.area <= 0.0:
                continue
            a = cone.normals[0]
            start = math.degrees(math.atan2(a[1], a[0]))
            color = _sign_color(signed[k] / measure.weights[k], match_tol)
            for flip in (0.0, 180.0):
                ax.add_patch(Wedge((0, 0), fan_r, start + flip, start + flip + math.degrees(cone.area),
                                   facecolor=color, alpha=0.45, edgecolor="white", lw=0.8))
        for k, (u, rho) in enumerate(zip(measure.directions, P.radii)):
            style = "-" if P.is_vertex[k] else ":"
            for s in (1.0, -1.0):
                ax.plot([0, s * 1.15 * reach * u[0]], [0, s * 1.15 * reach * u[1]], style, color="0.4", lw=0.7)
                ax.plot(s * rho * u[0], s * rho * u[1], "o", color="black" if P.is_vertex[k] else "white",
                        mec="black", ms=4)
        lim = 1.25 * reach
        ax.set_xlim(-lim, lim)
        ax.set_ylim(-lim, lim)
        ax.set_aspect("equal")
        ax.set_title(f"p = {p:g}, c = {report.scale:.6g}, max residual = {report.max_residual:.2e}",
                     fontsize=9)
        ax.plot([], [], "s", color=OVER, alpha=0.6, label="c^p Jp > mu")
        ax.plot([], [], "s", color=UNDER, alpha=0.6, label="c^p Jp < mu")
        ax.plot([], [], "s", color=MATCHED, alpha=0.6, label="matched")
        ax.legend(loc="lower right", fontsize=7, frameon=False)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def facet_polygons(P: SymmetricPolytope, tol: float = 1e-9) -> tuple[np.ndarray, list[np.ndarray]]:
    """Vertex coordinates and, per facet, vertex indices ordered
    counterclockwise seen from outside (n = 3)."""
    pts = P.points[P.is_vertex]
    pts = np.vstack([pts, -pts])
    scale = float(np.max(np.linalg.norm(pts, axis=1)))
    faces = []
    for a, b in zip(P.facet_normals, P.facet_offsets):
        idx = np.flatnonzero(np.abs(pts @ a - b) <= tol * scale)
        c = pts[idx].mean(axis=0)
        e1 = pts[idx[0]] - c
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        rel = pts[idx] - c
        faces.append(idx[np.argsort(np.arctan2(rel @ e2, rel @ e1))])
    return pts, faces


def render_obj(P: SymmetricPolytope) -> str:
    if P.n != 3:
        raise ValueError("OBJ export is available for n = 3 only")
    pts, faces = facet_polygons(P)
    lines = ["# lpalex symmetric polytope", f"# {len(pts)} vertices, {len(faces)} facets"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in pts.tolist()]
    lines += ["f " + " ".join(str(int(i) + 1) for i in face) for face in faces]
    return "\n".join(lines) + "\n"


def render_atom_csv(report: SolveReport, measure: DiscreteEvenMeasure) -> str:
    P, curv = report.polytope, report.curvature
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"u{j}" for j in range(measure.n)] + ["mu", "rho", "vertex", "J", "Jp", "residual"])
    for k in range(measure.size):
        w.writerow([repr(float(x)) for x in measure.directions[k]]
                   + [repr(float(measure.weights[k])), repr(float(P.radii[k])), int(P.is_vertex[k]),
                      repr(float(curv.J[k])), repr(float(curv.Jp[k])), repr(float(report.residuals[k]))])
    return buf.getvalue()


def render_trace_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "phi"])
    for k, v in enumerate(report.phi_trace):
        w.writerow([k, repr(float(v))])
    return buf.getvalue()


def export(report: SolveReport, measure: DiscreteEvenMeasure, p: float, stem, kinds) -> list[Path]:
    """Write the requested exports next to ``stem``; returns the written paths."""
    stem = Path(stem)
    written = []
    for kind in kinds:
        if kind == "svg":
            out = stem.with_name(stem.name + ".svg")
            atomic_write(out, render_svg(report, measure, p))
            written.append(out)
        elif kind == "obj":
            out = stem.with_name(stem.name + ".obj")
            atomic_write(out, render_obj(report.polytope))
            written.append(out)
        elif kind == "csv":
            atoms = stem.with_name(stem.name + ".atoms.csv")
            trace = stem.with_name(stem.name + ".trace.csv")
            atomic_write(atoms, render_atom_csv(report, measure))
            atomic_write(trace, render_trace_csv(report))
            written += [atoms, trace]
        else:
            raise ValueError(f"unknown export kind {kind!r}")
    return written
