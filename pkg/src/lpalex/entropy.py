"""Entropy integral E(Q) = -∫ log h_Q(v) dv over the unit sphere.

On the normal cone of the vertex x_j the support function is the linear
function x_j·v, so the integrand is smooth on each cone.  E is assembled
cone by cone with adaptive Gauss-Legendre panels: on arcs for n = 2, and
for n = 3 in the azimuth about x_j after integrating out the polar angle
in closed form.  The latter stays cheap for very thin bodies, where the
integrand is nearly singular along whole cone edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged, ValidationError
from .geometry import SymmetricPolytope, check_dimension, normal_fan


@dataclass(frozen=True)
class QuadratureSpec:
    degree: int = 16
    max_subdivision: int = 12
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.degree < 4:
            raise ValidationError("quadrature degree must be >= 4")
        if self.max_subdivision < 0:
            raise ValidationError("max_subdivision must be nonnegative")
        if not self.rel_tol >= 1e-12:
            raise ValidationError("rel_tol must be >= 1e-12")


DEFAULT_QUAD = QuadratureSpec()
ABS_FLOOR = 1e-10
EPS = np.finfo(float).eps
ROUNDING = 64 * EPS
MAX_ACTIVE_CELLS = 200_000


@dataclass(frozen=True)
class BallConstants:
    n: int
    omega_n: float
    surface: float
    omega: dict


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def ball_constants(n: int) -> BallConstants:
    check_dimension(n)
    omega = {k: unit_ball_volume(k) for k in range(0, n + 1)}
    if n == 2:
        omega[2], surface = math.pi, 2 * math.pi
    else:
        omega[3], surface = 4 * math.pi / 3, 4 * math.pi
    return BallConstants(n=n, omega_n=omega[n], surface=surface, omega=omega)


@lru_cache(maxsize=None)
def _gauss01(degree: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(degree)
    return 0.5 * (x + 1.0), 0.5 * w


def _arc_rule(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, degree: int) -> np.ndarray:
    """Gauss rule for ∫ log(x·(cos θ, sin θ)) dθ over [lo, hi], batched over rows."""
    g, w = _gauss01(degree)
    width = hi - lo
    theta = lo[:, None] + width[:, None] * g[None, :]
    h = x[:, 0:1] * np.cos(theta) + x[:, 1:2] * np.sin(theta)
    # rounding in theta and cancellation in h perturb log h by about eps r / h
    r = np.hypot(x[:, 0:1], x[:, 1:2])
    noise = EPS * (np.abs(theta) + 2.0) * r / h
    return np.stack([width * (np.log(h) @ w), np.abs(width) * (noise @ w)], axis=1)


def _tangent_frame(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.eye(3)[np.argmin(np.abs(c))]
    e1 = ref - (ref @ c) * c
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(c, e1)


def _wedge_rule(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, degree: int) -> np.ndarray:
    """Gauss rule in the azimuth psi for the wedges between a pole and a cone edge.

    Row parameters are (r, m_c, |m_T|, psi0, sign): the vertex norm, the
    edge plane normal split into its pole and tangent parts, and the
    orientation of the cone.  In polar coordinates about the pole the
    radial integral of log(r cos theta) sin theta is G(1) - G(u_edge) with
    G(u) = u (log(r u) - 1).
    """
    g, w = _gauss01(degree)
    r, mc, mt, psi0, sign = (x[:, j:j + 1] for j in range(5))
    width = hi - lo
    psi = lo[:, None] + width[:, None] * g[None, :]
    q = mt * np.abs(np.cos(psi - psi0))
    u = q / np.sqrt(mc * mc + q * q)
    with np.errstate(divide="ignore", invalid="ignore"):
        Gu = np.where(u > 0.0, u * (np.log(r * u) - 1.0), 0.0)
    G1 = np.log(r) - 1.0
    # rounding in psi moves u by eps |du/dpsi|, and G'(u) = log(r u)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(u > 0.0, np.abs(np.log(r * u)), 0.0) * mt * mc * mc / (mc * mc + q * q) ** 1.5
    noise = EPS * (np.abs(psi) + 2.0) * (np.nan_to_num(slope) + np.abs(Gu) + np.abs(G1))
    return np.stack([sign[:, 0] * width * ((G1 - Gu) @ w), np.abs(width) * (noise @ w)], axis=1)


def _adaptive(rule, split, cells, x, tol, quad: QuadratureSpec) -> float:
    """Adaptive bisection driver shared by the arc and wedge rules.

    ``rule(x, *cells)`` integrates a batch of cells and returns rows of
    (value, rounding noise); ``split(*cells)`` returns the list of child
    batches.  A cell is accepted when the children's sum agrees with the
    parent to within the cell's tolerance, or to within the rounding noise
    of the two evaluations, below which refinement cannot help.
    """
    total = 0.0
    coarse = rule(x, *cells)
    for _ in range(quad.max_subdivision + 1):
        children = split(*cells)
        fine_parts = [rule(x, *child) for child in children]
        fine = np.sum(fine_parts, axis=0)
        floor = fine[:, 1] + coarse[:, 1] + ROUNDING * np.abs(fine[:, 0])
        ok = np.abs(fine[:, 0] - coarse[:, 0]) <= np.maximum(tol, floor)
        total += float(np.sum(fine[ok, 0]))
        if np.all(ok):
            return total
        bad = ~ok
        k = len(children)
        if k * int(bad.sum()) > MAX_ACTIVE_CELLS:
            break
        cells = tuple(np.concatenate([child[j][bad] for child in children]) for j in range(len(cells)))
        coarse = np.concatenate([part[bad] for part in fine_parts])
        x = np.concatenate([x[bad]] * k)
        tol = np.concatenate([tol[bad] / 2.0] * k)
    raise QuadratureNotConverged(
        f"{len(coarse)} cells unresolved after {quad.max_subdivision} subdivisions")


def _split_arc(lo, hi):
    mid = 0.5 * (lo + hi)
    return [(lo, mid), (mid, hi)]


def _wedges(x: np.ndarray, polygon: np.ndarray):
    """Signed wedge parameters for the cone ``polygon`` of vertex ``x``.

    Every cone lies in the open hemisphere around x, so polar coordinates
    about x/|x| cover it and the cone integral is the signed sum of the
    wedges spanned by its edges.
    """
    r = float(np.linalg.norm(x))
    c = x / r
    e1, e2 = _tangent_frame(c)
    ta = np.stack([polygon @ e1, polygon @ e2], axis=1)
    gn = ta / (polygon @ c)[:, None]
    gb = np.roll(gn, -1, axis=0)
    sign = 1.0 if np.sum(gn[:, 0] * gb[:, 1] - gn[:, 1] * gb[:, 0]) >= 0.0 else -1.0
    rows, los, his = [], [], []
    for k in range(len(polygon)):
        a, b = polygon[k], polygon[(k + 1) % len(polygon)]
        m = np.cross(a, b)
        mn = np.linalg.norm(m)
        pa, pb = ta[k], ta[(k + 1) % len(polygon)]
        if mn == 0.0 or not np.any(pa) or not np.any(pb):
            continue
        m /= mn
        lo = math.atan2(pa[1], pa[0])
        dpsi = math.atan2(pa[0] * pb[1] - pa[1] * pb[0], pa @ pb)
        mt = np.array([m @ e1, m @ e2])
        row = (r, float(m @ c), float(np.linalg.norm(mt)), math.atan2(mt[1], mt[0]), sign)
        cuts = _layer_cuts(lo, lo + dpsi, row[3], abs(row[1]) / max(row[2], 1e-300))
        rows += [row] * (len(cuts) - 1)
        los += cuts[:-1]
        his += cuts[1:]
    return rows, los, his


def _layer_cuts(lo: float, hi: float, psi0: float, width: float) -> list[float]:
    """Breakpoints for [lo, hi], graded by 4 towards the kinks psi0 +- pi/2.

    At a kink the edge meets the boundary of the hemisphere and the
    integrand behaves like |d| log |d|, with a transition layer of the given
    width; cells that reach within their own length of a kink start the
    grading at the larger of the kink distance and min(width, 1e-8).
    """
    a, b = min(lo, hi), max(lo, hi)
    span = b - a
    pts = {a, b}
    kink = psi0 + math.pi / 2 + math.pi * math.floor((a - psi0 - math.pi / 2) / math.pi) - math.pi
    while kink <= b + math.pi:
        dist = max(a - kink, kink - b, 0.0)
        if dist < span:
            if a < kink < b:
                pts.add(kink)
            d = max(dist, min(width, 1e-8), 1e-300)
            while d < span:
                pts.update(z for z in (kink - d, kink + d) if a < z < b)
                d *= 4.0
        kink += math.pi
    cuts = sorted(pts)
    return cuts if hi >= lo else cuts[::-1]


def _cells(P: SymmetricPolytope):
    """Per-vertex integration cells: arcs of the cones (n=2) or wedges about
    the vertex direction (n=3)."""
    xs, los, his, areas = [], [], [], []
    for cone in normal_fan(P):
        if cone.area <= 0.0:
            continue
        x = P.radii[cone.atom] * P.directions[cone.atom]
        if P.n == 2:
            a, _ = cone.normals
            lo = math.atan2(a[1], a[0])
            rows, lo_, hi_ = [x], [lo], [lo + cone.area]
        else:
            rows, lo_, hi_ = _wedges(x, cone.normals)
        xs.extend(rows)
        los.extend(lo_)
        his.extend(hi_)
        areas.extend([cone.area / len(rows)] * len(rows))
    return np.array(xs, dtype=float), [np.array(los), np.array(his)], np.array(areas)


def entropy(P: SymmetricPolytope, quad: QuadratureSpec | None = None) -> float:
    """E(P) = -∫_{S^{n-1}} log h_P(v) dv, both antipodal halves included."""
    quad = quad or DEFAULT_QUAD
    x, cells, areas = _cells(P)
    base = _arc_rule if P.n == 2 else _wedge_rule
    rule = lambda x, lo, hi: base(x, lo, hi, quad.degree)
    estimate = 2.0 * float(np.sum(rule(x, *cells)[:, 0]))
    target = max(quad.rel_tol * abs(estimate), ABS_FLOOR)
    # half the budget by area, half split evenly so that tiny cones do not
    # receive tolerances below the rounding floor of their geometry
    tol = 0.25 * target * (areas / areas.sum() + 1.0 / len(areas))
    return -2.0 * _adaptive(rule, _split_arc, tuple(cells), x, tol, quad)


def entropy_gradient(P: SymmetricPolytope) -> np.ndarray:
    """dE/d(log rho_i) per stored atom, counting both antipodes: -2 J_i.

    On the cone of x_i the support function is rho_i u_i·v, so the
    derivative is minus the cone measure.  Absorbed atoms give 0; at the
    vertex/absorbed boundary this is the one-sided derivative from below.
    """
    return np.array([-2.0 * c.area for c in normal_fan(P)])
