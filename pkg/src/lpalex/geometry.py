"""Origin-symmetric polytopes conv{±rho_i u_i} in dimensions 2 and 3.

A polytope is described by the rays of an even discrete measure and one
radius per ray.  `build_polytope` computes the hull, classifies every atom
as a vertex or as absorbed (lying in the hull of the others), canonicalizes
the radii to the radial function, and records the normal fan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHull, DimensionUnsupported, ValidationError

SUPPORTED_DIMS = (2, 3)

ATOM_MERGE_TOL = 1e-10
UNIT_TOL = 1e-12
SPAN_TOL = 1e-10
FACET_MERGE_ANGLE = 1e-9
CONE_VERTEX_MERGE = 1e-9


def check_dimension(n: int) -> None:
    if n not in SUPPORTED_DIMS:
        raise DimensionUnsupported(f"dimension {n} not supported (expected 2 or 3)")


def unit(x) -> np.ndarray:
    """Return ``x`` scaled to unit Euclidean length."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValidationError(f"cannot normalize vector {x!r}")
    # leave vectors that are unit up to rounding untouched, so that
    # serialized directions round-trip bit for bit
    return x if abs(norm - 1.0) <= 4e-16 else x / norm


def direction_rank(directions: np.ndarray, tol: float = SPAN_TOL) -> int:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.size == 0:
        return 0
    s = np.linalg.svd(directions, compute_uv=False)
    return int(np.sum(s > tol))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteEvenMeasure:
    """Even discrete measure sum_i w_i (delta_{u_i} + delta_{-u_i}).

    Only one representative of each antipodal pair is stored.  Build
    instances with :meth:`from_atoms`, which normalizes directions and merges
    duplicate or antipodal atoms.
    """

    directions: np.ndarray
    weights: np.ndarray
    merged: int = 0

    def __post_init__(self):
        object.__setattr__(self, "directions", _frozen(np.atleast_2d(self.directions)))
        object.__setattr__(self, "weights", _frozen(np.ravel(self.weights)))
        if self.directions.shape[0] != self.weights.shape[0]:
            raise ValidationError("directions and weights differ in length")
        check_dimension(self.directions.shape[1])
        if self.weights.size == 0:
            raise ValidationError("measure has no atoms")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValidationError("atom weights must be finite and strictly positive")
        norms = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValidationError("directions must have unit length")

    @classmethod
    def from_atoms(cls, directions, weights, tol: float = ATOM_MERGE_TOL) -> DiscreteEvenMeasure:
        dirs: list[np.ndarray] = []
        ws: list[float] = []
        merged = 0
        for d, w in zip(np.atleast_2d(np.asarray(directions, dtype=float)), np.ravel(weights)):
            u = unit(d)
            for k, v in enumerate(dirs):
                if np.linalg.norm(u - v) <= tol or np.linalg.norm(u + v) <= tol:
                    ws[k] += float(w)
                    merged += 1
                    break
            else:
                dirs.append(u)
                ws.append(float(w))
        return cls(np.array(dirs), np.array(ws), merged)

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @property
    def spans(self) -> bool:
        return direction_rank(self.directions) == self.n

    @property
    def total_mass(self) -> float:
        """Mass over the full ± support."""
        return 2.0 * float(np.sum(self.weights))

    def scaled(self, factor: float) -> DiscreteEvenMeasure:
        return DiscreteEvenMeasure(self.directions, self.weights * factor)

    def subset(self, index) -> DiscreteEvenMeasure:
        return DiscreteEvenMeasure(self.directions[index], self.weights[index])


@dataclass(frozen=True)
class NormalCone:
    """Normal cone of the vertex rho_i u_i, intersected with the sphere."""

    atom: int
    normals: np.ndarray
    area: float


@dataclass(frozen=True)
class SymmetricPolytope:
    """Hull of ±rho_i u_i with facet and normal-fan data.

    ``radii`` are canonical (rho_i equals the radial function at u_i);
    ``input_radii`` are the radii the hull was built from.  ``incident[i]``
    lists the facets through the vertex rho_i u_i in cyclic order and is
    empty for absorbed atoms.
    """

    directions: np.ndarray
    radii: np.ndarray
    input_radii: np.ndarray
    is_vertex: np.ndarray
    facet_normals: np.ndarray
    facet_offsets: np.ndarray
    incident: tuple = field(repr=False)
    cones: tuple = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Vertex candidates rho_i u_i for the stored atoms (antipodes implicit)."""
        return self.radii[:, None] * self.directions

    def support(self, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        pts = self.points[self.is_vertex]
        vals = np.max(np.abs(np.atleast_2d(v) @ pts.T), axis=1)
        return vals if v.ndim > 1 else float(vals[0])

    def radial(self, u) -> np.ndarray | float:
        u = np.asarray(u, dtype=float)
        dots = np.atleast_2d(u) @ self.facet_normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(dots > 0, self.facet_offsets / dots, np.inf)
        vals = np.min(ratios, axis=1)
        return vals if u.ndim > 1 else float(vals[0])

    def polar_support(self, v) -> np.ndarray | float:
        """Support function of the polar body, whose vertices are a_f / b_f."""
        v = np.asarray(v, dtype=float)
        vals = np.max(np.atleast_2d(v) @ (self.facet_normals / self.facet_offsets[:, None]).T, axis=1)
        return vals if v.ndim > 1 else float(vals[0])

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        scale = float(np.max(self.facet_offsets))
        return bool(np.all(self.facet_normals @ x <= self.facet_offsets + tol * scale))

    def scaled(self, factor: float) -> SymmetricPolytope:
        return build_polytope(self.directions, self.radii * factor)


def _hull_2d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    """Monotone-chain hull of a centrally symmetric planar point set.

    Returns facet normals, offsets, and for every point the incident facets
    in counterclockwise order (empty when the point is not a vertex).
    """
    order = np.lexsort((points[:, 1], points[:, 0]))

    def cross(o, a, b):
        oa = points[a] - points[o]
        ob = points[b] - points[o]
        c = oa[0] * ob[1] - oa[1] * ob[0]
        return c - 1e-12 * np.linalg.norm(oa) * np.linalg.norm(ob)

    lower: list[int] = []
    for k in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], k) <= 0:
            lower.pop()
        lower.append(int(k))
    upper: list[int] = []
    for k in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], k) <= 0:
            upper.pop()
        upper.append(int(k))
    ring = lower[:-1] + upper[:-1]

    def edge_normal(a, b):
        d = points[b] - points[a]
        nrm = np.array([d[1], -d[0]])
        return nrm / np.linalg.norm(nrm)

    # drop vertices whose two edges are numerically parallel
    changed = True
    while changed and len(ring) > 3:
        changed = False
        m = len(ring)
        for k in range(m):
            a, b, c = ring[k - 1], ring[k], ring[(k + 1) % m]
            n1, n2 = edge_normal(a, b), edge_normal(b, c)
            if abs(math.atan2(n1[0] * n2[1] - n1[1] * n2[0], n1 @ n2)) < FACET_MERGE_ANGLE:
                del ring[k]
                changed = True
                break

    m = len(ring)
    normals = np.array([edge_normal(ring[k], ring[(k + 1) % m]) for k in range(m)])
    offsets = np.array([normals[k] @ points[ring[k]] for k in range(m)])
    incident: list[list[int]] = [[] for _ in range(len(points))]
    for k, idx in enumerate(ring):
        incident[idx] = [(k - 1) % m, k]
    return normals, offsets, incident


def _cyclic_order(normals: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Counterclockwise order (seen from outside) of unit vectors in the open
    hemisphere around ``axis``.

    The vectors are centrally projected to the tangent plane at ``axis``,
    where they form a convex polygon, and sorted around its centroid.
    """
    c = axis / np.linalg.norm(axis)
    ref = np.eye(3)[np.argmin(np.abs(c))]
    e1 = ref - (ref @ c) * c
    e1 /= np.linalg.norm(e1)
    e2 = _cross(c, e1)
    g = normals / (normals @ c)[:, None]
    x, y = g @ e1, g @ e2
    return np.argsort(np.arctan2(y - y.mean(), x - x.mean()), kind="stable")


def _hull_3d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateHull(str(exc)) from exc
    eq = hull.equations
    tri_normals = eq[:, :3] / np.linalg.norm(eq[:, :3], axis=1)[:, None]
    simplices = hull.simplices
    pts = points[simplices]
    areas = 0.5 * np.linalg.norm(_cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]), axis=1)

    dist = np.linalg.norm(tri_normals[:, None, :] - tri_normals[None, :, :], axis=2)
    group = np.full(len(eq), -1)
    reps: list[np.ndarray] = []
    for t in range(len(eq)):
        if group[t] >= 0:
            continue
        close = (group < 0) & (dist[t] < FACET_MERGE_ANGLE)
        group[close] = len(reps)
        w = areas[close] + 1e-300
        rep = (tri_normals[close] * w[:, None]).sum(axis=0)
        reps.append(rep / np.linalg.norm(rep))
    normals = np.array(reps)
    members = [np.unique(simplices[group == g]) for g in range(len(reps))]
    offsets = np.array([np.max(points[mem] @ normals[g]) for g, mem in enumerate(members)])

    # enforce exact central symmetry of the facet list
    anti = np.linalg.norm(normals[:, None, :] + normals[None, :, :], axis=2)
    partner = np.full(len(normals), -1)
    for g in range(len(normals)):
        if partner[g] >= 0:
            continue
        h = int(np.argmin(anti[g]))
        if h != g and anti[g, h] < 1e-7 and partner[h] < 0:
            partner[g], partner[h] = h, g
            normals[h] = -normals[g]
            offsets[g] = offsets[h] = max(offsets[g], offsets[h])

    incident: list[list[int]] = [[] for _ in range(len(points))]
    for g, mem in enumerate(members):
        for k in mem:
            incident[int(k)].append(g)
    for k, facets in enumerate(incident):
        if len(facets) >= 3:
            facets = np.array(facets)
            incident[k] = [int(f) for f in facets[_cyclic_order(normals[facets], points[k])]]
        else:
            incident[k] = []
    return normals, offsets, incident


def build_polytope(measure, radii) -> SymmetricPolytope:
    """Hull of {±rho_i u_i} with canonical radii.

    ``measure`` is a :class:`DiscreteEvenMeasure` or an (N, n) array of unit
    directions.
    """
    directions = measure.directions if isinstance(measure, DiscreteEvenMeasure) else np.atleast_2d(
        np.asarray(measure, dtype=float))
    n = directions.shape[1]
    check_dimension(n)
    radii = np.asarray(radii, dtype=float).ravel()
    if radii.shape[0] != directions.shape[0]:
        raise ValidationError(f"expected {directions.shape[0]} radii, got {radii.shape[0]}")
    if np.any(~np.isfinite(radii)) or np.any(radii <= 0):
        raise ValidationError("radii must be finite and strictly positive")

    N = directions.shape[0]
    half = radii[:, None] * directions
    points = np.vstack([half, -half])
    s = np.linalg.svd(points, compute_uv=False)
    if s.size < n or s[n - 1] <= 1e-12 * s[0]:
        raise DegenerateHull("points ±rho_i u_i span a proper subspace")

    normals, offsets, incident = (_hull_2d if n == 2 else _hull_3d)(points)
    if np.any(offsets <= 1e-12 * s[0]):
        raise DegenerateHull("origin is not interior to the hull")

    is_vertex = np.array([len(incident[i]) >= n for i in range(N)])
    dots = directions @ normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.min(np.where(dots > 0, offsets / dots, np.inf), axis=1)
    canonical = np.where(is_vertex, radii, np.maximum(radii, rad))

    facet_normals = _frozen(normals)
    cones = []
    for i in range(N):
        cone_normals = facet_normals[list(incident[i])] if is_vertex[i] else np.empty((0, n))
        cones.append(NormalCone(atom=i, normals=cone_normals, area=cone_area(cone_normals)))

    return SymmetricPolytope(
        directions=_frozen(directions),
        radii=_frozen(canonical),
        input_radii=_frozen(radii),
        is_vertex=np.array(is_vertex),
        facet_normals=facet_normals,
        facet_offsets=_frozen(offsets),
        incident=tuple(tuple(incident[i]) if is_vertex[i] else () for i in range(N)),
        cones=tuple(cones),
    )


def support(P: SymmetricPolytope, v) -> float:
    return P.support(v)


def radial(P: SymmetricPolytope, u) -> float:
    return P.radial(u)


def _merge_close(vertices: np.ndarray, tol: float = CONE_VERTEX_MERGE) -> np.ndarray:
    gaps = np.linalg.norm(vertices - np.roll(vertices, 1, axis=0), axis=1)
    keep = gaps > tol
    if not keep.any():
        return vertices[:1]
    return vertices[keep]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def spherical_polygon_area(vertices) -> float:
    """Area of a convex spherical polygon by angle excess.

    ``vertices`` are unit vectors in cyclic order (either orientation).
    Interior angles come from unit tangents orthogonalized against each
    vertex; vertices closer than 1e-9 are merged first.
    """
    V = _merge_close(np.asarray(vertices, dtype=float))
    m = len(V)
    if m < 3:
        return 0.0
    prev = np.roll(V, 1, axis=0)
    nxt = np.roll(V, -1, axis=0)
    ta = prev - np.sum(prev * V, axis=1)[:, None] * V
    tb = nxt - np.sum(nxt * V, axis=1)[:, None] * V
    ta /= np.linalg.norm(ta, axis=1)[:, None]
    tb /= np.linalg.norm(tb, axis=1)[:, None]
    angles = np.arctan2(np.linalg.norm(_cross(ta, tb), axis=1), np.sum(ta * tb, axis=1))
    return max(float(np.sum(angles)) - (m - 2) * math.pi, 0.0)


def cone_area(normals: np.ndarray) -> float:
    if len(normals) == 0:
        return 0.0
    if normals.shape[1] == 2:
        a, b = normals
        return math.atan2(a[0] * b[1] - a[1] * b[0], a @ b)
    return spherical_polygon_area(normals)


def normal_fan(P: SymmetricPolytope) -> list[NormalCone]:
    """One cone per stored atom; absorbed atoms get an empty cone of area 0."""
    return list(P.cones)
