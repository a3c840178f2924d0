"""Numerical checks of the non-collapse argument for -1 < p < 0.

A *scenario* is a body K^0 = conv{±rho_i u_i : i < s} collapsed into the
proper subspace S = span{u_i : i < s}, together with the remaining atoms
u_s..u_{N-1} outside S.  Lifting the outside atoms to height t gives

    K^t = conv{±rho_i u_i (i < s), ±t u_j (j >= s)},

and the harness checks that Phi(K^t) - Phi(K^0) >= G(t) > 0 for small t,
i.e. that a collapsed configuration is never a maximizer.

Points of the sphere are written v = (v_S cos(phi), v_perp sin(phi)) with
v_S in S and v_perp in its orthogonal complement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .curvature import uniform_sphere
from .entropy import QuadratureSpec, ball_constants, entropy
from .errors import InadmissibleT, Unresolvable, SpanningViolated, ValidationError
from .geometry import DiscreteEvenMeasure, SymmetricPolytope, build_polytope, direction_rank
from .solver import Objective

# thin bodies need deep refinement along the near-singular cone edges
THEORY_QUAD = QuadratureSpec(degree=16, max_subdivision=40, rel_tol=1e-11)
DEFAULT_T_GRID = (1e-4, 1e-3, 1e-2, 1e-1)
SLACK = 1e-12
# below t / R ~ 1e-8 the facet normals of K^t come within the 1e-9 merge angle
RESOLUTION_FLOOR = 1e-8
PEAK_SCAN = tuple(10.0 ** (-j / 8) for j in range(8, 8 * 300 + 1))
BOUND_SLACK = 1e-9


def _subspace_bases(directions: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    _, _, vt = np.linalg.svd(directions)
    return vt[:k], vt[k:]


def _in_subspace_radii(coords: np.ndarray, radii: np.ndarray) -> tuple[np.ndarray, float]:
    """Canonical radii of the atoms inside S and the inradius of K^0 within S."""
    if coords.shape[1] == 1:
        r = float(np.max(radii))
        return np.full(len(radii), r), r
    P = build_polytope(coords / np.linalg.norm(coords, axis=1)[:, None], radii)
    return np.array(P.radii), float(np.min(P.facet_offsets))


@dataclass(frozen=True)
class SubspaceScenario:
    """A body collapsed into S plus atoms outside S.

    The first ``s`` atoms of ``measure`` span S (dimension k < n) and carry
    ``radii``; the others lie outside S.  The body K^0 must contain the unit
    ball of S and lie in the ball of radius R.
    """

    measure: DiscreteEvenMeasure
    s: int
    radii: np.ndarray
    R: float
    p: float

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float).ravel()
        object.__setattr__(self, "radii", radii)
        m = self.measure
        if not 1 <= self.s < m.size:
            raise ValidationError("split index must satisfy 1 <= s < N")
        if radii.shape[0] != self.s:
            raise ValidationError(f"expected {self.s} radii")
        if not m.spans:
            raise SpanningViolated("atoms are concentrated on a great subsphere")
        if self.k >= m.n:
            raise ValidationError("the first s atoms must span a proper subspace")
        perp = m.directions[self.s:] @ self.perp_basis.T
        if np.any(np.linalg.norm(perp, axis=1) <= 1e-10):
            raise ValidationError("atoms after the split must lie outside S")
        if self.p == 0.0:
            raise ValidationError("p must be nonzero")
        if self.R < 1.0 or np.any(radii < 1.0 - 1e-12) or np.any(radii > self.R * (1 + 1e-12)):
            raise ValidationError("radii must lie in [1, R] with R >= 1")
        canonical, inradius = _in_subspace_radii(self.in_coords, radii)
        if inradius < 1.0 - 1e-9:
            raise ValidationError(f"K^0 must contain the unit ball of S (inradius {inradius:.6g})")
        if not np.allclose(canonical, radii, rtol=1e-10, atol=0):
            raise ValidationError("radii must be canonical: every atom in S must be a boundary point of K^0")

    @classmethod
    def normalized(cls, measure: DiscreteEvenMeasure, s: int, radii, p: float) -> SubspaceScenario:
        """Canonicalize the in-S radii and dilate so that K^0 has inradius 1 in S."""
        k = direction_rank(measure.directions[:s])
        basis, _ = _subspace_bases(measure.directions[:s], k)
        canonical, inradius = _in_subspace_radii(measure.directions[:s] @ basis.T,
                                                 np.asarray(radii, dtype=float))
        canonical = canonical / inradius
        canonical = np.maximum(canonical, 1.0)
        return cls(measure=measure, s=s, radii=canonical, R=float(np.max(canonical)), p=p)

    @property
    def n(self) -> int:
        return self.measure.n

    @cached_property
    def k(self) -> int:
        return direction_rank(self.measure.directions[:self.s])

    @cached_property
    def basis(self) -> np.ndarray:
        return _subspace_bases(self.measure.directions[:self.s], self.k)[0]

    @cached_property
    def perp_basis(self) -> np.ndarray:
        return _subspace_bases(self.measure.directions[:self.s], self.k)[1]

    @property
    def in_coords(self) -> np.ndarray:
        return self.measure.directions[:self.s] @ self.basis.T

    @property
    def outside(self) -> np.ndarray:
        return self.measure.directions[self.s:]

    def polar_angle(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(v)
        return np.arctan2(np.linalg.norm(v @ self.perp_basis.T, axis=1),
                          np.linalg.norm(v @ self.basis.T, axis=1))

    @cached_property
    def constants(self) -> LowerBoundConstants:
        return lower_bound_constants(self)

    @property
    def a(self) -> float:
        return float(np.sum(self.radii ** (-self.p) * self.measure.weights[:self.s]))

    @property
    def b(self) -> float:
        return float(np.sum(self.measure.weights[self.s:]))


@dataclass(frozen=True)
class LowerBoundConstants:
    c_f: float
    delta0: float
    perp_min: float


def _circle(m: int) -> np.ndarray:
    a = np.linspace(0.0, 2 * math.pi, m, endpoint=False)
    return np.column_stack([np.cos(a), np.sin(a)])


def _sphere_factor(basis: np.ndarray, m: int) -> np.ndarray:
    """Grid on the unit sphere of span(basis) (two points or a circle)."""
    if len(basis) == 1:
        return np.vstack([basis[0], -basis[0]])
    return _circle(m) @ basis


def _f_min(scenario: SubspaceScenario, delta: float, grid: int) -> float:
    """Grid minimum of f(v) = max_{j >= s} |v·u_j| over {phi >= pi/2 - delta}."""
    vs = _sphere_factor(scenario.basis, grid)
    vp = _sphere_factor(scenario.perp_basis, grid)
    phis = np.linspace(math.pi / 2 - delta, math.pi / 2, grid if delta > 0 else 1)
    v = (np.cos(phis)[:, None, None, None] * vs[None, :, None, :]
         + np.sin(phis)[:, None, None, None] * vp[None, None, :, :]).reshape(-1, scenario.n)
    return float(np.min(np.max(np.abs(v @ scenario.outside.T), axis=1)))


def lower_bound_constants(scenario: SubspaceScenario, grid: int = 96,
                          sweeps: int = 30) -> LowerBoundConstants:
    """Constants c_f in (0, 1) and delta0 in (0, pi/2) with f >= c_f on
    {phi > pi/2 - delta0}.

    c_f is half the grid minimum of f over the unit sphere of S-perp; delta0
    is found by dyadic bisection on delta.
    """
    perp_min = _f_min(scenario, 0.0, grid)
    if perp_min <= 1e-12:
        raise SpanningViolated("f vanishes on the orthogonal complement of S")
    c_f = 0.5 * perp_min
    lo, hi = 0.0, math.pi / 2
    for _ in range(sweeps):
        mid = 0.5 * (lo + hi)
        if _f_min(scenario, mid, grid) >= c_f:
            lo = mid
        else:
            hi = mid
    return LowerBoundConstants(c_f=c_f, delta0=lo, perp_min=perp_min)


def admissible_t_bound(c_f: float, R: float, delta0: float) -> float:
    """Supremum of t with arccos(c_f t / R) > pi/2 - delta0."""
    return min(1.0, R * math.sin(delta0) / c_f)


def is_admissible(scenario: SubspaceScenario, t: float) -> bool:
    const = scenario.constants
    return 0.0 < t < 1.0 and math.acos(min(1.0, const.c_f * t / scenario.R)) > math.pi / 2 - const.delta0


@dataclass(frozen=True)
class PointBody:
    """conv{±x_i} through its support function only.

    Used for the collapsed body K^0 inside S and for support evaluation of
    K^t at t too small for a hull.
    """

    points: np.ndarray

    def support(self, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        vals = np.max(np.abs(np.atleast_2d(v) @ self.points.T), axis=1)
        return vals if v.ndim > 1 else float(vals[0])


def perturbation_radii(scenario: SubspaceScenario, t: float) -> np.ndarray:
    return np.concatenate([scenario.radii, np.full(scenario.measure.size - scenario.s, t)])


def build_perturbation(scenario: SubspaceScenario, t: float) -> SymmetricPolytope | PointBody:
    if t == 0.0:
        return PointBody(scenario.radii[:, None] * scenario.measure.directions[:scenario.s])
    if t < RESOLUTION_FLOOR * scenario.R:
        raise Unresolvable(f"t = {t} is below the hull resolution {RESOLUTION_FLOOR} R")
    if not is_admissible(scenario, t):
        raise InadmissibleT(f"t = {t} violates arccos(c_f t / R) > pi/2 - delta0")
    return build_polytope(scenario.measure, perturbation_radii(scenario, t))


def _weight_integral(k: int, n: int, upper: float, log: bool = False) -> float:
    """∫_{arccos(upper)}^{pi/2} [log cos phi] cos^{k-1} phi sin^{n-k-1} phi dphi.

    Integrated in x = cos(phi) with algebraic-logarithmic quadrature weights,
    which absorb the log singularity at x = 0 and the (1 - x)^(-1/2)
    endpoint singularity at x = 1.
    """
    upper = min(upper, 1.0)
    if upper <= 0.0:
        return 0.0
    e = (n - k - 2) / 2.0
    if upper == 1.0:
        f = lambda x: x ** (k - 1) * (1.0 + x) ** e
        wvar = (0.0, e)
    else:
        f = lambda x: x ** (k - 1) * (1.0 - x * x) ** e
        wvar = (0.0, 0.0)
    val, _ = integrate.quad(f, 0.0, upper, weight="alg-loga" if log else "alg", wvar=wvar,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def sphere_factor(k: int, n: int) -> float:
    """k omega_k (n-k) omega_{n-k} / (n omega_n)."""
    omega = ball_constants(n).omega
    return k * omega[k] * (n - k) * omega[n - k] / ball_constants(n).surface


def limit_entropy(scenario: SubspaceScenario, quad: QuadratureSpec = THEORY_QUAD) -> float:
    """Entropy of the collapsed body K^0.

    With h_{K^0}(v) = cos(phi) h_P(v_S) for the section P of K^0 in S,

        E(K^0) = (n-k) omega_{n-k} I0 E_S(P) - k omega_k (n-k) omega_{n-k} L,

    where I0 and L are the weight integrals over [0, pi/2] without and with
    log cos(phi), and E_S is the entropy of P inside S.
    """
    n, k = scenario.n, scenario.k
    omega = ball_constants(n).omega
    i0 = _weight_integral(k, n, 1.0)
    lg = _weight_integral(k, n, 1.0, log=True)
    if k == 1:
        e_section = -2.0 * math.log(float(scenario.radii[0]))
    else:
        coords = scenario.in_coords
        section = build_polytope(coords / np.linalg.norm(coords, axis=1)[:, None], scenario.radii)
        e_section = entropy(section, quad)
    return (n - k) * omega[n - k] * i0 * e_section - k * omega[k] * (n - k) * omega[n - k] * lg


def limit_phi(scenario: SubspaceScenario, quad: QuadratureSpec = THEORY_QUAD) -> float:
    return (limit_entropy(scenario, quad) / ball_constants(scenario.n).surface
            - math.log(2.0 * scenario.a) / scenario.p)


@dataclass(frozen=True)
class Gains:
    g1: float
    g2: float
    G: float


def gain_functions(scenario: SubspaceScenario, t: float) -> Gains:
    if not is_admissible(scenario, t):
        raise InadmissibleT(f"t = {t} is not admissible")
    n, k, R, p = scenario.n, scenario.k, scenario.R, scenario.p
    x = scenario.constants.c_f * t / R
    g1 = (-math.log(t) * _weight_integral(k, n, x)
          - math.log(R) * (math.asin(t) - math.asin(x))
          + _weight_integral(k, n, t, log=True))
    g2 = -math.log1p(scenario.b * t ** (-p) / scenario.a) / p
    return Gains(g1=g1, g2=g2, G=sphere_factor(k, n) * g1 + g2)


def g1_bound(scenario: SubspaceScenario, t: float) -> float:
    """Upper bound for |g1(t)| from the explicit estimate chain (t <= sqrt(3)/2)."""
    x = scenario.constants.c_f * t / scenario.R
    lt = abs(math.log(t))
    return (lt * math.asin(x) + math.log(scenario.R) * (math.asin(x) + math.asin(t))
            + 2.0 * t * (1.0 + lt))


@dataclass(frozen=True)
class PartitionVerdict:
    t: float
    counts: tuple[int, int, int]
    violations: int
    verdict: bool
    worst: float


def partition_check(scenario: SubspaceScenario, t: float, samples: int = 10 ** 5, seed: int = 0,
                    swap_bounds: bool = False) -> PartitionVerdict:
    """Sample the sphere and test the support-function bounds region by region.

    ``swap_bounds`` exchanges the two arccos thresholds; it exists to check
    that the harness detects misclassified regions.
    """
    if not is_admissible(scenario, t):
        raise InadmissibleT(f"t = {t} is not admissible")
    Kt = PointBody(perturbation_radii(scenario, t)[:, None] * scenario.measure.directions)
    K0 = build_perturbation(scenario, 0.0)
    rng = np.random.Generator(np.random.Philox(seed))
    v = uniform_sphere(rng, samples, scenario.n)
    ang = scenario.polar_angle(v)
    cos_phi = np.cos(ang)
    ht = Kt.support(v)
    h0 = K0.support(v)

    upper = math.acos(scenario.constants.c_f * t / scenario.R)
    lower = math.acos(t)
    if swap_bounds:
        upper, lower = lower, upper
    omega1 = ang > upper
    omega2 = ang < lower
    omega3 = ~(omega1 | omega2)

    excess = np.zeros(samples)
    excess[omega1] = np.maximum(ht[omega1] - t, cos_phi[omega1] - h0[omega1])
    excess[omega2] = np.abs(ht[omega2] - h0[omega2])
    excess[omega3] = np.maximum(ht[omega3] - scenario.R, cos_phi[omega3] - h0[omega3])
    bad = int(np.sum(excess > SLACK))
    return PartitionVerdict(t=t, counts=(int(omega1.sum()), int(omega2.sum()), int(omega3.sum())),
                            violations=bad, verdict=bad == 0, worst=float(np.max(excess)))


@dataclass
class TheoryCheckReport:
    c_f: float
    delta0: float
    R: float
    p: float
    k: int
    t_grid: list[float]
    g1: list[float]
    g2: list[float]
    G: list[float]
    lhs: list[float]
    entropy_gap: list[float]
    partition: list[PartitionVerdict]
    skipped: list[tuple[float, str]] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def gain_peak(scenario: SubspaceScenario) -> float | None:
    """The first local maximum of G on a log-spaced scan of [1e-300, 0.1],
    scanning upward from the smallest t, or None when G is not positive at
    the bottom of the scan (as for p <= -1).

    G can have a second positive regime at larger t; the gain near t = 0
    is the one that matters, so the scan stops at the first peak.
    """
    prev_t, prev_G = None, -math.inf
    for t in reversed(PEAK_SCAN):
        if not is_admissible(scenario, t):
            break
        G = gain_functions(scenario, t).G
        if prev_t is None and not G > 0.0:
            return None
        if G <= prev_G:
            return prev_t
        prev_t, prev_G = t, G
    return prev_t


def auto_t_grid(scenario: SubspaceScenario) -> tuple[float, ...]:
    """The default grid plus four points t_m / 8, ..., t_m below the peak t_m of G.

    For p close to -1 the region where G is positive and increasing lies far
    below the default grid (t < 1e-8 at p = -0.9, t < 1e-221 at p = -0.99).
    """
    peak = gain_peak(scenario)
    extra = () if peak is None else tuple(peak * 2.0 ** -j for j in range(4))
    return tuple(sorted(set(DEFAULT_T_GRID) | set(extra)))


def degeneracy_gain_check(scenario: SubspaceScenario, t_grid=DEFAULT_T_GRID,
                          samples: int = 10 ** 5, seed: int = 0,
                          quad: QuadratureSpec = THEORY_QUAD) -> TheoryCheckReport:
    """Evaluate Phi(K^t) - Phi(K^0) against the gain G(t) on a grid of t.

    ``t_grid`` may be the string "auto" (see :func:`auto_t_grid`).
    Inadmissible grid points are skipped with a note.  G is evaluated at
    every admissible point; Phi(K^t) only where K^t can be resolved, NaN
    otherwise.  With ``samples`` > 0 the partition bounds are also sampled
    at each grid point.
    """
    const = scenario.constants
    n, k = scenario.n, scenario.k
    surface = ball_constants(n).surface
    Objective(scenario.measure, scenario.p, quad)  # validates p and spanning
    if isinstance(t_grid, str):
        if t_grid != "auto":
            raise ValidationError(f"unknown t grid {t_grid!r}")
        t_grid = auto_t_grid(scenario)
    e0 = limit_entropy(scenario, quad)
    phi0 = limit_phi(scenario, quad)

    report = TheoryCheckReport(c_f=const.c_f, delta0=const.delta0, R=scenario.R, p=scenario.p, k=k,
                               t_grid=[], g1=[], g2=[], G=[], lhs=[], entropy_gap=[], partition=[])
    for t in sorted(float(x) for x in t_grid):
        if not is_admissible(scenario, t):
            report.skipped.append((t, "inadmissible: arccos(c_f t/R) <= pi/2 - delta0 or t outside (0,1)"))
            continue
        gains = gain_functions(scenario, t)
        report.t_grid.append(t)
        report.g1.append(gains.g1)
        report.g2.append(gains.g2)
        report.G.append(gains.G)
        try:
            Kt = build_perturbation(scenario, t)
        except Unresolvable as exc:
            report.skipped.append((t, f"Phi not evaluated: {exc}"))
            report.lhs.append(math.nan)
            report.entropy_gap.append(math.nan)
        else:
            et = entropy(Kt, quad)
            mass = -math.log(2.0 * float(np.sum(Kt.radii ** (-scenario.p) * scenario.measure.weights)))
            report.lhs.append(et / surface + mass / scenario.p - phi0)
            report.entropy_gap.append(et - e0)
        if samples > 0:
            report.partition.append(partition_check(scenario, t, samples, seed))

    G = np.array(report.G)
    lhs = np.array(report.lhs)
    gap = np.array(report.entropy_gap)
    seen = np.isfinite(lhs)
    weight = sphere_factor(k, n) * surface
    diffs = np.diff(G)[:3]
    report.verdicts = {
        "lower_bound": bool(seen.any() and np.all(lhs[seen] >= G[seen] - BOUND_SLACK)),
        "entropy_bound": bool(seen.any() and np.all(gap[seen] >= weight * np.array(report.g1)[seen] - BOUND_SLACK)),
        "G_positive": bool(np.any(G > 0.0)),
        "G_increasing": bool(len(diffs) > 0 and np.all(diffs > 0.0)),
        "g1_bound": all(abs(g) <= g1_bound(scenario, t)
                        for g, t in zip(report.g1, report.t_grid) if t <= math.sqrt(3) / 2),
    }
    if samples > 0:
        report.verdicts["partition"] = all(pv.verdict for pv in report.partition)
    return report
