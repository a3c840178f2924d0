"""Maximization of the entropy functional over polytopes with prescribed rays.

For an even discrete measure mu = sum_i mu_i (delta_{u_i} + delta_{-u_i})
and -1 < p < 0, the functional

    Phi(Q) = E(Q) / (n omega_n) - (1/p) log(2 sum_i rho_Q(u_i)^(-p) mu_i)

is invariant under dilation.  Its maximizer K over the polytopes
conv{±rho_i u_i} satisfies mu = J_p(cK, .) for the scale c returned by
:func:`recover_scale`.  In the coordinates t_i = log rho_i the gradient is

    dPhi/dt_i = -2 J_i / (n omega_n) + rho_i^(-p) mu_i / sum_j rho_j^(-p) mu_j,

the normalized mismatch between the curvature and the weights.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvatureResult, check_p, integral_curvature, lp_curvature, spanning_check
from .entropy import DEFAULT_QUAD, QuadratureSpec, ball_constants, entropy
from .errors import DegenerateHull, DegenerateInput, EmptyCurvature, ValidationError
from .geometry import DiscreteEvenMeasure, SymmetricPolytope, build_polytope

log = logging.getLogger(__name__)

COLLAPSE_RATIO = 1e-6
ARMIJO = 1e-4
SHRINK = 0.5
MIN_STEP = 1e-14
# below this predicted gain, Phi differences are dominated by rounding
PHI_NOISE = 1e-12

CONVERGED = "converged"
MAX_ITERS = "max_iters"
DEGENERATE_INPUT = "degenerate_input"


@dataclass(frozen=True)
class Objective:
    measure: DiscreteEvenMeasure
    p: float
    quad: QuadratureSpec = DEFAULT_QUAD

    def __post_init__(self):
        check_p(self.p)
        if not spanning_check(self.measure):
            raise DegenerateInput("measure is concentrated on a great subsphere")

    @property
    def surface(self) -> float:
        return ball_constants(self.measure.n).surface


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    multistarts: int = 8
    seed: int = 0
    escape_t: float = 0.1
    threads: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or self.multistarts < 1:
            raise ValidationError("max_iters and multistarts must be positive")
        if not self.grad_tol >= 1e-12:
            raise ValidationError("grad_tol must be >= 1e-12")
        if not 0.0 < self.escape_t <= 0.5:
            raise ValidationError("escape_t must lie in (0, 0.5]")


@dataclass(frozen=True)
class Evaluation:
    polytope: SymmetricPolytope
    J: np.ndarray
    phi: float
    grad: np.ndarray


def _mass_term(objective: Objective, radii: np.ndarray) -> tuple[float, np.ndarray]:
    p = objective.p
    w = radii ** (-p) * objective.measure.weights
    return -math.log(2.0 * float(np.sum(w))) / p, w / np.sum(w)


def evaluate(objective: Objective, radii) -> Evaluation:
    """Phi, its log-radius gradient, and the underlying polytope in one pass."""
    P = build_polytope(objective.measure, radii)
    J = integral_curvature(P)
    mass, share = _mass_term(objective, P.radii)
    value = entropy(P, objective.quad) / objective.surface + mass
    grad = -2.0 * J / objective.surface + share
    return Evaluation(polytope=P, J=J, phi=value, grad=grad)


def phi(objective: Objective, radii) -> float:
    return evaluate(objective, radii).phi


def phi_gradient(objective: Objective, radii) -> np.ndarray:
    """dPhi/d(log rho_i) at the canonical radii.  For an absorbed atom the
    curvature term vanishes and the component is the positive weight share."""
    P = build_polytope(objective.measure, radii)
    _, share = _mass_term(objective, P.radii)
    return -2.0 * integral_curvature(P) / objective.surface + share


@dataclass
class RunResult:
    start: int
    log_radii: np.ndarray
    evaluation: Evaluation
    trace: list[float]
    status: str
    iterations: int
    escapes: int = 0


def _normalized(t: np.ndarray) -> np.ndarray:
    return t - np.max(t)


def _canonical_log(ev: Evaluation) -> np.ndarray:
    return _normalized(np.log(ev.polytope.radii))


def _escape(objective: Objective, t: np.ndarray, ev: Evaluation, opts: SolveOptions):
    """Lift collapsed coordinates to a common small level; keep only if Phi grows."""
    collapsed = t < math.log(COLLAPSE_RATIO)
    level = opts.escape_t
    for _ in range(40):
        trial = t.copy()
        trial[collapsed] = math.log(level)
        try:
            cand = evaluate(objective, np.exp(trial))
        except DegenerateHull:
            cand = None
        if cand is not None and cand.phi > ev.phi:
            return _canonical_log(cand), cand
        level *= 0.5
    return None


class _Memory:
    """Limited-memory BFGS curvature pairs for the concave ascent problem.

    Pairs are stored for -Phi so the two-loop recursion applies unchanged.
    Steps are projected off the dilation direction, along which Phi is flat.
    """

    def __init__(self, size: int = 10):
        self.size = size
        self.pairs: list[tuple[np.ndarray, np.ndarray, float]] = []

    def update(self, s: np.ndarray, y: np.ndarray) -> None:
        s = s - s.mean()
        sy = float(s @ y)
        if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            return
        self.pairs.append((s, y, 1.0 / sy))
        if len(self.pairs) > self.size:
            self.pairs.pop(0)

    def direction(self, g: np.ndarray) -> np.ndarray:
        """Ascent direction for gradient ``g`` of Phi."""
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= float(s @ y) / float(y @ y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return q


def _ascend(objective: Objective, t0: np.ndarray, opts: SolveOptions, start: int) -> RunResult:
    ev = evaluate(objective, np.exp(_normalized(t0)))
    t = _canonical_log(ev)
    trace = [ev.phi]
    escapes = 0
    status = MAX_ITERS
    memory = _Memory()
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = ev.grad
        if np.max(np.abs(g)) <= opts.grad_tol:
            status = CONVERGED
            break
        if np.min(t) < math.log(COLLAPSE_RATIO):
            lifted = _escape(objective, t, ev, opts)
            if lifted is not None:
                t, ev = lifted
                trace.append(ev.phi)
                escapes += 1
                memory = _Memory()
                continue
        d = memory.direction(g)
        slope = float(g @ d)
        if slope <= 0.0:
            memory = _Memory()
            d, slope = g, float(g @ g)
        step = 1.0
        accepted = None
        while step >= MIN_STEP:
            trial = _normalized(t + step * d)
            try:
                cand = evaluate(objective, np.exp(trial))
            except DegenerateHull:
                step *= SHRINK
                continue
            gain = ARMIJO * step * slope
            if gain > PHI_NOISE:
                ok = cand.phi >= ev.phi + gain
            else:
                # Phi differences are below rounding; the exact gradient
                # decides: the slope along d must still be positive.
                ok = float(cand.grad @ d) >= 0.0 and cand.phi >= ev.phi - PHI_NOISE
            if ok:
                accepted = cand
                break
            step *= SHRINK
        if accepted is None:
            if memory.pairs:
                memory = _Memory()
                continue
            log.debug("start %d: line search stalled at iteration %d", start, it)
            break
        t_new = _canonical_log(accepted)
        memory.update(t_new - t, g - accepted.grad)
        ev, t = accepted, t_new
        trace.append(ev.phi)
    else:
        if np.max(np.abs(ev.grad)) <= opts.grad_tol:
            status = CONVERGED
    return RunResult(start=start, log_radii=t, evaluation=ev, trace=trace, status=status,
                     iterations=it, escapes=escapes)


@dataclass(frozen=True)
class VerifyReport:
    residuals: np.ndarray
    max_residual: float
    passed: bool
    total_J: float
    surface: float
    tol: float


@dataclass
class SolveReport:
    radii: np.ndarray
    scale: float
    phi: float
    phi_trace: list[float]
    grad_norm: float
    residuals: np.ndarray
    status: str
    curvature: CurvatureResult
    polytope: SymmetricPolytope
    iterations: int
    start: int
    optima: list[dict] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def recover_scale(P: SymmetricPolytope, measure: DiscreteEvenMeasure, p: float,
                  curvature: CurvatureResult | None = None) -> float:
    """The dilation c with |J_p(cK, .)| = |mu|, using J_p(cK) = c^p J_p(K)."""
    curvature = curvature or lp_curvature(P, p)
    if curvature.total_Jp <= 0.0:
        raise EmptyCurvature("polytope has no curvature on the support of mu")
    return (measure.total_mass / curvature.total_Jp) ** (1.0 / p)


def verify(P: SymmetricPolytope, c: float, measure: DiscreteEvenMeasure, p: float,
           tol: float = 1e-3, curvature: CurvatureResult | None = None) -> VerifyReport:
    """Relative residuals |c^p Jp_i - mu_i| / mu_i of the equation mu = J_p(cK, .)."""
    curvature = curvature or lp_curvature(P, p)
    residuals = np.abs(c ** p * curvature.Jp - measure.weights) / measure.weights
    worst = float(np.max(residuals))
    return VerifyReport(residuals=residuals, max_residual=worst, passed=bool(worst <= tol),
                        total_J=curvature.total_J, surface=ball_constants(P.n).surface, tol=tol)


def starting_points(objective: Objective, opts: SolveOptions) -> list[np.ndarray]:
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.multistarts)
    N = objective.measure.size
    return [np.random.Generator(np.random.Philox(s)).uniform(-2.0, 0.0, N) for s in seeds]


def maximize_phi(objective: Objective, opts: SolveOptions | None = None) -> SolveReport:
    opts = opts or SolveOptions()
    if not spanning_check(objective.measure):
        raise DegenerateInput("measure is concentrated on a great subsphere")
    starts = starting_points(objective, opts)
    jobs = [(objective, t0, opts, k) for k, t0 in enumerate(starts)]
    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            runs = list(pool.map(lambda job: _ascend(*job), jobs))
    else:
        runs = [_ascend(*job) for job in jobs]

    best = max(runs, key=lambda r: (r.evaluation.phi, -r.start))
    optima = []
    for r in runs:
        if all(abs(r.evaluation.phi - o["phi"]) > 1e-8 for o in optima):
            optima.append({"start": r.start, "phi": r.evaluation.phi, "status": r.status,
                           "radii": np.exp(r.log_radii)})

    ev = best.evaluation
    P = ev.polytope
    curv = lp_curvature(P, objective.p, J=ev.J)
    c = recover_scale(P, objective.measure, objective.p, curv)
    report = verify(P, c, objective.measure, objective.p, curvature=curv)
    return SolveReport(radii=np.array(P.radii), scale=c, phi=ev.phi, phi_trace=best.trace,
                       grad_norm=float(np.max(np.abs(ev.grad))), residuals=report.residuals,
                       status=best.status, curvature=curv, polytope=P, iterations=best.iterations,
                       start=best.start, optima=optima if len(optima) > 1 else [])
