"""Aleksandrov integral curvature of symmetric polytopes.

Values are reported per stored atom u_i; the antipode -u_i carries the same
value, so totals over the full support double the per-atom sums.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .entropy import ball_constants
from .errors import InvalidP
from .geometry import DiscreteEvenMeasure, SymmetricPolytope, direction_rank, normal_fan


@dataclass(frozen=True)
class CurvatureResult:
    J: np.ndarray
    Jp: np.ndarray
    p: float
    in_range: bool = True

    @property
    def total_J(self) -> float:
        """J over the full ± support (n omega_n for a valid polytope)."""
        return 2.0 * float(np.sum(self.J))

    @property
    def total_Jp(self) -> float:
        return 2.0 * float(np.sum(self.Jp))


def integral_curvature(P: SymmetricPolytope) -> np.ndarray:
    return np.array([cone.area for cone in normal_fan(P)])


def check_p(p: float, strict: bool = False) -> bool:
    """True when p lies in (-1, 0).  Raise for p = 0, or for any
    out-of-range p when ``strict``."""
    p = float(p)
    if p == 0.0 or not np.isfinite(p):
        raise InvalidP(f"p must be finite and nonzero, got {p}")
    ok = -1.0 < p < 0.0
    if not ok and strict:
        raise InvalidP(f"p = {p} outside (-1, 0)")
    return ok


def lp_curvature(P: SymmetricPolytope, p: float, J: np.ndarray | None = None) -> CurvatureResult:
    in_range = check_p(p)
    if not in_range:
        warnings.warn(f"p = {p} is outside (-1, 0); no existence guarantee", stacklevel=2)
    if J is None:
        J = integral_curvature(P)
    Jp = np.where(J > 0, P.radii ** p * J, 0.0)
    return CurvatureResult(J=J, Jp=Jp, p=float(p), in_range=in_range)


@dataclass(frozen=True)
class MonteCarloEstimate:
    J: np.ndarray
    stderr: np.ndarray
    samples: int


def uniform_sphere(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    v = rng.standard_normal((size, n))
    return v / np.linalg.norm(v, axis=1)[:, None]


def mc_curvature_oracle(P: SymmetricPolytope, samples: int = 10 ** 6, seed: int = 0,
                        chunk: int = 1 << 16) -> MonteCarloEstimate:
    """Estimate per-atom J by assigning uniform directions to the vertex
    attaining the support function.

    Hits on u_i and -u_i are pooled, so the estimate for atom i is
    (n omega_n / 2) * hits_i / samples.
    """
    if samples < 10 ** 4:
        raise ValueError("samples must be at least 1e4")
    rng = np.random.Generator(np.random.Philox(seed))
    pts = P.points
    counts = np.zeros(P.size, dtype=np.int64)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        v = uniform_sphere(rng, m, P.n)
        winner = np.argmax(np.abs(v @ pts.T), axis=1)
        counts += np.bincount(winner, minlength=P.size)
        done += m
    half = ball_constants(P.n).surface / 2.0
    frac = counts / samples
    return MonteCarloEstimate(J=half * frac, stderr=half * np.sqrt(frac * (1 - frac) / samples),
                              samples=samples)


def spanning_check(measure: DiscreteEvenMeasure | np.ndarray) -> bool:
    directions = measure.directions if isinstance(measure, DiscreteEvenMeasure) else np.atleast_2d(measure)
    return direction_rank(directions) == directions.shape[1]
