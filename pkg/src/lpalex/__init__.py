"""Discrete L_p Aleksandrov problem for -1 < p < 0 in dimensions 2 and 3.

Given an even discrete measure mu on the sphere, find an origin-symmetric
polytope K with vertices on the rays of mu and a scale c with
J_p(cK, .) = mu, by maximizing an entropy functional over the radii.
"""
__version__ = "0.1.0"

from .curvature import (CurvatureResult, integral_curvature, lp_curvature, mc_curvature_oracle,
                        spanning_check)
from .entropy import QuadratureSpec, ball_constants, entropy, entropy_gradient
from .errors import (DegenerateHull, DegenerateInput, DimensionUnsupported, EmptyCurvature,
                     InadmissibleT, InvalidP, LpAlexError, ParseError, QuadratureNotConverged,
                     SpanningViolated, Unresolvable, ValidationError)
from .geometry import (DiscreteEvenMeasure, NormalCone, SymmetricPolytope, build_polytope, normal_fan,
                       radial, support)
from .solver import (Objective, SolveOptions, SolveReport, maximize_phi, phi, phi_gradient,
                     recover_scale, verify)
from .theory import (SubspaceScenario, TheoryCheckReport, build_perturbation, degeneracy_gain_check,
                     gain_functions, lower_bound_constants, partition_check)

__all__ = [
    "CurvatureResult", "DegenerateHull", "DegenerateInput", "DimensionUnsupported",
    "DiscreteEvenMeasure", "EmptyCurvature", "InadmissibleT", "InvalidP", "LpAlexError",
    "NormalCone", "Objective", "ParseError", "QuadratureNotConverged", "QuadratureSpec",
    "SolveOptions", "SolveReport", "SpanningViolated", "SubspaceScenario", "SymmetricPolytope",
    "TheoryCheckReport", "Unresolvable", "ValidationError", "ball_constants", "build_perturbation",
    "build_polytope", "degeneracy_gain_check", "entropy", "entropy_gradient", "gain_functions",
    "integral_curvature", "lower_bound_constants", "lp_curvature", "maximize_phi",
    "mc_curvature_oracle", "normal_fan", "partition_check", "phi", "phi_gradient", "radial",
    "recover_scale", "spanning_check", "support", "verify",
]
