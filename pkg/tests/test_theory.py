import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SQ3, make_rng, random_scenario
from lpalex.entropy import QuadratureSpec, entropy
from lpalex.errors import InadmissibleT, Unresolvable, ValidationError
from lpalex.geometry import DiscreteEvenMeasure, build_polytope
from lpalex.theory import (DEFAULT_T_GRID, RESOLUTION_FLOOR, SubspaceScenario, admissible_t_bound,
                           auto_t_grid, build_perturbation, degeneracy_gain_check, g1_bound,
                           gain_functions, gain_peak, is_admissible, limit_entropy,
                           lower_bound_constants, partition_check, perturbation_radii)
from oracles import dense_f_min, richardson_limit_entropy


def scenario_3d_line():
    d = np.array([[1.0, 0, 0], [1, 1, 1] / np.float64(SQ3), [1, -1, 1] / np.float64(SQ3)])
    return SubspaceScenario(DiscreteEvenMeasure.from_atoms(d, [1, 1, 1]), 1, np.array([1.0]), 1.0, -0.5)


def test_rhombus_constants(rhombus):
    c = rhombus.constants
    assert c.c_f == 0.5
    # f(v) = sin(phi) >= 1/2 exactly when phi >= pi/6
    assert c.delta0 == pytest.approx(math.pi / 3, abs=1e-8)


def test_plane_with_normal_atom():
    m = DiscreteEvenMeasure.from_atoms(np.eye(3), [1, 1, 1])
    sc = SubspaceScenario.normalized(m, 2, [1.0, 1.0], -0.5)
    assert sc.k == 2
    assert sc.constants.c_f == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(sc.radii, math.sqrt(2))


def test_constants_against_dense_grid():
    sc = scenario_3d_line()
    c = lower_bound_constants(sc)
    assert c.c_f == pytest.approx(0.5 * dense_f_min(sc.basis, sc.perp_basis, sc.outside, 0.0), abs=1e-6)
    assert 0.0 < c.c_f < 1.0 and 0.0 < c.delta0 < math.pi / 2
    # f >= c_f really holds on the claimed region (up to the 1e-3 rad grid)
    assert dense_f_min(sc.basis, sc.perp_basis, sc.outside, c.delta0, step=2e-3) >= c.c_f - 2e-3
    # and delta0 is close to the best possible
    assert dense_f_min(sc.basis, sc.perp_basis, sc.outside, c.delta0 + 1e-2, step=2e-3) < c.c_f


def test_admissibility_bound():
    assert admissible_t_bound(0.5, 1.0, 0.3) == pytest.approx(2 * math.sin(0.3), abs=1e-15)
    assert 2 * math.sin(0.3) == pytest.approx(0.5910, abs=1e-4)


def test_inadmissible_and_unresolvable_t(rhombus):
    assert not is_admissible(rhombus, 1.0)
    with pytest.raises(InadmissibleT):
        gain_functions(rhombus, 1.5)
    with pytest.raises(Unresolvable):
        build_perturbation(rhombus, 0.1 * RESOLUTION_FLOOR)
    K0 = build_perturbation(rhombus, 0.0)
    assert K0.support(np.array([0.6, 0.8])) == pytest.approx(0.6)


def test_scenario_validation():
    m = DiscreteEvenMeasure.from_atoms(np.eye(2), [1, 1])
    with pytest.raises(ValidationError):
        SubspaceScenario(m, 1, np.array([0.5]), 1.0, -0.5)
    with pytest.raises(ValidationError):
        SubspaceScenario(m, 2, np.array([1.0, 1.0]), 1.0, -0.5)
    with pytest.raises(ValidationError):
        SubspaceScenario(m, 1, np.array([2.0]), 1.0, -0.5)


def test_partition_detects_swapped_bounds(rhombus):
    assert partition_check(rhombus, 0.3, 10 ** 4).verdict
    bad = partition_check(rhombus, 0.3, 10 ** 4, swap_bounds=True)
    assert not bad.verdict and bad.violations > 0


def test_g2_positive_and_bounded(rhombus):
    for t in DEFAULT_T_GRID:
        g = gain_functions(rhombus, t)
        assert g.g2 > 0.0
        # log(1 + x) <= x
        assert g.g2 <= rhombus.b * t ** (-rhombus.p) / (-rhombus.p * rhombus.a) * (1 + 1e-12)


def test_gains_vanish_at_zero(rhombus):
    prev = math.inf
    for t in (1e-2, 1e-4, 1e-6, 1e-8):
        g = gain_functions(rhombus, t)
        assert abs(g.g1) <= g1_bound(rhombus, t)
        assert abs(g.G) <= 2 * g1_bound(rhombus, t) + g.g2
        assert abs(g.G) < prev
        prev = abs(g.G)
    sc = SubspaceScenario(rhombus.measure, 1, np.array([1.0]), 1.0, -0.9)
    g = gain_functions(sc, 1e-6)
    assert max(abs(g.g1), abs(g.g2), abs(g.G)) <= 1e-3


def test_limit_entropy_rhombus(rhombus):
    # K^0 is the segment [-e1, e1], so E = -∫ log|cos| = 2 pi log 2
    assert limit_entropy(rhombus) == pytest.approx(2 * math.pi * math.log(2), abs=1e-12)


@pytest.mark.parametrize("n,k,seed", [(2, 1, 5), (3, 1, 3), (3, 2, 4)])
def test_limit_entropy_matches_extrapolation(n, k, seed):
    sc = random_scenario(make_rng(seed), n, k, -0.5)
    quad = QuadratureSpec(rel_tol=1e-12, max_subdivision=40)
    ref = richardson_limit_entropy(lambda e: entropy(build_polytope(sc.measure, perturbation_radii(sc, e)), quad))
    assert limit_entropy(sc) == pytest.approx(ref, abs=1e-9)


def test_auto_grid_reaches_the_positive_regime():
    m = DiscreteEvenMeasure.from_atoms(np.eye(2), [1, 1])
    sc = SubspaceScenario(m, 1, np.array([1.0]), 1.0, -0.9)
    assert all(gain_functions(sc, t).G < 0 for t in DEFAULT_T_GRID)
    peak = gain_peak(sc)
    assert peak is not None and peak < 1e-6
    grid = auto_t_grid(sc)
    assert set(DEFAULT_T_GRID) <= set(grid) and len(grid) == len(DEFAULT_T_GRID) + 4
    rep = degeneracy_gain_check(sc, "auto", samples=10 ** 4)
    assert rep.passed, rep.verdicts


@pytest.mark.parametrize("p", [-0.5, -0.9, -0.99])
def test_rhombus_passes_on_auto_grid(p):
    sc = SubspaceScenario(DiscreteEvenMeasure.from_atoms(np.eye(2), [1, 1]), 1, np.array([1.0]), 1.0, p)
    rep = degeneracy_gain_check(sc, "auto", samples=10 ** 4)
    assert rep.passed, rep.verdicts


def test_p_below_minus_one_loses_the_gain():
    sc = SubspaceScenario(DiscreteEvenMeasure.from_atoms(np.eye(2), [1, 1]), 1, np.array([1.0]), 1.0, -1.5)
    assert gain_peak(sc) is None
    rep = degeneracy_gain_check(sc, "auto", samples=10 ** 3)
    assert not rep.verdicts["G_positive"]
    assert not rep.passed


def test_unresolvable_points_are_reported():
    sc = SubspaceScenario(DiscreteEvenMeasure.from_atoms(np.eye(2), [1, 1]), 1, np.array([1.0]), 1.0, -0.99)
    rep = degeneracy_gain_check(sc, "auto", samples=0)
    assert any("not evaluated" in why for _, why in rep.skipped)
    assert np.isnan(rep.lhs[0]) and np.isfinite(rep.lhs[-1])


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), shape=st.sampled_from([(2, 1), (3, 1), (3, 2)]),
       p=st.sampled_from([-0.9, -0.5, -0.2]))
def test_partition_and_lower_bound_hold(seed, shape, p):
    sc = random_scenario(make_rng(seed), *shape, p)
    rep = degeneracy_gain_check(sc, "auto", samples=5000, seed=seed % 1000)
    assert rep.verdicts["partition"]
    assert rep.verdicts["lower_bound"]
    assert rep.verdicts["entropy_bound"]
