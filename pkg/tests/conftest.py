import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lpalex.geometry import DiscreteEvenMeasure, build_polytope  # noqa: E402
from lpalex.theory import SubspaceScenario  # noqa: E402

SQ2 = math.sqrt(2.0)
SQ3 = math.sqrt(3.0)
CUBE_DIRS = np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]]) / SQ3


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str, elapsed: float) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}  [{elapsed:.1f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_directions(rng, N: int, n: int) -> np.ndarray:
    d = rng.standard_normal((N, n))
    return d / np.linalg.norm(d, axis=1)[:, None]


def random_measure(rng, n: int, N_max: int = 20, N_min: int | None = None) -> DiscreteEvenMeasure:
    while True:
        N = int(rng.integers(N_min or n + 1, N_max + 1))
        m = DiscreteEvenMeasure.from_atoms(random_directions(rng, N, n), rng.uniform(0.2, 2.0, N))
        if m.spans and m.merged == 0:
            return m


def random_polytope(rng, n: int, N_max: int = 12):
    while True:
        N = int(rng.integers(n, N_max + 1))
        d = random_directions(rng, N, n)
        if np.linalg.matrix_rank(d) < n:
            continue
        return build_polytope(d, np.exp(rng.uniform(-1.0, 1.0, N)))


def strict_vertex_polytope(rng, n: int, N_max: int = 10, margin: float = 1e-3):
    """Random polytope whose atoms are all vertices, away from absorption."""
    while True:
        N = int(rng.integers(n, N_max + 1))
        d = random_directions(rng, N, n)
        if np.linalg.matrix_rank(d) < n:
            continue
        radii = np.exp(rng.uniform(-0.3, 0.3, N))
        P = build_polytope(d, radii)
        if not P.is_vertex.all() or min(c.area for c in P.cones) < 1e-3:
            continue
        shrunk = [build_polytope(d, radii * np.where(np.arange(N) == i, 1 - margin, 1.0)) for i in range(N)]
        if all(Q.is_vertex.all() for Q in shrunk):
            return P


def random_scenario(rng, n: int, k: int, p: float) -> SubspaceScenario:
    while True:
        B = np.linalg.qr(rng.standard_normal((n, n)))[0]
        S = B[:, :k]
        s = 1 if k == 1 else int(rng.integers(2, 5))
        inside = (S @ rng.standard_normal((k, s))).T
        outside = rng.standard_normal((int(rng.integers(n - k, 6)), n))
        m = DiscreteEvenMeasure.from_atoms(np.vstack([inside, outside]), rng.uniform(0.2, 2.0, s + len(outside)))
        if m.size != s + len(outside) or not m.spans:
            continue
        perp = np.linalg.norm(outside - (outside @ S) @ S.T, axis=1) / np.linalg.norm(outside, axis=1)
        if np.min(perp) < 0.05:
            continue
        return SubspaceScenario.normalized(m, s, np.exp(rng.uniform(0.0, 1.0, s)), p)


@pytest.fixture
def cross2():
    return DiscreteEvenMeasure.from_atoms(np.eye(2), [math.pi / 2] * 2)


@pytest.fixture
def cube_measure():
    return DiscreteEvenMeasure.from_atoms(CUBE_DIRS, [math.pi / 2] * 4)


@pytest.fixture
def rhombus():
    m = DiscreteEvenMeasure.from_atoms(np.eye(2), [1.0, 1.0])
    return SubspaceScenario(m, 1, np.array([1.0]), 1.0, -0.5)
