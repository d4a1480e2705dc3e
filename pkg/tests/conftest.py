from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from cplvolt import SystemData

INPUTS = Path(__file__).resolve().parent.parent / "inputs"

# RLC two-port benchmark
E, R1, R2 = 24.0, 0.04, 0.06
RLC_A = np.array([[1 / R2 + 1 / R1, -1 / R2], [-1 / R2, 1 / R2]])
RLC_W = np.array([E / R1, 0.0])

# HVDC benchmark: line resistances (Ohm), shunt conductances (S), E (V), P (W)
HVDC_R = np.array([0.9576, 1.4365, 1.9153, 1.9153, 0.9576])
HVDC_GAMMA = np.array([0.02290, 0.02290, 0.3435]) * 1e-6
HVDC_E = 400e3
HVDC_P = np.array([-160.0, 140.0, -180.0]) * 1e6
HVDC_BV = np.array([[-1, -1, -1, 0, 0]])
HVDC_BP = np.array([[0, 0, 1, 0, 1], [1, 0, 0, -1, 0], [0, 1, 0, 1, -1]])


def rlc_system(b) -> SystemData:
    return SystemData(RLC_A, b, RLC_W)


def hvdc_system() -> SystemData:
    r = HVDC_R
    g = HVDC_GAMMA
    # matrix as displayed for the benchmark network, entry by entry
    A = np.array([
        [g[0] + 1 / r[2] + 1 / r[4], 0.0, -1 / r[4]],
        [0.0, g[1] + 1 / r[0] + 1 / r[3], -1 / r[3]],
        [-1 / r[4], -1 / r[3], g[2] + 1 / r[1] + 1 / r[3] + 1 / r[4]],
    ])
    w = HVDC_E / np.array([r[2], r[0], r[1]])
    return SystemData(A, HVDC_P, w)


def _nonzero_b(rng, size, lo=-5.0, hi=5.0, floor=0.05):
    b = rng.uniform(lo, hi, size=size)
    return np.where(np.abs(b) < floor, np.where(b < 0, -floor, floor), b)


def random_system_2d(rng) -> SystemData:
    c = rng.uniform(0.1, 2.0)
    d = c + rng.uniform(0.05, 3.0, size=2)
    A = np.array([[d[0], -c], [-c, d[1]]])
    return SystemData(A, _nonzero_b(rng, 2), rng.uniform(-2.0, 6.0, size=2))


def random_system(rng, n=None) -> SystemData:
    """Random data satisfying the structural assumptions (diagonally dominant
    Stieltjes matrix, nonzero b)."""
    n = int(rng.integers(1, 6)) if n is None else n
    off = -rng.uniform(0.0, 2.0, size=(n, n)) * (rng.random((n, n)) < 0.6)
    off = np.triu(off, 1)
    off = off + off.T
    A = off + np.diag(np.abs(off).sum(axis=1) + rng.uniform(0.05, 3.0, size=n))
    return SystemData(A, _nonzero_b(rng, n), rng.uniform(-2.0, 6.0, size=n))


def quartic_equilibria(sys: SystemData):
    """All positive equilibria of a coupled two-node system, by elimination.

    From the first equation x2 = p(x1) / x1 with p quadratic; substituting in
    the second and clearing denominators leaves a quartic in x1.
    """
    (a11, a12), (a21, a22) = sys.A
    b1, b2 = sys.b
    w1, w2 = sys.w
    assert a12 != 0
    p = Polynomial([-b1, w1, -a11]) / float(a12)
    x = Polynomial([0.0, 1.0])
    quartic = -float(a21) * p * x * x - float(a22) * p * p - float(b2) * x * x + float(w2) * p * x
    out = []
    for r in quartic.roots():
        if abs(r.imag) <= 1e-7 * max(1.0, abs(r)) and r.real > 0:
            x1 = r.real
            x2 = p(x1) / x1
            if x2 > 0:
                out.append(np.array([x1, x2]))
    return out


@pytest.fixture
def rlc_feasible():
    return rlc_system([500.0, 450.0])


@pytest.fixture
def rlc_infeasible():
    return rlc_system([3000.0, 1000.0])


@pytest.fixture
def hvdc():
    return hvdc_system()


@pytest.fixture
def sym2():
    return SystemData([[2.0, -1.0], [-1.0, 2.0]], [1.0, 1.0], [3.0, 3.0])


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    def record(number, ok, detail=""):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


def oracle_agreeing(sys: SystemData, exists: bool, density: int = 400, retries: int = 2):
    """Grid oracle, re-run at doubled density while it disagrees on existence."""
    from cplvolt.oracle import enumerate_equilibria
    eq = enumerate_equilibria(sys, density)
    for _ in range(retries):
        if eq.exists == exists or eq.exhaustive:
            break
        density *= 2
        eq = enumerate_equilibria(sys, density)
    return eq
