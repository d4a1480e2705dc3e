import math

import numpy as np
import pytest

from cplvolt import (DOMINANT, INCONCLUSIVE, NONE, IntegrationOptions, RefinementError,
                     SystemData, ValidationError, build_characteristic_seed, classify,
                     eval_rhs, integrate_characteristic, integrate_on_grid,
                     refine_equilibrium)
from cplvolt.oracle import enumerate_equilibria

from conftest import random_system, random_system_2d, rlc_system

GOLDEN = (3 + math.sqrt(5)) / 2


def test_rlc_characteristic_solution_converges():
    sys = rlc_system([500.0, 450.0])
    traj, raw = integrate_characteristic(sys, [25.01, 25.77])
    assert raw.kind == "converged"
    assert raw.state == pytest.approx([22.24, 20.95], abs=0.01)
    assert traj.events[-1][1] == "converged"


def test_rlc_characteristic_solution_collapses_second_node():
    sys = rlc_system([3000.0, 1000.0])
    traj, raw = integrate_characteristic(sys, [25.01, 25.77])
    assert raw.kind == "collapsed"
    assert raw.indices == (1,)
    assert 0 < raw.time < math.inf
    assert raw.state[1] < 1e-6 * 25.77


def test_scalar_without_roots_collapses():
    # x^2 + 1 has no real root
    sys = SystemData([[1.0]], [1.0], [0.0])
    _, raw = integrate_characteristic(sys, [1.0])
    assert raw.kind == "collapsed" and raw.indices == (0,)
    # x' = -x - 1/x gives x^2 = (1 + x0^2) e^{-2t} - 1, zero at t = ln(2)/2
    assert raw.time == pytest.approx(math.log(2) / 2, rel=1e-3)


def test_rejects_non_characteristic_start(sym2):
    with pytest.raises(ValueError):
        integrate_characteristic(sym2, [1.0, 1.0])
    _, raw = integrate_characteristic(sym2, [1.0, 1.0], check_start=False)
    assert raw.kind == "converged"


def test_trajectory_shape_and_monotone_decay():
    sys = rlc_system([500.0, 450.0])
    seed = build_characteristic_seed(sys)
    traj, _ = integrate_characteristic(sys, seed.x0)
    t = traj.t
    X = traj.x
    assert np.all(np.diff(t) > 0)
    assert np.all(np.diff(X, axis=0) <= 1e-9 * np.max(seed.x0))
    assert all(traj.derivative_negative[:-1])
    assert traj.min_coordinate.shape == t.shape


def test_trajectory_csv():
    sys = SystemData([[1.0]], [-1.0], [0.0])
    traj, _ = integrate_characteristic(sys, [1.05])
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x1"
    assert len(lines) == len(traj.times) + 1
    t, x = map(float, lines[1].split(","))
    assert (t, x) == (0.0, 1.05)


def test_refine_symmetric_example(sym2):
    x = refine_equilibrium(sym2, [2.62, 2.62])
    assert x == pytest.approx([GOLDEN, GOLDEN], rel=1e-14)


def test_refine_fixed_point(sym2):
    x0 = np.array([GOLDEN, GOLDEN])
    assert refine_equilibrium(sym2, x0) == pytest.approx(x0, rel=1e-14)


def test_refine_rlc_reference_point():
    sys = rlc_system([500.0, 450.0])
    x = refine_equilibrium(sys, [22.24, 20.95])
    assert np.max(np.abs(eval_rhs(sys, x))) <= 1e-9 * sys.scale
    assert x == pytest.approx([22.24, 20.95], abs=0.01)


def test_refine_fails_without_root():
    with pytest.raises(RefinementError):
        refine_equilibrium(SystemData([[1.0]], [1.0], [0.0]), [1.0])


def test_classify_rlc(rlc_feasible, rlc_infeasible):
    out = classify(rlc_feasible)
    assert out.kind == DOMINANT
    assert out.x_max == pytest.approx([22.24, 20.95], abs=0.01)
    assert out.stability.long_term_stable
    assert out.stability.unique_stable is True
    out = classify(rlc_infeasible)
    assert out.kind == NONE
    assert out.collapsed == (1,)
    assert out.to_dict()["collapsed"] == [2]


def test_classify_hvdc(hvdc):
    out = classify(hvdc)
    assert out.kind == DOMINANT
    assert out.x_max / 1e5 == pytest.approx([4.0054, 3.9991, 4.0043], abs=5e-4)
    assert out.seed.margin > 0
    assert out.stability.unique_stable is None   # mixed-sign powers


def test_classify_rejects_invalid():
    with pytest.raises(ValidationError):
        classify(SystemData([[1.0, -1.0], [-1.0, 1.0]], [1.0, 1.0], [1.0, 1.0]))


def test_classify_carries_zero_b_warning():
    out = classify(SystemData([[2.0, -1.0], [-1.0, 2.0]], [0.0, 1.0], [3.0, 3.0]))
    assert out.kind == DOMINANT
    assert any("b_nonzero" in w for w in out.warnings)


def test_budget_exhaustion_is_inconclusive(rlc_feasible):
    out = classify(rlc_feasible, IntegrationOptions(max_steps=5))
    assert out.kind == INCONCLUSIVE
    assert out.reason == "budget_exhausted"
    assert out.last_state is not None


def test_double_root_is_inconclusive():
    out = classify(SystemData([[1.0]], [1.0], [2.0]))
    assert out.kind == INCONCLUSIVE
    assert out.non_hyperbolic_suspect
    assert out.last_state == pytest.approx([1.0], abs=1e-6)


@pytest.mark.parametrize("field", ["rel_tol", "abs_tol", "collapse_threshold",
                                   "converge_tol", "max_time", "max_steps"])
def test_options_must_be_positive(field):
    with pytest.raises(ValueError):
        IntegrationOptions(**{field: 0})


def test_grid_integration_hits_grid_points(sym2):
    times = np.linspace(0.0, 3.0, 13)
    X = integrate_on_grid(sym2, [1.0, 2.0], times)
    assert X.shape == (13, 2)
    assert np.all(np.isfinite(X))
    assert X[0] == pytest.approx([1.0, 2.0])
    # agrees with free-running integration at its final time
    traj, _ = integrate_characteristic(sym2, [1.0, 2.0], IntegrationOptions(max_time=3.0),
                                       check_start=False)
    assert traj.times[-1] == pytest.approx(3.0)
    assert X[-1] == pytest.approx(traj.states[-1], rel=1e-7)


def test_grid_integration_scalar_closed_form():
    # x' = -x + 1/x (a=1, b=-1, w=0): x^2 = 1 + (x0^2 - 1) e^{-2t}
    sys = SystemData([[1.0]], [-1.0], [0.0])
    times = np.linspace(0.0, 4.0, 9)
    X = integrate_on_grid(sys, [3.0], times)
    exact = np.sqrt(1 + 8 * np.exp(-2 * times))
    assert X[:, 0] == pytest.approx(exact, rel=1e-7)


def test_grid_integration_after_collapse_is_nan():
    sys = SystemData([[1.0]], [1.0], [0.0])
    X = integrate_on_grid(sys, [1.0], [0.0, 0.2, 0.5, 1.0])
    assert np.isfinite(X[1, 0]) and np.all(np.isnan(X[2:, 0]))


def test_monotone_comparison():
    rng = np.random.default_rng(11)
    times = np.linspace(0.0, 2.0, 21)
    for _ in range(30):
        sys = random_system(rng)
        xa = rng.uniform(0.2, 3.0, size=sys.n)
        xb = xa + rng.uniform(0.0, 1.0, size=sys.n) * (rng.random(sys.n) < 0.7)
        Xa = integrate_on_grid(sys, xa, times)
        Xb = integrate_on_grid(sys, xb, times)
        both = np.all(np.isfinite(Xa), axis=1) & np.all(np.isfinite(Xb), axis=1)
        assert np.all(Xa[both] <= Xb[both] + 1e-7 * max(1.0, xb.max()))


def test_seed_independence():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(40):
        sys = random_system(rng)
        s1 = build_characteristic_seed(sys)
        z2 = np.linalg.solve(sys.A, rng.uniform(0.2, 5.0, size=sys.n))
        s2 = build_characteristic_seed(sys, safety=1.7, z=z2)
        _, r1 = integrate_characteristic(sys, s1.x0)
        _, r2 = integrate_characteristic(sys, s2.x0)
        assert r1.kind == r2.kind
        if r1.kind == "converged":
            x1 = refine_equilibrium(sys, r1.state)
            x2 = refine_equilibrium(sys, r2.state)
            assert np.max(np.abs(x1 - x2) / x1) <= 10 * 1e-8
            checked += 1
    assert checked > 5


def test_right_attraction_and_collapse_sign():
    rng = np.random.default_rng(8)
    for _ in range(40):
        sys = random_system(rng)
        out = classify(sys)
        if out.kind == DOMINANT:
            _, raw = integrate_characteristic(sys, 1.5 * out.x_max, check_start=False)
            assert raw.kind == "converged"
            assert refine_equilibrium(sys, raw.state) == pytest.approx(out.x_max, rel=1e-9)
        elif out.kind == NONE:
            assert all(sys.b[i] > 0 for i in out.collapsed)


def test_dominance_over_oracle_points():
    rng = np.random.default_rng(21)
    for k in range(60):
        sys = random_system_2d(rng) if k % 3 else random_system(rng, n=1)
        out = classify(sys)
        eq = enumerate_equilibria(sys)
        assert (out.kind == DOMINANT) == eq.exists
        for p, _ in eq.points:
            assert np.all(out.x_max >= p * (1 - 1e-9))
