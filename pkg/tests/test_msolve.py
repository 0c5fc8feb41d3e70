import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqcqp.certify import Verdict, verify_kkt
from sqcqp.model import ProblemFormatError
from sqcqp.msolve import (
    NoCandidate,
    P1Instance,
    load_p1,
    quadratic_roots,
    solve_both_active,
    solve_p1,
    solve_singleton,
)

from oracles import multistart_min, random_p1

E = np.eye(4)
Z = np.zeros(4)


def sphere_instance():
    return P1Instance.from_one_b(Z, [(-1, Z, 1), (1, Z, -9)])


def ball_instance():
    return P1Instance.from_one_b(Z, [(1, -4 * E[0], 3), (1, Z, -9)])


def linear_instance():
    return P1Instance.from_one_b(Z, [(0, E[0], 1), (0, E[1], 1)])


def test_sphere_case():
    sol = solve_p1(sphere_instance())
    assert sol.branch == "SingletonZeroW"
    np.testing.assert_allclose(sol.gamma, [0.5, 0], atol=1e-12)
    assert np.linalg.norm(sol.x) == pytest.approx(1.0, abs=1e-12)
    assert sol.objective == pytest.approx(0.5, abs=1e-12)
    assert sphere_instance().constraints[1](sol.x) == pytest.approx(-8)
    assert sol.certificate.verdict is Verdict.CERTIFIED_GLOBAL


def test_ball_case():
    sol = solve_p1(ball_instance())
    assert sol.branch == "SingletonPositiveW"
    np.testing.assert_allclose(sol.x, E[0], atol=1e-12)
    np.testing.assert_allclose(sol.gamma, [0.5, 0], atol=1e-12)
    cand = [c for c in sol.candidates if c.accepted][0]
    assert cand.w == pytest.approx(2.0, abs=1e-12)


def test_ball_case_quadratic_coefficients():
    # (4*3*1 - 16, 4*3 - 16, 3) = (-4, -4, 3): roots 1/2 and -3/2
    np.testing.assert_allclose(quadratic_roots(-4, -4, 3), [-1.5, 0.5])
    cands = solve_singleton(ball_instance(), 0)
    gammas = sorted(c.gamma[0] for c in cands)
    np.testing.assert_allclose(gammas, [-1.5, 0.5])
    assert [c.accepted for c in cands if c.gamma[0] < 0] == [False]


def test_half_space_singleton():
    inst = P1Instance.from_one_b(Z, [(0, 2 * E[0], 1), (1, Z, -9)])
    (cand,) = solve_singleton(inst, 0)
    assert cand.gamma[0] == pytest.approx(0.25)
    np.testing.assert_allclose(cand.x, -0.5 * E[0])
    assert inst.constraints[0](cand.x) == pytest.approx(0.0, abs=1e-15)
    assert cand.accepted


def test_both_linear_case():
    sol = solve_p1(linear_instance())
    assert sol.branch == "BothLinear"
    np.testing.assert_allclose(sol.x, [-1, -1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(sol.gamma, [1, 1], atol=1e-12)


def test_empty_branch():
    z = np.array([0.1, 0, 0, 0])
    sol = solve_p1(P1Instance.from_one_b(z, [(1, Z, -1), (0, E[0], -1)]))
    assert sol.branch == "Empty"
    np.testing.assert_array_equal(sol.x, z)
    np.testing.assert_array_equal(sol.gamma, [0, 0])


def test_swap_rule_relabels_back():
    rng = np.random.default_rng(4)
    b1, b2 = rng.normal(size=(2, 6))
    z = 3 * rng.normal(size=6)
    fwd = P1Instance.from_one_b(z, [(0.0, b1, 0.5), (1.0, b2, -2.0)])
    rev = P1Instance.from_one_b(z, [(1.0, b2, -2.0), (0.0, b1, 0.5)])
    for cf, cr in zip(solve_both_active(fwd), solve_both_active(rev)):
        np.testing.assert_allclose(cf.gamma, cr.gamma[::-1], atol=1e-12)
        if cf.x is not None:
            np.testing.assert_allclose(cf.x, cr.x, atol=1e-10)


def test_zero_constraint_rejected_with_diagnostic():
    inst = P1Instance.from_one_b(Z, [(0, Z, 1), (1, Z, -9)])
    (cand,) = solve_singleton(inst, 0)
    assert not cand.accepted and cand.reason


def test_no_candidate_raised():
    # 0 < -1 has no solution: nothing is feasible, every branch fails.
    inst = P1Instance.from_one_b(Z, [(0, Z, 1), (0, Z, 1)])
    with pytest.raises(NoCandidate) as info:
        solve_p1(inst, check_slater_point=False)
    assert info.value.candidates


def _both_active_instance(seed):
    """a = (-1, 1) with the optimum needing both constraints."""
    rng = np.random.default_rng(seed)
    while True:
        cons = [(-1.0, rng.normal(size=6), None), (1.0, rng.normal(size=6), None)]
        p = rng.normal(size=6)
        cons = [(a, b, -(a * p @ p + b @ p) - rng.uniform(0.1, 1)) for a, b, _ in cons]
        inst = P1Instance.from_one_b(3 * rng.normal(size=6), cons)
        if max(f(inst.z) for f in inst.constraints) <= 0:
            continue
        single = solve_singleton(inst, 0) + solve_singleton(inst, 1)
        if not any(c.accepted for c in single):
            return inst, p


@pytest.mark.parametrize("seed", range(5))
def test_general_both_active(seed):
    inst, p = _both_active_instance(seed)
    sol = solve_p1(inst)
    assert sol.branch == "BothActive"
    best, _ = multistart_min(inst.to_problem(), np.random.default_rng(seed), starts=60, initial=[p])
    assert sol.objective == pytest.approx(best, abs=1e-5)


@given(st.integers(0, 10_000))
def test_random_candidates_certify_and_are_optimal(seed):
    rng = np.random.default_rng(seed)
    inst, p = random_p1(rng)
    sol = solve_p1(inst, check_slater_point=False)
    P = inst.to_problem().with_slater(p)
    for c in sol.candidates:
        if c.accepted:
            assert verify_kkt(P, c.x, c.gamma, tol=1e-7).verdict is Verdict.CERTIFIED_GLOBAL
        if c.accepted and c.branch == "SingletonPositiveW":
            k = c.active[0]
            f = inst.constraints[k]
            assert abs(f(c.x)) <= 1e-9 * (1 + abs(inst.shifted_one_b()[k][2]))
        if c.accepted and c.branch == "SingletonZeroW":
            a, _, cc = inst.shifted_one_b()[c.active[0]]
            assert np.sum((c.x - inst.z) ** 2) == pytest.approx(-cc / a, rel=1e-10)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_quadratic_roots_are_roots(A, B, C):
    for r in quadratic_roots(A, B, C):
        scale = abs(A) * r * r + abs(B * r) + abs(C)
        assert abs(A * r * r + B * r + C) <= 1e-9 * (1 + scale)


def test_load_p1(tmp_path):
    inst = load_p1({"n": 4, "z": [0, 0, 0, 0], "constraints": [
        {"a": 1, "b": [-4, 0, 0, 0], "c": 3}, {"a": 1, "b": [0, 0, 0, 0], "c": -9}]})
    np.testing.assert_allclose(inst.constraints[0].b, [-2, 0, 0, 0])
    with pytest.raises(ProblemFormatError):
        load_p1({"n": 4, "z": [0, 0, 0, 0], "constraints": []})
    with pytest.raises(ProblemFormatError):
        load_p1({"n": 4, "z": [0, 0], "constraints": [{"a": 1, "b": [0] * 4, "c": 0}] * 2})


def test_both_active_with_one_linear_constraint():
    # Project z = (3, 3, 0, 0, 0) onto {||x||^2 <= 4, x_2 <= 1/2}: the answer
    # lies on the circle x_2 = 1/2, x_1 = sqrt(4 - 1/4).
    z = np.array([3.0, 3.0, 0, 0, 0])
    e2 = np.eye(5)[1]
    inst = P1Instance.from_one_b(z, [(1.0, np.zeros(5), -4.0), (0.0, e2, -0.5)])
    sol = solve_p1(inst)
    expected = np.array([np.sqrt(3.75), 0.5, 0, 0, 0])
    assert sol.branch == "BothActive"
    np.testing.assert_allclose(sol.x, expected, atol=1e-12)
    assert sol.objective == pytest.approx(0.5 * np.sum((z - expected) ** 2), abs=1e-12)
