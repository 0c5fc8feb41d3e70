import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqcqp.certify import Verdict
from sqcqp.model import QuadForm, SQcqpProblem, load_problem
from sqcqp.relax import (
    RelaxationInfeasible,
    SocpView,
    build_sdp2,
    build_socp,
    cone_member,
    export_shor_sdp,
    read_sdpa,
    recover_and_check,
    relaxation_kkt_residuals,
    shor_sdpa_text,
    solve_and_certify,
    solve_relaxation,
)

from oracles import grid_min_1d, multistart_min, random_problem
from pathlib import Path

DATA = Path(__file__).parent / "data"


def gap_1d():
    return load_problem(DATA / "gap_1d.json")


def test_gap_1d_lift_structure():
    sdp = build_sdp2(gap_1d())
    x, y = np.array([0.3]), np.array([0.5])
    assert sdp.objective(x, y) == pytest.approx(-0.5 + 0.3)
    np.testing.assert_allclose(sdp.constraint_values(x, y), [0.5 - 1, -0.3])
    np.testing.assert_allclose(sdp.coupling(x, y), [0.09 - 0.5])


@given(st.integers(0, 10_000))
def test_lift_identity_on_feasible_points(seed):
    rng = np.random.default_rng(seed)
    P, p = random_problem(rng, 5, 2)
    sdp = build_sdp2(P)
    y = p * p
    assert sdp.objective(p, y) == pytest.approx(P.objective(p), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(sdp.constraint_values(p, y), P.constraint_values(p), rtol=1e-12, atol=1e-12)
    assert np.all(sdp.coupling(p, y) <= 0)


def test_socp_examples():
    t = SocpView.triples([1.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(t, [[1, 0, 1], [0.5, -0.5, 0], [0.5, -0.5, 1]])
    assert cone_member(t[0]) and cone_member(t[1]) and not cone_member(t[2])


@given(st.integers(0, 10_000))
def test_socp_matches_sdp2(seed):
    rng = np.random.default_rng(seed)
    P, _ = random_problem(rng, 4, 2)
    sdp, soc = build_sdp2(P), build_socp(P)
    x, y = rng.normal(size=4), rng.normal(size=4) + 1
    t = soc.triples(x, y)
    assert soc.objective(t) == pytest.approx(sdp.objective(x, y), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(soc.constraint_values(t), sdp.constraint_values(x, y), rtol=1e-12, atol=1e-12)
    assert all(cone_member(ti) for ti in t) == bool(np.all(y >= x * x))
    xb, yb = soc.untriple(t)
    np.testing.assert_allclose(xb, x)
    np.testing.assert_allclose(yb, y)


def test_sdpa_n1_hand_expansion():
    P = SQcqpProblem(QuadForm(2.0, [3.0], 5.0), [QuadForm(-1.0, [0.5], 4.0)])
    parsed = read_sdpa(shor_sdpa_text(P))
    assert parsed["mdim"] == 2 and parsed["blocks"] == [2, -1]
    assert parsed["costs"] == [6.0, 2.0]
    assert sorted(parsed["entries"]) == sorted([
        (0, 1, 1, 1, -1.0), (0, 2, 1, 1, 4.0),
        (1, 1, 1, 2, 1.0), (1, 2, 1, 1, -1.0),
        (2, 1, 2, 2, 1.0), (2, 2, 1, 1, 1.0),
    ])


def test_sdpa_roundtrip_multiset(tmp_path):
    rng = np.random.default_rng(0)
    P, _ = random_problem(rng, 3, 2)
    path = export_shor_sdp(P, tmp_path / "p.dat-s")
    text = path.read_text()
    parsed = read_sdpa(text)
    assert text.startswith("*")
    assert parsed["mdim"] == 3 + 6
    # every written value parses back unchanged
    written = [float(ln.split()[-1]) for ln in text.splitlines()[8:]]
    assert sorted(written) == sorted(e[-1] for e in parsed["entries"])


def _solve_sdpa_with_cvxpy(parsed):
    cp = pytest.importorskip("cvxpy")
    v = cp.Variable(parsed["mdim"])
    blocks = parsed["blocks"]
    mats = [[[0 for _ in range(abs(s))] for _ in range(abs(s))] for s in blocks]
    for mat, blk, i, j, val in parsed["entries"]:
        coef = -val if mat == 0 else val * v[mat - 1]
        cell = mats[blk - 1]
        cell[i - 1][j - 1] = cell[i - 1][j - 1] + coef
        if i != j:
            cell[j - 1][i - 1] = cell[j - 1][i - 1] + coef
    cons = []
    for s, m in zip(blocks, mats):
        M = cp.bmat([[c if not isinstance(c, int) else cp.Constant(0.0) for c in row] for row in m])
        if s > 0:
            cons.append((M + M.T) / 2 >> 0)
        else:
            cons += [M[k, k] >= 0 for k in range(-s)]
    prob = cp.Problem(cp.Minimize(np.array(parsed["costs"]) @ v), cons)
    prob.solve(solver="CLARABEL")
    return prob.value


def test_gap_1d_export_solves_externally(tmp_path):
    parsed = read_sdpa(export_shor_sdp(gap_1d(), tmp_path / "e.dat-s").read_text())
    assert _solve_sdpa_with_cvxpy(parsed) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_shor_sdp_equals_lifted_value(seed):
    P, _ = random_problem(np.random.default_rng(seed), 3, 2)
    sol = solve_relaxation(P)
    sdp_value = _solve_sdpa_with_cvxpy(read_sdpa(shor_sdpa_text(P))) + P.objective.c
    assert sol.objective_value == pytest.approx(sdp_value, abs=1e-5 * (1 + abs(sdp_value)))


def test_gap_1d_not_exact():
    P = gap_1d()
    _, sol = solve_and_certify(P)
    assert sol.objective_value == pytest.approx(-1.0, abs=1e-6)
    np.testing.assert_allclose([sol.x[0], sol.y[0]], [0, 1], atol=1e-6)
    assert not sol.exact
    assert sol.gap_vs_certified == pytest.approx(1.0, abs=1e-6)
    assert grid_min_1d(P, 0, 1, 1e-4) == pytest.approx(0.0, abs=1e-12)
    assert sol.nu == pytest.approx(-1 + sol.gamma @ P.a)


def test_convex_ball_exact():
    P = load_problem(DATA / "convex_ball.json")
    _, sol = solve_and_certify(P)
    assert sol.exact and sol.objective_value == pytest.approx(0, abs=1e-8)
    np.testing.assert_allclose(sol.x, 0, atol=1e-6)


def test_ball_complement_exact_on_sphere():
    P = load_problem(DATA / "ball_complement.json")
    _, sol = solve_and_certify(P)
    assert sol.exact
    assert sol.objective_value == pytest.approx(0.5, abs=1e-8)
    assert np.linalg.norm(sol.x_recovered) == pytest.approx(1.0, abs=1e-8)
    assert sol.certificate.verdict is Verdict.CERTIFIED_GLOBAL


def test_positive_multiplier_branch():
    P = SQcqpProblem(QuadForm(1, [-2.0, 0, 0], 0), [QuadForm(1, np.zeros(3), -1)]).with_slater(np.zeros(3))
    sol = recover_and_check(P, solve_relaxation(P))
    assert sol.nu > 0.5 and sol.exact and sol.recovery == "multiplier-positive"
    assert np.max(np.abs(sol.coupling_residuals)) < 1e-7


def test_infeasible_relaxation():
    P = SQcqpProblem(QuadForm(1, [0.0, 0.0], 0), [QuadForm(1, [0.0, 0.0], 1)])
    with pytest.raises(RelaxationInfeasible):
        solve_relaxation(P)


def test_unbounded_relaxation_reported():
    P = SQcqpProblem(QuadForm(-1, [0.0, 0.0, 0.0], 0), [QuadForm(0, [1.0, 0.0, 0.0], 0)])
    sol = recover_and_check(P, solve_relaxation(P))
    assert sol.objective_value == -np.inf and not sol.exact
    assert sol.to_dict()["value"] == "-inf"


@pytest.mark.parametrize("seed", range(8))
def test_lower_bound_small_instances(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 5))
    P, p = random_problem(rng, n, int(rng.integers(1, 3)), a_J=rng.normal())
    try:
        sol = solve_relaxation(P)
    except RelaxationInfeasible:
        pytest.fail("instance has a strictly feasible point by construction")
    best, _ = multistart_min(P, rng, starts=20, initial=[p])
    assert sol.objective_value <= best + 1e-7 * (1 + abs(best))


@pytest.mark.parametrize("seed", range(10))
def test_relaxation_kkt_residuals(seed):
    rng = np.random.default_rng(seed)
    P, _ = random_problem(rng, 6, 2)
    sol = solve_relaxation(P, tol_gap=1e-9)
    res = relaxation_kkt_residuals(P, sol)
    scale = 1 + np.abs(np.concatenate([P.B.ravel(), P.objective.b])).max()
    for key in ("y_stationarity", "x_stationarity", "primal"):
        assert res[key] <= 10 * 1e-9 * scale * (1 + np.abs(sol.x).max()), key
    assert res["complementarity"] <= 10 * 1e-9 * (P.n + P.m)
