"""Convex relaxations of scalar-identity QCQPs and exact-solution recovery.

With ``X = x x^T`` relaxed to a positive semidefinite lift, a diagonal QCQP
only sees ``diag(X)``. Writing ``y = diag(X)`` gives the lifted program

    min  a_J sum(y) + 2 b_J^T x + c_J
    s.t. a_k sum(y) + 2 b_k^T x + c_k <= 0,   k = 1..m
         x_i^2 - y_i <= 0,                    i = 1..n

which is what :func:`solve_relaxation` solves. The full Shor SDP is only
exported (SDPA sparse format) for external solvers.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.optimize

from . import barrier
from .certify import KktCertificate, Verdict, verify_kkt
from .model import SQcqpProblem, eval_quad
from .slemma import lift_to_sphere


class RelaxationInfeasible(RuntimeError):
    """Phase I found no strictly feasible lifted point."""


@dataclass(frozen=True)
class Sdp2Program:
    n: int
    a_J: float
    b_J: np.ndarray
    c_J: float
    a: np.ndarray
    B: np.ndarray
    c: np.ndarray

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def alpha_J(self) -> np.ndarray:
        return np.full(self.n, self.a_J)

    def objective(self, x, y) -> float:
        return self.a_J * float(np.sum(y)) + 2.0 * float(self.b_J @ x) + self.c_J

    def constraint_values(self, x, y) -> np.ndarray:
        return self.a * float(np.sum(y)) + 2.0 * (self.B @ x) + self.c

    def coupling(self, x, y) -> np.ndarray:
        return np.asarray(x) ** 2 - np.asarray(y)

    def to_program(self) -> barrier.SmoothConvexProgram:
        n = self.n
        c = np.concatenate([2.0 * self.b_J, self.alpha_J])
        A = np.hstack([2.0 * self.B, np.outer(self.a, np.ones(n))])
        return barrier.SmoothConvexProgram.lifted(c, A, self.c, n)


def build_sdp2(problem: SQcqpProblem) -> Sdp2Program:
    J = problem.objective
    return Sdp2Program(problem.n, J.a, J.b, J.c, problem.a, problem.B, problem.c)


@dataclass(frozen=True)
class SocpView:
    """Lifted program over triples ((y_i + 1)/2, (y_i - 1)/2, x_i) in 3-d cones."""

    n: int
    objective_coefficients: np.ndarray  # (n, 3)
    constraint_coefficients: np.ndarray  # (m, n, 3)
    constraint_offsets: np.ndarray  # (m,)
    objective_offset: float

    @staticmethod
    def triples(x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.column_stack([(y + 1.0) / 2.0, (y - 1.0) / 2.0, x])

    @staticmethod
    def untriple(triples) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(triples, dtype=float)
        return t[:, 2], t[:, 0] + t[:, 1]

    def objective(self, triples) -> float:
        return float(np.sum(self.objective_coefficients * triples)) + self.objective_offset

    def constraint_values(self, triples) -> np.ndarray:
        return np.einsum("kij,ij->k", self.constraint_coefficients, triples) + self.constraint_offsets

    def feasible(self, triples, tol: float = 0.0) -> bool:
        return all(cone_member(t, tol) for t in triples) and bool(
            np.all(self.constraint_values(triples) <= tol)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "cone": "each triple (t, s, r) satisfies t >= ||(s, r)||",
            "triple": "((y_i + 1)/2, (y_i - 1)/2, x_i)",
            "objective": {
                "coefficients": self.objective_coefficients.tolist(),
                "offset": self.objective_offset,
            },
            "constraints": [
                {"coefficients": coef.tolist(), "offset": float(off), "sense": "<= 0"}
                for coef, off in zip(self.constraint_coefficients, self.constraint_offsets)
            ],
        }


def build_socp(problem: SQcqpProblem) -> SocpView:
    n = problem.n

    def coefs(f):
        return np.column_stack([np.full(n, f.a), np.full(n, f.a), 2.0 * f.b])

    return SocpView(
        n=n,
        objective_coefficients=coefs(problem.objective),
        constraint_coefficients=np.array([coefs(f) for f in problem.constraints]),
        constraint_offsets=problem.c.copy(),
        objective_offset=problem.objective.c,
    )


def cone_member(triple, tol: float = 0.0) -> bool:
    t = np.asarray(triple, dtype=float)
    return bool(t[0] >= np.hypot(t[1], t[2]) - tol)


# -- SDPA export --------------------------------------------------------------


def _shor_variables(n: int) -> list[tuple[str, int, int]]:
    names = [("x", j, j) for j in range(n)]
    names += [("X", i, j) for i in range(n) for j in range(i, n)]
    return names


def shor_sdpa_text(problem: SQcqpProblem) -> str:
    """The Shor SDP in SDPA sparse format.

    Primal form: minimize sum_i c_i v_i s.t. sum_i v_i F_i - F_0 >= 0 with
    v = (x_1..x_n, X_11, X_12, .., X_nn). Block 1 is [[1, x^T], [x, X]];
    block 2 is diagonal with -(Tr(A_k X) + 2 b_k^T x + c_k) >= 0.
    """
    n, m = problem.n, problem.m
    J = problem.objective
    variables = _shor_variables(n)
    costs = []
    entries: list[tuple[int, int, int, int, float]] = [(0, 1, 1, 1, -1.0)]
    for k, f in enumerate(problem.constraints, start=1):
        if f.c != 0.0:
            entries.append((0, 2, k, k, f.c))
    for idx, (kind, i, j) in enumerate(variables, start=1):
        if kind == "x":
            costs.append(2.0 * J.b[i])
            entries.append((idx, 1, 1, i + 2, 1.0))
            for k, f in enumerate(problem.constraints, start=1):
                if f.b[i] != 0.0:
                    entries.append((idx, 2, k, k, -2.0 * f.b[i]))
        else:
            costs.append(J.a if i == j else 0.0)
            entries.append((idx, 1, i + 2, j + 2, 1.0))
            if i == j:
                for k, f in enumerate(problem.constraints, start=1):
                    if f.a != 0.0:
                        entries.append((idx, 2, k, k, -f.a))
    lines = [
        "* Shor SDP relaxation of a scalar-identity QCQP",
        "* variables: x_1..x_n then X_ij (i <= j) row-major; block 1 = [[1, x'], [x, X]]",
        "* block 2 (diagonal): -(Tr(A_k X) + 2 b_k'x + c_k) >= 0, i.e. each <= 0 row negated",
        f"* objective constant c_J = {float(J.c)!r} omitted",
        str(len(variables)),
        "2",
        f"{n + 1} {-m}",
        " ".join(repr(float(c)) for c in costs),
    ]
    lines += [f"{mat} {blk} {i} {j} {float(val)!r}" for mat, blk, i, j, val in entries]
    return "\n".join(lines) + "\n"


def export_shor_sdp(problem: SQcqpProblem, path) -> Path:
    path = Path(path)
    path.write_text(shor_sdpa_text(problem), encoding="utf-8")
    return path


def read_sdpa(text: str) -> dict:
    """Parse SDPA sparse text into mdim, block sizes, costs and entries."""
    lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in '*"']
    tokens = lambda s: s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split()
    mdim = int(tokens(lines[0])[0])
    nblocks = int(tokens(lines[1])[0])
    blocks = [int(v) for v in tokens(lines[2])[:nblocks]]
    costs = [float(v) for v in tokens(lines[3])[:mdim]]
    entries = []
    for ln in lines[4:]:
        mat, blk, i, j, val = tokens(ln)[:5]
        entries.append((int(mat), int(blk), int(i), int(j), float(val)))
    return {"mdim": mdim, "blocks": blocks, "costs": costs, "entries": entries}


# -- solve and recover --------------------------------------------------------


@dataclass(frozen=True)
class RelaxSolution:
    x: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    nu: float
    objective_value: float
    status: str
    exact: bool = False
    coupling_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gap_estimate: float = 0.0
    x_recovered: np.ndarray | None = None
    recovery: str = ""
    gap_vs_certified: float | None = None
    upper_bound: float | None = None
    certificate: KktCertificate | None = None
    newton_iterations: int = 0

    def to_dict(self) -> dict:
        value = self.objective_value
        return {
            "value": "-inf" if value == -np.inf else float(value),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "gamma": self.gamma.tolist(),
            "nu": float(self.nu),
            "exact": bool(self.exact),
            "gap_vs_certified": self.gap_vs_certified,
            "status": self.status,
            "recovery": self.recovery,
            "x_recovered": None if self.x_recovered is None else self.x_recovered.tolist(),
        }


def solve_relaxation(
    problem: SQcqpProblem,
    tol_gap: float = 1e-9,
    max_newton: int = 2000,
    verbose: bool = False,
) -> RelaxSolution:
    sdp2 = build_sdp2(problem)
    program = sdp2.to_program()
    u0 = barrier.phase1(program, verbose=verbose)
    if u0 is None:
        raise RelaxationInfeasible("the lifted feasible set has empty interior")
    result = barrier.solve(program, u0, tol_gap=tol_gap, max_newton=max_newton, verbose=verbose)
    n, m = problem.n, problem.m
    x, y = result.u[:n], result.u[n:]
    gamma = np.maximum(result.multipliers[:m], 0.0)
    nu = problem.objective.a + float(gamma @ problem.a)
    value = -np.inf if result.status is barrier.Status.UNBOUNDED else sdp2.objective(x, y)
    return RelaxSolution(
        x=x,
        y=y,
        gamma=gamma,
        nu=nu,
        objective_value=value,
        status=result.status.value,
        coupling_residuals=y - x * x,
        gap_estimate=result.gap_estimate,
        newton_iterations=result.newton_iterations,
    )


def relaxation_kkt_residuals(problem: SQcqpProblem, sol: RelaxSolution, nu_i=None) -> dict:
    """Residuals of the lifted program's KKT system at (x, y, gamma, nu)."""
    sdp2 = build_sdp2(problem)
    nu_i = np.full(problem.n, sol.nu) if nu_i is None else np.asarray(nu_i)
    lifted = sdp2.constraint_values(sol.x, sol.y)
    coupling = sdp2.coupling(sol.x, sol.y)
    return {
        "y_stationarity": float(np.max(np.abs(problem.objective.a + sol.gamma @ problem.a - nu_i))),
        "x_stationarity": float(
            np.max(np.abs(2 * problem.objective.b + 2 * sol.gamma @ problem.B + 2 * nu_i * sol.x))
        ),
        "complementarity": float(np.max(np.abs(sol.gamma * lifted), initial=0.0)),
        "coupling_complementarity": float(np.max(np.abs(nu_i * coupling))),
        "primal": float(max(np.max(lifted, initial=0.0), np.max(coupling), 0.0)),
    }


def _local_upper_bound(problem: SQcqpProblem, x0: np.ndarray) -> tuple[float, np.ndarray] | None:
    """Best original objective from a local solve started at x0."""
    cons = {
        "type": "ineq",
        "fun": lambda x: -problem.constraint_values(x),
        "jac": lambda x: -(2.0 * np.outer(problem.a, x) + 2.0 * problem.B),
    }
    res = scipy.optimize.minimize(
        problem.objective,
        x0,
        jac=lambda x: 2.0 * problem.objective.a * x + 2.0 * problem.objective.b,
        method="SLSQP",
        constraints=[cons],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    if problem.max_violation(res.x) <= 1e-9 * (1.0 + problem.coefficient_scale()):
        return float(problem.objective(res.x)), res.x
    return None


def recover_and_check(problem: SQcqpProblem, sol: RelaxSolution, tol: float = 1e-7) -> RelaxSolution:
    """Decide exactness and recover an original-space solution.

    A lifted point (x, y) only enters through x and sum(y); any x' with
    B x' = B x (rows b_J, b_k) and ||x'||^2 = sum(y) reproduces every
    objective and constraint value with y' = x' * x'. The null-space move
    finds such an x' whenever B has a nontrivial kernel.
    """
    if sol.status == barrier.Status.UNBOUNDED.value:
        return replace(sol, exact=False, recovery="unbounded", gap_vs_certified=None)
    scale = 1.0 + problem.coefficient_scale()
    value = sol.objective_value
    coupling = sol.y - sol.x * sol.x
    tight = float(np.max(np.abs(coupling))) <= tol * scale
    if sol.nu > tol and tight:
        candidate, branch = sol.x, "multiplier-positive"
    elif tight:
        candidate, branch = sol.x, "coupling-tight"
    else:
        B = np.vstack([problem.objective.b, problem.B])
        lifted = lift_to_sphere(B, sol.x, float(np.sum(sol.y)))
        if lifted is not None:
            candidate, branch = lifted[0], "null-space-lift"
        else:
            candidate, branch = sol.x, "none"
    objective = eval_quad(problem.objective, candidate)
    feasible = problem.max_violation(candidate) <= tol * scale
    exact = feasible and abs(objective - value) <= tol * (1.0 + abs(value))
    if exact:
        cert = verify_kkt(problem, candidate, sol.gamma, tol=tol)
        return replace(
            sol,
            exact=True,
            x_recovered=candidate,
            recovery=branch,
            gap_vs_certified=0.0,
            upper_bound=objective,
            certificate=cert,
            coupling_residuals=coupling,
        )
    upper = None
    best_x = None
    if feasible:
        upper, best_x = objective, candidate
    local = _local_upper_bound(problem, candidate)
    if local is not None and (upper is None or local[0] < upper):
        upper, best_x = local
    return replace(
        sol,
        exact=False,
        x_recovered=best_x,
        recovery=branch,
        gap_vs_certified=None if upper is None else float(upper - value),
        upper_bound=upper,
        coupling_residuals=coupling,
    )


def solve_and_certify(
    problem: SQcqpProblem,
    tol_gap: float = 1e-9,
    tol: float = 1e-7,
    seed: int = 42,
    verbose: bool = False,
) -> tuple[SQcqpProblem, RelaxSolution]:
    """Slater search, lifted solve, recovery and KKT certificate in one call."""
    from .certify import check_slater

    if problem.slater_point is None:
        x0 = check_slater(problem, seed=seed)
        if x0 is not None:
            problem = problem.with_slater(x0)
    sol = solve_relaxation(problem, tol_gap=tol_gap, verbose=verbose)
    return problem, recover_and_check(problem, sol, tol=tol)


__all__ = [
    "RelaxSolution",
    "RelaxationInfeasible",
    "SocpView",
    "Sdp2Program",
    "Verdict",
    "build_sdp2",
    "build_socp",
    "cone_member",
    "export_shor_sdp",
    "read_sdpa",
    "recover_and_check",
    "relaxation_kkt_residuals",
    "shor_sdpa_text",
    "solve_and_certify",
    "solve_relaxation",
]
