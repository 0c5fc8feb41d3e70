"""KKT and Fritz-John certificates for scalar-identity QCQPs.

For these problems the second-order condition A_J + sum gamma_k A_k >= 0
collapses to the scalar inequality ``w = a_J + sum_k gamma_k a_k >= 0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.optimize

from . import barrier
from .model import DimensionError, SQcqpProblem, _as_vector, grad
from .slemma import lift_to_sphere, search_strict_point

DEFAULT_TOL = 1e-8


class Verdict(str, Enum):
    CERTIFIED_GLOBAL = "CertifiedGlobal"
    FRITZ_JOHN_ONLY = "FritzJohnOnly"
    FAILED = "Failed"


def scaled_tol(problem: SQcqpProblem, tol: float) -> float:
    return tol * (1.0 + problem.coefficient_scale())


@dataclass(frozen=True)
class KktCertificate:
    gamma: np.ndarray
    w: float
    stationarity_residual: float
    complementarity_residuals: np.ndarray
    primal_violation: float
    verdict: Verdict
    slater: bool | None
    assumption2: bool
    dimension_ok: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "gamma": [float(g) for g in self.gamma],
            "w": float(self.w),
            "stationarity_residual": float(self.stationarity_residual),
            "complementarity": [float(v) for v in self.complementarity_residuals],
            "primal_violation": float(self.primal_violation),
            "assumptions": {
                "slater": self.slater,
                "assumption2": self.assumption2,
                "dimension_ok": self.dimension_ok,
            },
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class FritzJohnCertificate:
    gamma0: float
    gamma: np.ndarray
    w: float
    stationarity_residual: float
    complementarity_residuals: np.ndarray
    primal_violation: float
    passed: bool


def _residuals(problem: SQcqpProblem, x: np.ndarray, gamma0: float, gamma: np.ndarray):
    lagr_grad = gamma0 * grad(problem.objective, x)
    for g, f in zip(gamma, problem.constraints):
        lagr_grad = lagr_grad + g * grad(f, x)
    values = problem.constraint_values(x)
    w = gamma0 * problem.objective.a + float(gamma @ problem.a)
    return (
        float(np.linalg.norm(lagr_grad)),
        gamma * values,
        max(0.0, float(np.max(values))),
        w,
    )


def _check_multipliers(problem: SQcqpProblem, gamma) -> np.ndarray:
    gamma = _as_vector(gamma, problem.m, "gamma")
    if np.any(gamma < 0):
        raise ValueError("multipliers must be nonnegative")
    return gamma


def verify_kkt(
    problem: SQcqpProblem,
    x,
    gamma,
    tol: float = DEFAULT_TOL,
    slater: bool | None = None,
) -> KktCertificate:
    """Check stationarity, complementarity, w >= 0 and feasibility at x.

    The verdict is CertifiedGlobal only when a Slater point is known
    (``slater`` or ``problem.slater_point``) and the curvature assumption holds;
    otherwise passing residuals yield FritzJohnOnly.
    """
    x = _as_vector(x, problem.n)
    gamma = _check_multipliers(problem, gamma)
    eps = scaled_tol(problem, tol)
    stat, comp, viol, w = _residuals(problem, x, 1.0, gamma)
    if slater is None:
        slater = True if problem.slater_point is not None else None
    a2 = check_assumption2(problem) is not None
    notes = []
    passed = stat <= eps and bool(np.all(np.abs(comp) <= eps)) and viol <= eps and w >= -eps
    if not passed:
        verdict = Verdict.FAILED
    elif slater and a2:
        verdict = Verdict.CERTIFIED_GLOBAL
    else:
        verdict = Verdict.FRITZ_JOHN_ONLY
        if not slater:
            notes.append("no Slater point recorded; global optimality not claimed")
        if not a2:
            notes.append("no nonzero gamma >= 0 makes a_J + sum gamma_k a_k >= 0; global optimality not claimed")
        warnings.warn("KKT residuals pass but the standing assumptions are not established", stacklevel=2)
    if not problem.dimension_ok:
        notes.append("m + 1 >= n: the KKT conditions are not known to be necessary here")
    notes.append("Slater read as existence of some strictly feasible point, not strictness at x*")
    return KktCertificate(
        gamma=gamma,
        w=w,
        stationarity_residual=stat,
        complementarity_residuals=comp,
        primal_violation=viol,
        verdict=verdict,
        slater=slater,
        assumption2=a2,
        dimension_ok=problem.dimension_ok,
        notes=tuple(notes),
    )


def verify_fritz_john(problem: SQcqpProblem, x, gamma0: float, gamma, tol: float = DEFAULT_TOL) -> FritzJohnCertificate:
    x = _as_vector(x, problem.n)
    gamma = _check_multipliers(problem, gamma)
    if gamma0 < 0:
        raise ValueError("gamma0 must be nonnegative")
    if gamma0 <= 0 and not np.any(gamma > 0):
        raise ValueError("Fritz-John multipliers must not all vanish")
    eps = scaled_tol(problem, tol)
    stat, comp, viol, w = _residuals(problem, x, float(gamma0), gamma)
    passed = stat <= eps and bool(np.all(np.abs(comp) <= eps)) and w >= -eps
    return FritzJohnCertificate(float(gamma0), gamma, w, stat, comp, viol, passed)


def find_multipliers(problem: SQcqpProblem, x, tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Recover gamma >= 0 making (x, gamma) a KKT pair, or None.

    Support is restricted to the numerically active constraints. The
    stationarity system is solved by nonnegative least squares; if the
    result violates a_J + sum gamma_k a_k >= 0 the optimum sits on that
    boundary and is recomputed with the boundary as a heavily weighted row.
    """
    x = _as_vector(x, problem.n)
    eps = scaled_tol(problem, tol)
    if problem.max_violation(x) > eps:
        return None
    report = problem.evaluate(x, tol_active=tol)
    active = list(report.active_set)
    gamma = np.zeros(problem.m)
    target = -grad(problem.objective, x)
    a_J = problem.objective.a
    if not active:
        ok = np.linalg.norm(target) <= eps and a_J >= -eps
        return gamma if ok else None
    G = np.column_stack([grad(problem.constraints[k], x) for k in active])
    a_act = problem.a[active]
    coef, _ = scipy.optimize.nnls(G, target)
    if a_J + float(coef @ a_act) < -eps:
        weight = 1e6 * (1.0 + np.linalg.norm(G))
        G2 = np.vstack([G, weight * a_act])
        t2 = np.append(target, -weight * a_J)
        coef, _ = scipy.optimize.nnls(G2, t2)
    gamma[active] = coef
    stat, comp, _, w = _residuals(problem, x, 1.0, gamma)
    if stat <= eps and w >= -eps and np.all(np.abs(comp) <= eps):
        return gamma
    return None


def check_assumption2(problem: SQcqpProblem) -> np.ndarray | None:
    """gamma >= 0, gamma != 0 with a_J + sum gamma_k a_k >= 0, or None."""
    a_J = problem.objective.a
    a = problem.a
    gamma = np.zeros(problem.m)
    if a_J > 0:
        k = int(np.argmax(a))
        gamma[k] = 1.0 if a[k] >= 0 else 0.5 * a_J / (-a[k])
        return gamma
    if a_J == 0:
        if np.any(a >= 0):
            gamma[int(np.argmax(a))] = 1.0
            return gamma
        return None
    if np.any(a > 0):
        k = int(np.argmax(a))
        gamma[k] = -a_J / a[k]
        return gamma
    return None


def check_h_condition_m2(problem: SQcqpProblem, gamma1: float, gamma2: float) -> bool:
    """Both strict inequalities of the two-constraint H-matrix condition."""
    if problem.m != 2:
        raise DimensionError("the H-matrix condition is stated for m = 2")
    f1, f2 = problem.constraints
    a = gamma1 * f1.a + gamma2 * f2.a
    c = gamma1 * f1.c + gamma2 * f2.c
    b = gamma1 * f1.b + gamma2 * f2.b
    return a > 0 and c * a - float(b @ b) > 0


def check_slater(
    problem: SQcqpProblem,
    starts: int = 50,
    iterations: int = 200,
    seed: int = 42,
) -> np.ndarray | None:
    """Look for x0 with every f_k(x0) < 0; None is inconclusive.

    First a phase-I solve on the lifted feasible set, mapped back to x by a
    null-space move that restores y = x * x; then multi-start descent.
    """
    from .relax import build_sdp2

    program = build_sdp2(problem).to_program()
    u = barrier.phase1(program)
    candidates = []
    if u is not None:
        n = problem.n
        x, y = u[:n], u[n:]
        if np.all(problem.constraint_values(x) < 0):
            return x
        lifted = lift_to_sphere(problem.B, x, float(np.sum(y)))
        if lifted is not None:
            x_lift = lifted[0]
            if np.all(problem.constraint_values(x_lift) < 0):
                return x_lift
            candidates.append(x_lift)
        candidates.append(x)
    return search_strict_point(
        problem.constraints, starts=starts, iterations=iterations, seed=seed, initial=candidates
    )
