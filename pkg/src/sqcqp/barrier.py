"""Log-barrier interior-point method for the lifted (x, y) convex program.

The program has a linear objective ``c^T u`` and two constraint families::

    A u + d <= 0                         (affine rows)
    u[i]^2 - u[j] <= 0, (i, j) in pairs  (coupling)

For the lifted relaxation ``u = [x; y]`` and the pairs are ``(i, n + i)``.
Every constraint Hessian is diagonal, which the Newton assembly exploits.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg

T0 = 1.0
MU = 10.0
NEWTON_TOL = 1e-10
ALPHA = 0.25
BETA = 0.5
DIVERGENCE_FACTOR = 1e8


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITER_LIMIT = "iter_limit"


@dataclass(frozen=True)
class SmoothConvexProgram:
    c: np.ndarray
    A: np.ndarray
    d: np.ndarray
    pairs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        dim = c.shape[0]
        A = np.asarray(self.A, dtype=float).reshape(-1, dim)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        pairs = np.asarray(self.pairs, dtype=int).reshape(-1, 2)
        if A.shape[0] != d.shape[0]:
            raise ValueError("A and d disagree on the number of affine rows")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= dim):
            raise ValueError("coupling index out of range")
        for name, value in (("c", c), ("A", A), ("d", d), ("pairs", pairs)):
            object.__setattr__(self, name, value)

    @classmethod
    def lifted(cls, c, A, d, n: int) -> "SmoothConvexProgram":
        """Program over u = [x; y] with coupling x_i^2 <= y_i."""
        idx = np.arange(n)
        return cls(c, A, d, np.column_stack([idx, n + idx]))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def n_affine(self) -> int:
        return self.A.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.n_affine + self.pairs.shape[0]

    def constraints(self, u: np.ndarray) -> np.ndarray:
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        return np.concatenate([self.A @ u + self.d, u[i] ** 2 - u[j]])

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        k = self.pairs.shape[0]
        Jc = np.zeros((k, self.dim))
        rows = np.arange(k)
        Jc[rows, self.pairs[:, 0]] = 2.0 * u[self.pairs[:, 0]]
        Jc[rows, self.pairs[:, 1]] = -1.0
        return np.vstack([self.A, Jc])

    def hessian_diagonals(self) -> np.ndarray:
        """Row j holds the diagonal of the Hessian of constraint j."""
        D = np.zeros((self.n_constraints, self.dim))
        D[self.n_affine + np.arange(self.pairs.shape[0]), self.pairs[:, 0]] = 2.0
        return D

    def objective(self, u: np.ndarray) -> float:
        return float(self.c @ u)


@dataclass
class SolverResult:
    u: np.ndarray
    multipliers: np.ndarray
    gap_estimate: float
    status: Status
    t: float = 0.0
    newton_iterations: int = 0
    objective_history: list[float] = field(default_factory=list)
    note: str = ""

    @property
    def objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else float("nan")


# (g, J, D) for a point: constraint values, Jacobian, Hessian diagonals.
Oracle = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


def _barrier(oracle: Oracle, c: np.ndarray, u: np.ndarray, t: float):
    g, J, D = oracle(u)
    if np.any(g >= 0) or not np.all(np.isfinite(g)):
        return np.inf, None, None
    inv = 1.0 / (-g)
    value = t * float(c @ u) - float(np.sum(np.log(-g)))
    gradient = t * c + J.T @ inv
    H = (J.T * inv**2) @ J
    H[np.diag_indices_from(H)] += D.T @ inv
    return value, gradient, H


def _newton_step(H: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    # Jacobi scaling: slacks near zero put entries ~1/g^2 on the diagonal.
    d = 1.0 / np.sqrt(np.maximum(np.diag(H), np.finfo(float).tiny))
    Hs = H * np.outer(d, d)
    try:
        cf = scipy.linalg.cho_factor(Hs, check_finite=False)
        return -d * scipy.linalg.cho_solve(cf, d * gradient, check_finite=False)
    except np.linalg.LinAlgError:
        return -d * np.linalg.lstsq(Hs, d * gradient, rcond=None)[0]


def _center(oracle, c, u, t, budget, cap, verbose, stop=None):
    """Damped Newton on t c^T u - sum log(-g(u)).

    Terminates when the Newton decrement falls below NEWTON_TOL or stalls
    at the rounding floor. Inside the
    quadratic-convergence region (decrement < 1/4) full steps are taken
    without a sufficient-decrease test, which at large t is below rounding.
    Returns (u, iterations, diverged).
    """
    value, gradient, H = _barrier(oracle, c, u, t)
    iterations = 0
    previous = np.inf
    while iterations < budget:
        step = _newton_step(H, gradient)
        slope = float(gradient @ step)
        decrement = np.sqrt(max(-slope, 0.0))
        if decrement <= NEWTON_TOL:
            break
        # Rounding floor: quadratic convergence has stopped.
        if decrement < 1e-3 and decrement >= 0.5 * previous:
            break
        previous = decrement
        s = 1.0
        while True:
            candidate = u + s * step
            new_value, new_gradient, new_H = _barrier(oracle, c, candidate, t)
            if decrement < 0.25 and np.isfinite(new_value):
                break
            if new_value <= value + ALPHA * s * slope:
                break
            s *= BETA
            if s < 1e-20:
                return u, iterations, False
        u, value, gradient, H = candidate, new_value, new_gradient, new_H
        iterations += 1
        if verbose:
            print(f"  newton {iterations:3d} t={t:.1e} step={s:.2e} decrement={decrement:.3e}", file=sys.stderr)
        if np.linalg.norm(u) > cap:
            return u, iterations, True
        if stop is not None and stop(u):
            break
    return u, iterations, False


def _oracle(program: SmoothConvexProgram) -> Oracle:
    D = program.hessian_diagonals()
    return lambda u: (program.constraints(u), program.jacobian(u), D)


def _multipliers(program: SmoothConvexProgram, u: np.ndarray, t: float) -> np.ndarray:
    g = program.constraints(u)
    with np.errstate(divide="ignore"):
        return 1.0 / (t * (-g))


def polish_multipliers(program: SmoothConvexProgram, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Smallest relative change to ``lam`` that zeroes c + J^T lam.

    Slacks near zero are known only to about eps * |u| absolute, so the
    barrier multipliers carry a relative error of eps * |u| / slack. The
    correction solves (J^T diag(lam)) z = -residual in least norm and
    returns lam * (1 + z), clipped at zero.
    """
    J = program.jacobian(u)
    residual = program.c + J.T @ lam
    z = np.linalg.lstsq(J.T * lam, -residual, rcond=None)[0]
    polished = np.maximum(lam * (1.0 + z), 0.0)
    if np.linalg.norm(program.c + J.T @ polished) <= np.linalg.norm(residual):
        return polished
    return lam


def solve(
    program: SmoothConvexProgram,
    u0: np.ndarray,
    tol_gap: float = 1e-9,
    max_newton: int = 2000,
    verbose: bool = False,
) -> SolverResult:
    """Central-path following from the strictly feasible point ``u0``.

    Stops once the duality-gap bound n_constraints / t drops below
    ``tol_gap``. Multipliers are 1 / (t * (-g_j(u))), refined at an optimal
    exit by :func:`polish_multipliers`.
    """
    u = np.asarray(u0, dtype=float).copy()
    if np.any(program.constraints(u) >= 0):
        raise ValueError("u0 is not strictly feasible")
    oracle = _oracle(program)
    n_con = program.n_constraints
    cap = DIVERGENCE_FACTOR * (1.0 + np.linalg.norm(u))
    start_value = program.objective(u)
    t = T0
    total = 0
    history: list[float] = []

    def result(status, gap, note=""):
        lam = _multipliers(program, u, t)
        if status is Status.OPTIMAL:
            lam = polish_multipliers(program, u, lam)
        return SolverResult(u, lam, gap, status, t, total, history, note)

    while True:
        u, its, diverged = _center(oracle, program.c, u, t, max_newton - total, cap, verbose)
        total += its
        value = program.objective(u)
        history.append(value)
        if diverged:
            if value < start_value:
                return result(Status.UNBOUNDED, np.inf, "iterates diverged with decreasing objective")
            return result(Status.ITER_LIMIT, n_con / t, "iterates diverged along a flat direction")
        if verbose:
            print(f"outer t={t:.1e} objective={value:.12g} newton={total}", file=sys.stderr)
        if n_con / t <= tol_gap:
            return result(Status.OPTIMAL, n_con / t)
        if total >= max_newton:
            return result(Status.ITER_LIMIT, n_con / t, "Newton budget exhausted")
        t *= MU


def phase1(
    program: SmoothConvexProgram,
    radius: float = 1e6,
    max_newton: int = 2000,
    verbose: bool = False,
) -> np.ndarray | None:
    """Find u with every constraint strictly negative, or None.

    Minimizes a shared slack s subject to g_j(u) <= s, s >= -1 and
    ||u|| <= radius. None means no strictly feasible point inside the radius.
    """
    dim = program.dim
    k = program.n_constraints
    base = _oracle(program)

    def oracle(v):
        u, s = v[:dim], v[-1]
        g, J, D = base(u)
        G = np.concatenate([g - s, [-1.0 - s, float(u @ u) - radius**2]])
        JJ = np.zeros((k + 2, dim + 1))
        JJ[:k, :dim] = J
        JJ[:k, -1] = -1.0
        JJ[k, -1] = -1.0
        JJ[k + 1, :dim] = 2.0 * u
        DD = np.zeros((k + 2, dim + 1))
        DD[:k, :dim] = D
        DD[k + 1, :dim] = 2.0
        return G, JJ, DD

    u = np.zeros(dim)
    u[program.pairs[:, 1]] = 1.0
    if np.max(program.constraints(u), initial=-1.0) < 0:
        return u
    s0 = max(float(np.max(program.constraints(u))), 0.0) + 1.0
    v = np.concatenate([u, [s0]])
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    n_con = k + 2
    t = T0
    total = 0
    cap = np.inf

    def strict(v):
        return bool(np.max(program.constraints(v[:dim])) < 0)

    while total < max_newton:
        v, its, _ = _center(oracle, c, v, t, max_newton - total, cap, verbose, stop=strict)
        total += its
        if verbose:
            print(f"phase1 t={t:.1e} slack={v[-1]:.6g}", file=sys.stderr)
        if np.max(program.constraints(v[:dim])) < 0:
            return v[:dim]
        # On the central path s exceeds its optimum by at most n_con / t.
        if v[-1] - n_con / t > 0 or n_con / t < 1e-13:
            return None
        t *= MU
    return None


def kkt_residual(program: SmoothConvexProgram, result: SolverResult) -> float:
    """Norm of c + sum_j multiplier_j grad g_j(u)."""
    J = program.jacobian(result.u)
    return float(np.linalg.norm(program.c + J.T @ result.multipliers))


def complementarity(program: SmoothConvexProgram, result: SolverResult) -> np.ndarray:
    return np.abs(result.multipliers * program.constraints(result.u))
