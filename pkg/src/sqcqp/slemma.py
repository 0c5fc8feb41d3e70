"""Theorem-of-the-alternative checks and the midpoint witness for Omega_0.

For scalar-identity functionals f_0..f_m on R^n with m + 1 < n, the set

    Omega_0 = {(f_0(x), ..., f_m(x)) : x in R^n} + int R_+^{m+1}

is convex. The constructive argument: given x_v, x_w and lambda, move the
midpoint lambda x_v + (1 - lambda) x_w along a null-space direction of the
matrix B of linear coefficients until it lands on the sphere of squared
radius lambda ||x_v||^2 + (1 - lambda) ||x_w||^2. Every linear part is then
preserved and every quadratic part is averaged exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .model import DimensionError, QuadForm, SQcqpProblem, combine, global_min_scalar_quadratic

RANK_RTOL = 1e-10
ALPHA_CAP = 1e12
DEFAULT_STARTS = 50
DEFAULT_ITERATIONS = 200


class StructuralError(ValueError):
    """The null space of B is trivial, so no witness direction exists."""


def null_space_basis(B: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of {y : B y = 0}.

    Uses a column-pivoted QR of B^T; pivots below ``rtol`` times the largest
    count as zero.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = B.shape[1]
    if B.shape[0] == 0 or not np.any(B):
        return np.eye(n)
    Q, R, _ = scipy.linalg.qr(B.T, pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0]))
    return Q[:, rank:]


def matrix_rank(B: np.ndarray, rtol: float = RANK_RTOL) -> int:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return B.shape[1] - null_space_basis(B, rtol).shape[1]


def sphere_step(u: np.ndarray, center: np.ndarray, deficit: float) -> float:
    """Smaller-magnitude root of alpha^2 ||u||^2 + 2 alpha <u, center> - deficit = 0.

    ``deficit`` = target squared norm minus ||center||^2 and must be >= 0,
    which makes the discriminant nonnegative.
    """
    uu = float(u @ u)
    p = float(u @ center)
    disc = p * p + uu * deficit
    root = np.sqrt(max(disc, 0.0))
    if deficit == 0.0:
        return 0.0
    q = -(p + np.copysign(root, p)) if p != 0.0 else -root
    # Product of the roots is -deficit / uu; q / uu and (-deficit) / q are the roots.
    return -deficit / q


def lift_to_sphere(B: np.ndarray, center, target_sq_norm: float, rtol: float = RANK_RTOL):
    """x with B x = B center and ||x||^2 = target_sq_norm, or None.

    Needs target_sq_norm >= ||center||^2 and a nontrivial null space of B.
    Returns (x, u, alpha).
    """
    center = np.asarray(center, dtype=float)
    deficit = target_sq_norm - float(center @ center)
    if deficit < 0:
        deficit = 0.0 if deficit > -1e-14 * (1.0 + target_sq_norm) else deficit
    if deficit < 0:
        return None
    basis = null_space_basis(B, rtol)
    for k in range(basis.shape[1]):
        u = basis[:, k]
        alpha = sphere_step(u, center, deficit)
        if np.isfinite(alpha) and abs(alpha) <= ALPHA_CAP * (1.0 + np.linalg.norm(center)):
            return center + alpha * u, u, alpha
    return None


@dataclass(frozen=True)
class OmegaWitness:
    x_v: np.ndarray
    x_w: np.ndarray
    lam: float
    u_star: np.ndarray | None
    alpha_star: float
    x_tilde: np.ndarray
    discriminant: float = 0.0

    @property
    def midpoint(self) -> np.ndarray:
        return self.lam * self.x_v + (1.0 - self.lam) * self.x_w

    @property
    def target_sq_norm(self) -> float:
        return self.lam * float(self.x_v @ self.x_v) + (1.0 - self.lam) * float(self.x_w @ self.x_w)

    def tolerance(self, rtol: float = 1e-8) -> float:
        return rtol * (1.0 + float(self.x_v @ self.x_v) + float(self.x_w @ self.x_w))

    def sphere_residual(self) -> float:
        return abs(float(self.x_tilde @ self.x_tilde) - self.target_sq_norm)

    def linear_residuals(self, functionals: Sequence[QuadForm]) -> np.ndarray:
        y = self.x_tilde - self.midpoint
        return np.array([abs(float(f.b @ y)) for f in functionals])

    def inequality_residuals(self, functionals: Sequence[QuadForm]) -> np.ndarray:
        """f_k(x~) - (lam f_k(x_v) + (1 - lam) f_k(x_w)); nonpositive up to rounding."""
        lam = self.lam
        return np.array(
            [f(self.x_tilde) - (lam * f(self.x_v) + (1.0 - lam) * f(self.x_w)) for f in functionals]
        )

    def check(self, functionals: Sequence[QuadForm], rtol: float = 1e-8) -> bool:
        tol = self.tolerance(rtol)
        coef = 1.0 + max(f.scale() for f in functionals)
        return (
            self.sphere_residual() <= tol
            and bool(np.all(self.linear_residuals(functionals) <= tol * coef))
            and bool(np.all(self.inequality_residuals(functionals) <= tol * coef))
        )


def _linear_matrix(functionals: Sequence[QuadForm]) -> np.ndarray:
    n = functionals[0].n
    for f in functionals:
        if f.n != n:
            raise DimensionError("functionals disagree on dimension")
    return np.array([f.b for f in functionals])


def build_omega_witness(functionals: Sequence[QuadForm], x_v, x_w, lam: float) -> OmegaWitness:
    """x~ with f_k(x~) <= lam f_k(x_v) + (1 - lam) f_k(x_w) for every k.

    Raises StructuralError when B (rows b_k) has full column rank.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    B = _linear_matrix(functionals)
    n = B.shape[1]
    x_v = np.asarray(x_v, dtype=float)
    x_w = np.asarray(x_w, dtype=float)
    if x_v.shape != (n,) or x_w.shape != (n,):
        raise DimensionError(f"points must have length {n}")
    if np.array_equal(x_v, x_w):
        return OmegaWitness(x_v, x_w, lam, None, 0.0, x_v.copy())
    basis = null_space_basis(B)
    if basis.shape[1] == 0:
        raise StructuralError(f"rank(B) = n = {n}: null space is trivial")
    center = lam * x_v + (1.0 - lam) * x_w
    deficit = lam * (1.0 - lam) * float((x_v - x_w) @ (x_v - x_w))
    for k in range(basis.shape[1]):
        u = basis[:, k]
        p = float(u @ center)
        disc = p * p + float(u @ u) * deficit
        alpha = sphere_step(u, center, deficit)
        if np.isfinite(alpha) and abs(alpha) <= ALPHA_CAP * (1.0 + np.linalg.norm(center)):
            return OmegaWitness(x_v, x_w, lam, u, alpha, center + alpha * u, disc)
    raise StructuralError("no null-space direction gave a finite step")


def check_multiplier_alternative(gamma, functionals: Sequence[QuadForm], tol: float = 1e-10) -> bool:
    """True iff inf_x sum_k gamma_k f_k(x) >= -tol."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("multipliers must be nonnegative")
    if not np.any(gamma > 0):
        raise ValueError("multipliers must not all vanish")
    result = global_min_scalar_quadratic(combine(gamma, functionals))
    return result.bounded and result.value >= -tol * (1.0 + max(f.scale() for f in functionals))


def _minimize_max(functionals, x0, iterations):
    """Local minimization of max_k f_k from x0 via the epigraph form."""
    A = np.array([f.a for f in functionals])
    B = np.array([f.b for f in functionals])
    C = np.array([f.c for f in functionals])
    n = x0.shape[0]

    def values(z):
        x = z[:n]
        return A * float(x @ x) + 2.0 * (B @ x) + C

    cons = {
        "type": "ineq",
        "fun": lambda z: z[n] - values(z),
        "jac": lambda z: np.column_stack([-(2.0 * np.outer(A, z[:n]) + 2.0 * B), np.ones(len(A))]),
    }
    level = float(np.max(values(np.append(x0, 0.0))))
    floor = min(level, 0.0) - 1.0
    z0 = np.append(x0, level + 1.0)
    res = scipy.optimize.minimize(
        lambda z: z[n],
        z0,
        jac=lambda z: np.eye(n + 1)[n],
        method="SLSQP",
        bounds=[(None, None)] * n + [(floor, None)],
        constraints=[cons],
        options={"maxiter": iterations, "ftol": 1e-12},
    )
    return res.x[:n]


def search_strict_point(
    functionals: Sequence[QuadForm],
    starts: int = DEFAULT_STARTS,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 42,
    initial: Sequence[np.ndarray] = (),
) -> np.ndarray | None:
    """x with f_k(x) < 0 for all k, or None (inconclusive)."""
    n = _linear_matrix(functionals).shape[1]
    rng = np.random.default_rng(seed)
    scale = 1.0 + max(
        float(np.linalg.norm(f.b)) / abs(f.a) if f.a != 0 else 0.0 for f in functionals
    )

    def strict(x):
        return all(f(x) < 0 for f in functionals)

    candidates = [np.asarray(x, dtype=float) for x in initial]
    candidates.append(np.zeros(n))
    candidates += [scale * rng.standard_normal(n) * rng.uniform(0.1, 3.0) for _ in range(starts - 1)]
    for x0 in candidates:
        if strict(x0):
            return x0
        x = _minimize_max(functionals, x0, iterations)
        if strict(x):
            return x
    return None


@dataclass(frozen=True)
class AlternativeResult:
    which: str  # "strict_point" | "separating_multipliers" | "undetermined"
    point: np.ndarray | None = None
    gamma: np.ndarray | None = None
    detail: dict = field(default_factory=dict)


def _dual_value(gamma, functionals):
    return global_min_scalar_quadratic(combine(gamma, functionals)).value


def decide_alternative(functionals: Sequence[QuadForm], seed: int = 42, **search) -> AlternativeResult:
    """Exhibit one side of the alternative: a strict point or separating multipliers.

    Multipliers are sought by maximizing the concave dual function
    gamma -> inf_x sum gamma_k f_k(x) over the unit simplex.
    """
    x = search_strict_point(functionals, seed=seed, **search)
    if x is not None:
        return AlternativeResult("strict_point", point=x, detail={"values": [f(x) for f in functionals]})
    k = len(functionals)
    rng = np.random.default_rng(seed)
    best, best_value = None, -np.inf
    starts = [np.full(k, 1.0 / k)] + [rng.dirichlet(np.ones(k)) for _ in range(9)]
    for g0 in starts:
        res = scipy.optimize.minimize(
            lambda g: -max(_dual_value(g, functionals), -1e12),
            g0,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * k,
            constraints=[{"type": "eq", "fun": lambda g: np.sum(g) - 1.0}],
        )
        g = np.clip(res.x, 0.0, None)
        value = _dual_value(g, functionals)
        if value > best_value:
            best, best_value = g, value
    if best is not None and check_multiplier_alternative(best, functionals, tol=1e-8):
        return AlternativeResult("separating_multipliers", gamma=best, detail={"dual_value": best_value})
    return AlternativeResult("undetermined", detail={"dual_value": best_value})


def _functionals_of(source, x_star=None) -> list[QuadForm]:
    if isinstance(source, SQcqpProblem):
        forms = list(source.functionals)
    else:
        forms = list(source)
    if x_star is not None:
        f0 = forms[0]
        forms[0] = QuadForm(f0.a, f0.b, f0.c - f0(x_star))
    return forms


def omega_convexity_probe(source, samples: int = 1000, seed: int = 42, x_star=None) -> dict:
    """Build witnesses for random (x_v, x_w, lambda) draws and tally the outcome.

    ``source`` is a problem (objective first) or a plain list of functionals.
    With ``x_star`` the objective is shifted to J - J(x_star).
    """
    forms = _functionals_of(source, x_star)
    n = forms[0].n
    rng = np.random.default_rng(seed)
    passes = 0
    structural = 0
    worst_sphere = 0.0
    worst_ineq = -np.inf
    failures = []
    for i in range(samples):
        scale = 10.0 ** rng.uniform(-1, 1)
        x_v = scale * rng.standard_normal(n)
        x_w = scale * rng.standard_normal(n)
        lam = float(rng.uniform(0.01, 0.99))
        try:
            wit = build_omega_witness(forms, x_v, x_w, lam)
        except StructuralError as exc:
            structural += 1
            if len(failures) < 10:
                failures.append({"sample": i, "reason": "structural", "message": str(exc)})
            continue
        tol = wit.tolerance()
        sphere = wit.sphere_residual() / tol
        ineq = float(np.max(wit.inequality_residuals(forms))) / tol
        worst_sphere = max(worst_sphere, sphere)
        worst_ineq = max(worst_ineq, ineq)
        if wit.check(forms):
            passes += 1
        elif len(failures) < 10:
            failures.append(
                {
                    "sample": i,
                    "reason": "invariant",
                    "lambda": lam,
                    "x_v": x_v.tolist(),
                    "x_w": x_w.tolist(),
                    "sphere_residual": wit.sphere_residual(),
                    "inequality_residual": float(np.max(wit.inequality_residuals(forms))),
                }
            )
    return {
        "samples": samples,
        "passes": passes,
        "structural_failures": structural,
        # Residuals are reported relative to 1 + ||x_v||^2 + ||x_w||^2.
        "worst_sphere_residual": worst_sphere * 1e-8,
        "worst_inequality_residual": (worst_ineq * 1e-8) if np.isfinite(worst_ineq) else 0.0,
        "failures": failures,
    }
