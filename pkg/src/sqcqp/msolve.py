"""Closed-form global solver for projection onto two scalar quadratic constraints.

Problem::

    min 1/2 ||x - z||^2  s.t.  f_k(x) = a_k ||x||^2 + b_k^T x + c_k <= 0,  k = 1, 2

(note the one-b convention here). After the shift xbar = x - z the objective
is 1/2 ||xbar||^2 and the KKT system reads ``w xbar = -sum_{k in I} gamma_k b_k``
with ``w = 1 + 2 sum_{k in I} gamma_k a_k``. Each of the four active sets
I in {{}, {1}, {2}, {1, 2}} reduces to at most one quadratic equation in
the multipliers, solved exactly here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certify import KktCertificate, verify_kkt
from .model import ProblemFormatError, QuadForm, SQcqpProblem, _as_vector, _form_from_dict, _read_json

BRANCHES = ("Empty", "SingletonPositiveW", "SingletonZeroW", "BothActive", "BothLinear")
DEFAULT_TOL = 1e-8
INDEPENDENCE_TOL = 1e-10


class NoCandidate(RuntimeError):
    """No active set produced a KKT point; carries the audit trail."""

    def __init__(self, message: str, candidates: list):
        super().__init__(message)
        self.candidates = candidates


@dataclass(frozen=True)
class P1Instance:
    """Projection of ``z`` onto {x : f_1(x) <= 0, f_2(x) <= 0}.

    ``constraints`` are stored in the package-wide two-b convention in the
    original coordinates; :meth:`shifted_one_b` gives the form the closed
    formulas use.
    """

    z: np.ndarray
    constraints: tuple[QuadForm, QuadForm]

    def __post_init__(self):
        z = _as_vector(self.z, name="z").copy()
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        cons = tuple(self.constraints)
        if len(cons) != 2:
            raise ValueError("exactly two constraints are required")
        if any(f.n != z.shape[0] for f in cons):
            raise ValueError("constraint dimension differs from len(z)")
        object.__setattr__(self, "constraints", cons)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @classmethod
    def from_one_b(cls, z, constraints) -> "P1Instance":
        """Build from (a, b, c) triples of a ||x||^2 + b^T x + c."""
        return cls(z, tuple(QuadForm.from_one_b(a, b, c) for a, b, c in constraints))

    def shifted_one_b(self) -> list[tuple[float, np.ndarray, float]]:
        return [f.shifted(self.z).one_b() for f in self.constraints]

    def objective(self) -> QuadForm:
        z = self.z
        return QuadForm(0.5, -0.5 * z, 0.5 * float(z @ z))

    def to_problem(self) -> SQcqpProblem:
        return SQcqpProblem(self.objective(), self.constraints)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "z": self.z.tolist(),
            "convention": "one-b",
            "constraints": [
                {"a": a, "b": b.tolist(), "c": c}
                for a, b, c in (f.one_b() for f in self.constraints)
            ],
        }


def load_p1(source) -> P1Instance:
    """Read a P1 file; ``convention`` defaults to "one-b" for this format."""
    data = _read_json(source)
    n = data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError("'n' must be a positive integer")
    convention = data.get("convention", "one-b")
    if convention not in ("one-b", "two-b"):
        raise ProblemFormatError(f"unknown convention {convention!r}")
    z = data.get("z", [0.0] * n)
    if not isinstance(z, list) or len(z) != n:
        raise ProblemFormatError(f"'z' must be a list of length {n}")
    cons = data.get("constraints")
    if not isinstance(cons, list) or len(cons) != 2:
        raise ProblemFormatError("'constraints' must list exactly two functionals")
    forms = [_form_from_dict(d, n, convention, f"constraints[{k}]") for k, d in enumerate(cons)]
    try:
        return P1Instance(z, forms)
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from exc


@dataclass
class ActiveSetCandidate:
    active: tuple[int, ...]
    gamma: np.ndarray
    w: float
    x: np.ndarray | None
    branch: str
    accepted: bool = False
    reason: str = ""
    objective: float = np.inf
    residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "active": [k + 1 for k in self.active],
            "branch": self.branch,
            "gamma": [float(g) for g in self.gamma],
            "w": float(self.w),
            "x": None if self.x is None else self.x.tolist(),
            "objective": None if not np.isfinite(self.objective) else float(self.objective),
            "accepted": self.accepted,
            "reason": self.reason,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


@dataclass(frozen=True)
class P1Solution:
    x: np.ndarray
    gamma: np.ndarray
    branch: str
    objective: float
    certificate: KktCertificate
    candidates: list
    slater_point: np.ndarray | None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "gamma": self.gamma.tolist(),
            "branch": self.branch,
            "objective": self.objective,
            "certificate": self.certificate.to_dict(),
            "slater_point": None if self.slater_point is None else self.slater_point.tolist(),
            "candidates": [c.to_dict() for c in self.candidates],
            "notes": list(self.notes),
        }


def quadratic_roots(A: float, B: float, C: float, rtol: float = 1e-14) -> list[float]:
    """Real roots of A t^2 + B t + C, computed without cancellation.

    A leading coefficient below ``rtol`` times the others is treated as zero.
    """
    scale = max(abs(A), abs(B), abs(C))
    if scale == 0.0:
        return []
    if abs(A) <= rtol * scale:
        return [] if abs(B) <= rtol * scale else [-C / B]
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        # Tangency up to rounding gives a double root.
        if disc > -1e-12 * B * B:
            return [-B / (2.0 * A)]
        return []
    root = np.sqrt(disc)
    q = -0.5 * (B + np.copysign(root, B)) if B != 0.0 else -0.5 * root
    roots = {q / A}
    if q != 0.0:
        roots.add(C / q)
    else:
        roots.add(-q / A)
    return sorted(roots)


def _scale(instance: P1Instance) -> float:
    return 1.0 + max(f.scale() for f in instance.constraints)


def _finalize(instance: P1Instance, cand: ActiveSetCandidate, tol: float) -> ActiveSetCandidate:
    """Fill residuals and decide acceptance in original coordinates."""
    if cand.x is None:
        return cand
    eps = tol * (1.0 + _scale(instance) + float(np.abs(instance.z).max(initial=0.0)) ** 2)
    values = np.array([f(cand.x) for f in instance.constraints])
    xbar = cand.x - instance.z
    grad = xbar + sum(g * 2.0 * (f.a * cand.x + f.b) for g, f in zip(cand.gamma, instance.constraints))
    cand.residuals = {
        "primal_violation": max(0.0, float(values.max())),
        "complementarity": float(np.max(np.abs(cand.gamma * values))),
        "stationarity": float(np.linalg.norm(grad)),
    }
    cand.objective = 0.5 * float(xbar @ xbar)
    if cand.reason:
        return cand
    if cand.residuals["primal_violation"] > eps:
        cand.reason = "infeasible"
    elif cand.w < -eps or np.any(cand.gamma < 0):
        cand.reason = "dual infeasible"
    elif cand.residuals["complementarity"] > eps:
        cand.reason = "complementarity"
    elif cand.residuals["stationarity"] > eps:
        cand.reason = "stationarity"
    else:
        cand.accepted = True
    return cand


def _gamma_pair(k: int, g: float) -> np.ndarray:
    gamma = np.zeros(2)
    gamma[k] = g
    return gamma


def solve_empty(instance: P1Instance, tol: float = DEFAULT_TOL) -> list[ActiveSetCandidate]:
    cand = ActiveSetCandidate((), np.zeros(2), 1.0, instance.z.copy(), "Empty")
    return [_finalize(instance, cand, tol)]


def solve_singleton(instance: P1Instance, k: int, tol: float = DEFAULT_TOL) -> list[ActiveSetCandidate]:
    """Candidates with only constraint ``k`` (0-based) active."""
    forms = instance.shifted_one_b()
    a, b, c = forms[k]
    a_o, b_o, c_o = forms[1 - k]
    z = instance.z
    bb = float(b @ b)
    scale = _scale(instance)
    out: list[ActiveSetCandidate] = []
    b_zero = np.sqrt(bb) <= 1e-14 * scale
    if a == 0.0 and b_zero:
        cand = ActiveSetCandidate((k,), np.zeros(2), 1.0, None, "SingletonPositiveW",
                                  reason="constraint has no x-dependence")
        return [cand]
    if a < 0.0 and b_zero:
        # w = 0: every point of the sphere ||xbar||^2 = -c/a is stationary.
        gamma = -1.0 / (2.0 * a)
        r2 = -c / a
        if r2 < 0:
            cand = ActiveSetCandidate((k,), _gamma_pair(k, gamma), 0.0, None, "SingletonZeroW",
                                      reason="sphere radius squared is negative")
        else:
            r = np.sqrt(r2)
            norm_o = np.linalg.norm(b_o)
            if norm_o > 0:
                xbar = -r * b_o / norm_o
            else:
                xbar = np.zeros(instance.n)
                xbar[0] = r
            cand = ActiveSetCandidate((k,), _gamma_pair(k, gamma), 0.0, xbar + z, "SingletonZeroW")
        out.append(_finalize(instance, cand, tol))
        return out
    if a == 0.0:
        gamma = c / bb
        xbar = -gamma * b
        cand = ActiveSetCandidate((k,), _gamma_pair(k, gamma), 1.0, xbar + z, "SingletonPositiveW")
        if gamma <= 0:
            cand.reason = "multiplier not positive"
        out.append(_finalize(instance, cand, tol))
        return out
    roots = quadratic_roots(4 * c * a * a - a * bb, 4 * c * a - bb, c)
    if not roots:
        out.append(ActiveSetCandidate((k,), np.zeros(2), 1.0, None, "SingletonPositiveW",
                                      reason="no real multiplier root"))
    for gamma in roots:
        w = 1.0 + 2.0 * gamma * a
        if gamma <= 0 or w <= 0:
            cand = ActiveSetCandidate((k,), _gamma_pair(k, gamma), w, None, "SingletonPositiveW",
                                      reason="root has gamma <= 0 or w <= 0")
        else:
            xbar = -(gamma / w) * b
            cand = ActiveSetCandidate((k,), _gamma_pair(k, gamma), w, xbar + z, "SingletonPositiveW")
        out.append(_finalize(instance, cand, tol))
    return out


def independent(b1: np.ndarray, b2: np.ndarray, tol: float = INDEPENDENCE_TOL) -> bool:
    """Gram-determinant test that b1 and b2 span a plane."""
    n1, n2 = float(b1 @ b1), float(b2 @ b2)
    if n1 == 0.0 or n2 == 0.0:
        return False
    cos2 = float(b1 @ b2) ** 2 / (n1 * n2)
    return 1.0 - cos2 > tol


def solve_both_active(instance: P1Instance, tol: float = DEFAULT_TOL) -> list[ActiveSetCandidate]:
    """Candidates with both constraints active and w > 0."""
    forms = instance.shifted_one_b()
    swapped = forms[0][0] == 0.0 and forms[1][0] != 0.0
    if swapped:
        forms = forms[::-1]
    (a1, b1, c1), (a2, b2, c2) = forms
    z = instance.z

    def emit(gamma_internal, w, branch, reason=""):
        gamma = gamma_internal[::-1] if swapped else np.asarray(gamma_internal, dtype=float)
        x = None
        if not reason:
            s = gamma_internal[0] * b1 + gamma_internal[1] * b2
            x = -s / w + z
        cand = ActiveSetCandidate((0, 1), np.array(gamma, dtype=float), w, x, branch, reason=reason)
        return _finalize(instance, cand, tol)

    if not independent(b1, b2):
        return [emit(np.zeros(2), 1.0, "BothActive", reason="linear parts are dependent")]
    K = np.array([[b1 @ b1, b1 @ b2], [b2 @ b1, b2 @ b2]])
    if a1 == 0.0 and a2 == 0.0:
        gamma = np.linalg.solve(K, np.array([c1, c2]))
        reason = "" if np.all(gamma >= 0) else "negative multiplier"
        return [emit(gamma, 1.0, "BothLinear", reason)]
    a = np.array([a1, a2])
    K0, K1 = K[0], K[1]
    # Linear equation l^T gamma + l0 = 0 from eliminating ||s||^2.
    l = a2 * K0 - a1 * K1 - 2.0 * (a2 * c1 - a1 * c2) * a
    l0 = -(a2 * c1 - a1 * c2)
    l_norm = float(np.linalg.norm(l))
    if l_norm <= 1e-14 * (1.0 + abs(l0)) * _scale(instance) ** 2:
        return [emit(np.zeros(2), 1.0, "BothActive", reason="degenerate linear equation")]
    gamma_p = -l0 * l / l_norm**2
    d = np.array([-l[1], l[0]]) / l_norm
    # Quadratic a1 ||s||^2 - w b1^T s + c1 w^2 = gamma^T M gamma + q^T gamma + q0.
    M = a1 * K - (np.outer(a, K0) + np.outer(K0, a)) + 4.0 * c1 * np.outer(a, a)
    q = -K0 + 4.0 * c1 * a
    q0 = c1
    A = float(d @ M @ d)
    B = float(2.0 * gamma_p @ M @ d + q @ d)
    C = float(gamma_p @ M @ gamma_p + q @ gamma_p + q0)
    roots = quadratic_roots(A, B, C)
    if not roots:
        return [emit(np.zeros(2), 1.0, "BothActive", reason="no real root on the multiplier line")]
    out = []
    for tau in roots:
        gamma = gamma_p + tau * d
        w = 1.0 + 2.0 * float(a @ gamma)
        if w <= 0:
            out.append(emit(gamma, w, "BothActive", reason="w <= 0"))
        elif np.any(gamma < -tol):
            out.append(emit(gamma, w, "BothActive", reason="negative multiplier"))
        else:
            out.append(emit(np.maximum(gamma, 0.0), w, "BothActive"))
    return out


def _tie_key(cand: ActiveSetCandidate):
    return (round(cand.objective, 12), tuple(np.round(cand.gamma, 12)))


def solve_p1(
    instance: P1Instance,
    tol: float = DEFAULT_TOL,
    cert_tol: float = 1e-7,
    check_slater_point: bool = True,
    seed: int = 42,
) -> P1Solution:
    """Enumerate the four active sets and return the best certified candidate."""
    from .certify import check_slater

    candidates = solve_empty(instance, tol)
    candidates += solve_singleton(instance, 0, tol)
    candidates += solve_singleton(instance, 1, tol)
    candidates += solve_both_active(instance, tol)
    accepted = [c for c in candidates if c.accepted]
    if not accepted:
        raise NoCandidate("no active set yields a KKT point", candidates)
    best = min(accepted, key=_tie_key)
    problem = instance.to_problem()
    notes = []
    slater = None
    if check_slater_point:
        slater = check_slater(problem, seed=seed)
        if slater is not None:
            problem = problem.with_slater(slater)
        else:
            notes.append("no strictly feasible point found")
    if instance.n <= 3:
        notes.append("n <= 3: the two-active-constraint existence result assumes n > 3")
    slater_known = (slater is not None) if check_slater_point else None
    cert = verify_kkt(problem, best.x, best.gamma, tol=cert_tol, slater=slater_known)
    return P1Solution(
        x=best.x,
        gamma=best.gamma,
        branch=best.branch,
        objective=best.objective,
        certificate=cert,
        candidates=candidates,
        slater_point=slater,
        notes=tuple(notes),
    )


def save_p1(instance: P1Instance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n", encoding="utf-8")
