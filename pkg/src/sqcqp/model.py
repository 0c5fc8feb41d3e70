"""Scalar-identity quadratic functionals and S-QCQP problem instances.

Every functional in this package uses the "two-b" convention::

    f(x) = a * ||x||^2 + 2 * b^T x + c

Inputs written in the "one-b" convention (``a ||x||^2 + b^T x + c``) are
converted on load by halving ``b``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

CONVENTIONS = ("two-b", "one-b")


class DimensionError(ValueError):
    """Raised when vector lengths disagree with the problem dimension."""


class ProblemFormatError(ValueError):
    """Raised when a problem file cannot be parsed."""


def _as_vector(x, n: int | None = None, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class QuadForm:
    """f(x) = a ||x||^2 + 2 b^T x + c."""

    a: float
    b: np.ndarray
    c: float

    def __post_init__(self):
        b = _as_vector(self.b, name="b").copy()
        b.setflags(write=False)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "b", b)
        if not (np.isfinite(self.a) and np.isfinite(self.c) and np.all(np.isfinite(b))):
            raise ValueError("QuadForm coefficients must be finite")

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuadForm):
            return NotImplemented
        return self.a == other.a and self.c == other.c and np.array_equal(self.b, other.b)

    def __hash__(self) -> int:
        return hash((self.a, self.c, self.b.tobytes()))

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @classmethod
    def from_one_b(cls, a, b, c) -> "QuadForm":
        """Build from a ||x||^2 + b^T x + c."""
        return cls(a, 0.5 * np.asarray(b, dtype=float), c)

    def one_b(self) -> tuple[float, np.ndarray, float]:
        return self.a, 2.0 * self.b, self.c

    def shifted(self, z) -> "QuadForm":
        """Return g with g(xbar) = f(xbar + z)."""
        z = _as_vector(z, self.n, "z")
        return QuadForm(
            self.a,
            self.b + self.a * z,
            self.a * float(z @ z) + 2.0 * float(self.b @ z) + self.c,
        )

    def scale(self) -> float:
        return max(abs(self.a), float(np.max(np.abs(self.b), initial=0.0)), abs(self.c))

    def __call__(self, x) -> float:
        return eval_quad(self, x)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b.tolist(), "c": self.c}


def eval_quad(f: QuadForm, x) -> float:
    x = _as_vector(x, f.n)
    return f.a * float(x @ x) + 2.0 * float(f.b @ x) + f.c


def grad(f: QuadForm, x) -> np.ndarray:
    x = _as_vector(x, f.n)
    return 2.0 * f.a * x + 2.0 * f.b


class QuadMin(NamedTuple):
    """Global infimum of a scalar quadratic; ``argmin`` is None when unbounded."""

    value: float
    argmin: np.ndarray | None

    @property
    def bounded(self) -> bool:
        return self.argmin is not None


def global_min_scalar_quadratic(f: QuadForm) -> QuadMin:
    if f.a > 0:
        x = -f.b / f.a
        return QuadMin(f.c - float(f.b @ f.b) / f.a, x)
    if f.a == 0 and not np.any(f.b):
        return QuadMin(f.c, np.zeros(f.n))
    return QuadMin(-np.inf, None)


def combine(weights: Sequence[float], forms: Sequence[QuadForm]) -> QuadForm:
    """Nonnegative-free linear combination sum_k w_k f_k."""
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(forms):
        raise DimensionError("one weight per functional required")
    a = float(sum(w * f.a for w, f in zip(weights, forms)))
    b = sum((w * f.b for w, f in zip(weights, forms)), np.zeros(forms[0].n))
    c = float(sum(w * f.c for w, f in zip(weights, forms)))
    return QuadForm(a, b, c)


@dataclass(frozen=True)
class EvalReport:
    values: np.ndarray
    objective: float
    max_violation: float
    active_set: tuple[int, ...]


@dataclass(frozen=True)
class SQcqpProblem:
    """min J(x) s.t. f_k(x) <= 0, k = 1..m, every quadratic part a scalar times I.

    ``slater_point`` records a strictly feasible point once one is known;
    certification refuses to claim global optimality without it.
    """

    objective: QuadForm
    constraints: tuple[QuadForm, ...]
    slater_point: np.ndarray | None = field(default=None, compare=False)
    convention: str = field(default="two-b", init=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.constraints) < 1:
            raise ValueError("at least one constraint is required")
        n = self.objective.n
        for k, f in enumerate(self.constraints, start=1):
            if f.n != n:
                raise DimensionError(f"constraint {k} has dimension {f.n}, objective has {n}")
        if self.slater_point is not None:
            x0 = _as_vector(self.slater_point, n, "slater_point").copy()
            x0.setflags(write=False)
            object.__setattr__(self, "slater_point", x0)

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def dimension_ok(self) -> bool:
        return self.m + 1 < self.n

    @property
    def functionals(self) -> tuple[QuadForm, ...]:
        return (self.objective,) + self.constraints

    @property
    def a(self) -> np.ndarray:
        return np.array([f.a for f in self.constraints])

    @property
    def B(self) -> np.ndarray:
        """Rows b_k of the constraints (m x n)."""
        return np.array([f.b for f in self.constraints])

    @property
    def c(self) -> np.ndarray:
        return np.array([f.c for f in self.constraints])

    def coefficient_scale(self) -> float:
        return max(f.scale() for f in self.functionals)

    def with_slater(self, x0) -> "SQcqpProblem":
        return SQcqpProblem(self.objective, self.constraints, slater_point=x0)

    def constraint_values(self, x) -> np.ndarray:
        x = _as_vector(x, self.n)
        return self.a * float(x @ x) + 2.0 * (self.B @ x) + self.c

    def max_violation(self, x) -> float:
        return max(0.0, float(np.max(self.constraint_values(x))))

    def evaluate(self, x, tol_active: float = 1e-8) -> EvalReport:
        values = self.constraint_values(x)
        thresh = tol_active * (1.0 + np.maximum(np.abs(values), self.coefficient_scale()))
        active = tuple(int(k) for k in np.flatnonzero(np.abs(values) <= thresh))
        return EvalReport(
            values=values,
            objective=eval_quad(self.objective, x),
            max_violation=max(0.0, float(np.max(values))),
            active_set=active,
        )

    def aggregate(self, gamma) -> QuadForm:
        return aggregate(gamma, self)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "convention": "two-b",
            "objective": self.objective.to_dict(),
            "constraints": [f.to_dict() for f in self.constraints],
        }


def aggregate(gamma, problem: SQcqpProblem) -> QuadForm:
    """Lagrangian functional J + sum_k gamma_k f_k."""
    gamma = _as_vector(gamma, problem.m, "gamma")
    if np.any(gamma < 0):
        raise ValueError("multipliers must be nonnegative")
    return combine(np.concatenate([[1.0], gamma]), problem.functionals)


def _form_from_dict(d: dict, n: int, convention: str, where: str) -> QuadForm:
    try:
        a, b, c = d["a"], d["b"], d["c"]
    except (KeyError, TypeError) as exc:
        raise ProblemFormatError(f"{where}: expected keys a, b, c") from exc
    if not isinstance(b, list) or len(b) != n:
        raise ProblemFormatError(f"{where}: b must be a list of length {n}")
    try:
        if convention == "one-b":
            return QuadForm.from_one_b(a, b, c)
        return QuadForm(a, b, c)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc


def _read_json(source) -> dict:
    if isinstance(source, dict):
        return source
    try:
        text = Path(source).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFormatError(str(exc)) from exc
    if not isinstance(data, dict):
        raise ProblemFormatError("top-level JSON value must be an object")
    return data


def _read_header(data: dict) -> tuple[int, str]:
    n = data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError("'n' must be a positive integer")
    convention = data.get("convention", "two-b")
    if convention not in CONVENTIONS:
        raise ProblemFormatError(f"unknown convention {convention!r}")
    return n, convention


def load_problem(source) -> SQcqpProblem:
    """Read a problem file (path or already-parsed dict)."""
    data = _read_json(source)
    n, convention = _read_header(data)
    if "objective" not in data:
        raise ProblemFormatError("missing 'objective'")
    cons = data.get("constraints")
    if not isinstance(cons, list) or not cons:
        raise ProblemFormatError("'constraints' must be a non-empty list")
    objective = _form_from_dict(data["objective"], n, convention, "objective")
    constraints = [
        _form_from_dict(d, n, convention, f"constraints[{k}]") for k, d in enumerate(cons)
    ]
    return SQcqpProblem(objective, constraints)


def save_problem(problem: SQcqpProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_dict(), indent=2) + "\n", encoding="utf-8")
