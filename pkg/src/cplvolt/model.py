"""Canonical form of the constant-power-load steady-state problem.

The steady state of every network handled by this package reduces to

    A x + stack(b_i / x_i) - w = 0,    x > 0,

and the associated vector field is ``f(x) = -A x - b / x + w``. ``A`` must be a
Stieltjes matrix (symmetric positive definite, non-positive off-diagonals).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SYM_TOL = 1e-10


class DomainError(ValueError):
    """Raised when a state leaves the positive orthant."""


class ParseError(ValueError):
    """Raised for malformed input documents."""


@dataclass(frozen=True)
class SystemData:
    A: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float).reshape(-1)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        n = b.size
        if A.shape != (n, n) or w.shape != (n,) or n == 0:
            raise ValueError(f"inconsistent shapes: A{A.shape}, b{b.shape}, w{w.shape}")
        for arr in (A, b, w):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.b.size

    @property
    def scale(self) -> float:
        """Residual scale used by the convergence and refinement tolerances."""
        return max(1.0, float(np.max(np.abs(self.w))))

    def with_b(self, b) -> "SystemData":
        return SystemData(self.A, b, self.w)

    def to_dict(self) -> dict:
        return {
            "model": "raw",
            "n": self.n,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "w": self.w.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemData":
        try:
            n = doc["n"]
            A, b, w = doc["A"], doc["b"], doc["w"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"raw system needs n, A, b, w: missing {exc}") from None
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ParseError("n must be a positive integer")
        if (not isinstance(A, list) or len(A) != n
                or any(not isinstance(row, list) or len(row) != n for row in A)):
            raise ParseError(f"A must be a {n}x{n} array of arrays")
        for name, vec in (("b", b), ("w", w)):
            if not isinstance(vec, list) or len(vec) != n:
                raise ParseError(f"{name} must be a list of length {n}")
        values = [v for row in A for v in row] + list(b) + list(w)
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParseError(f"non-finite or non-numeric entry: {v!r}")
        return cls(A, b, w)


def _reject_constant(name):
    raise ParseError(f"non-finite literal {name} is not allowed")


def loads_document(text: str) -> dict:
    """Parse a JSON document, refusing NaN and Infinity literals."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from None
    if not isinstance(doc, dict):
        raise ParseError("top-level document must be an object")
    return doc


def dumps_system(sys: SystemData) -> str:
    return json.dumps(sys.to_dict(), indent=2)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [{"rule": r, "detail": d} for r, d in self.violations],
            "warnings": [{"rule": r, "detail": d} for r, d in self.warnings],
        }


def validate_system(sys: SystemData, sym_tol: float = SYM_TOL) -> ValidationReport:
    """Check the structural assumptions on ``(A, b, w)``.

    Failures are collected in the report rather than raised. ``b_i == 0`` is
    only a warning: the vector field stays smooth, but results obtained for
    such data carry the flag.
    """
    report = ValidationReport()
    A = sys.A
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(sys.b)) and np.all(np.isfinite(sys.w))):
        report.violations.append(("finite", "non-finite entries in A, b or w"))
        return report

    amax = float(np.max(np.abs(A))) if A.size else 0.0
    asym = float(np.max(np.abs(A - A.T)))
    symmetric = asym <= sym_tol * amax
    if not symmetric:
        report.violations.append(("symmetric", f"max|A_ij - A_ji| = {asym:.3e}"))

    off = A - np.diag(np.diag(A))
    if np.any(off > 0):
        i, j = np.argwhere(off > 0)[0]
        report.violations.append(
            ("offdiag_nonpositive", f"A[{i + 1},{j + 1}] = {A[i, j]:.6g} > 0"))

    if symmetric and not is_positive_definite(0.5 * (A + A.T)):
        report.violations.append(("positive_definite", "Cholesky factorization failed"))

    zero_b = np.flatnonzero(sys.b == 0)
    if zero_b.size:
        nodes = ", ".join(str(i + 1) for i in zero_b)
        report.warnings.append(("b_nonzero", f"b_i = 0 at node(s) {nodes}"))
    return report


def is_positive_definite(M: np.ndarray) -> bool:
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    # numpy may factor matrices whose smallest pivot is pure roundoff
    d = np.abs(np.diag(L))
    return bool(np.all(d > 0) and d.min() ** 2 > 1e-14 * float(np.max(np.abs(M))))


def symmetrized(sys: SystemData) -> SystemData:
    return SystemData(0.5 * (sys.A + sys.A.T), sys.b, sys.w)


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError("state must lie in the open positive orthant")
    return x


def eval_rhs(sys: SystemData, x) -> np.ndarray:
    x = _positive(x)
    return -sys.A @ x - sys.b / x + sys.w


def eval_jacobian(sys: SystemData, x) -> np.ndarray:
    x = _positive(x)
    return -sys.A + np.diag(sys.b / x**2)


def characteristic_margin(sys: SystemData, x) -> float:
    """Smallest slack of the inequalities defining the characteristic set."""
    x = _positive(x)
    wplus = np.maximum(sys.w, 0.0)
    bminus = np.maximum(-sys.b, 0.0)
    return float(np.min(sys.A @ x - wplus - bminus / x))


def in_characteristic_set(sys: SystemData, x, margin: float = 0.0) -> bool:
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        return False
    return characteristic_margin(sys, x) > margin
