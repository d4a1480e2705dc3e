"""Brute-force equilibrium enumeration for one- and two-node systems.

These routines do not use the characteristic-solution machinery and serve as
an independent check of ``classify``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import SystemData, eval_rhs
from .seed import build_characteristic_seed

CASE_UNIQUE_STABLE = "a"      # one globally attractive equilibrium
CASE_NONE = "b"               # finite-time collapse from everywhere
CASE_DOUBLE = "c"             # one non-hyperbolic equilibrium
CASE_TWO = "d"                # unstable lower and stable upper equilibrium


@dataclass
class EquilibriumList:
    points: list = field(default_factory=list)     # [(x, hurwitz)], sorted
    exhaustive: bool = False
    case: Optional[str] = None
    grid_density: Optional[int] = None

    @property
    def exists(self) -> bool:
        return bool(self.points)

    def dominant(self) -> Optional[np.ndarray]:
        """Componentwise maximum point, or None if none dominates all others."""
        if not self.points:
            return None
        X = np.array([p for p, _ in self.points])
        top = X.max(axis=0)
        for p in X:
            if np.all(np.abs(p - top) <= 1e-9 * np.maximum(1.0, np.abs(top))):
                return p
        return None

    def to_dict(self) -> dict:
        out = {
            "points": [{"x": np.asarray(p).tolist(), "hurwitz": bool(h)} for p, h in self.points],
            "exhaustive": self.exhaustive,
        }
        if self.case is not None:
            out["case"] = self.case
        if self.grid_density is not None:
            out["grid_density"] = self.grid_density
        return out


def solve_scalar(a: float, b: float, w: float) -> EquilibriumList:
    """Positive roots of ``a x^2 - w x + b = 0`` labelled by stability."""
    if not a > 0 or b == 0:
        raise ValueError("need a > 0 and b != 0")
    disc = w * w - 4.0 * a * b
    scale = max(w * w, 4.0 * a * abs(b))
    if abs(disc) <= 1e-14 * scale:
        x = w / (2.0 * a)
        if x > 0:
            return EquilibriumList([(np.array([x]), False)], True, CASE_DOUBLE)
        return EquilibriumList([], True, CASE_NONE)
    if disc < 0:
        return EquilibriumList([], True, CASE_NONE)
    sq = math.sqrt(disc)
    # cancellation-free pair of roots
    q = -0.5 * (-w + math.copysign(sq, -w))
    roots = sorted({q / a, b / q})
    pos = [x for x in roots if x > 0]
    points = [(np.array([x]), bool(-a + b / x**2 < 0)) for x in pos]
    if not points:
        case = CASE_NONE
    elif len(points) == 1:
        case = CASE_UNIQUE_STABLE
    else:
        case = CASE_TWO
    return EquilibriumList(points, True, case)


def search_box(sys: SystemData, safety: float = 1.05):
    """Box containing every equilibrium: ``[lo, hi]`` per coordinate.

    Every equilibrium lies below the characteristic seed, and has
    ``x_i >= |b_i| / (2 W)`` with ``W = max_i(|w_i| + c sum_j |A_ij|)``.
    """
    x0 = build_characteristic_seed(sys, safety).x0
    c = float(np.linalg.norm(x0))
    W = float(np.max(np.abs(sys.w) + c * np.sum(np.abs(sys.A), axis=1)))
    lo = 0.5 * np.abs(sys.b) / W
    lo = np.where(lo > 0, lo, 1e-12 * x0)
    return lo, 1.01 * x0


def _newton(sys, x, tol, max_iter=60, polish=3):
    for _ in range(max_iter):
        r = eval_rhs(sys, x)
        rn = np.max(np.abs(r))
        if rn <= tol:
            polish -= 1
            if polish < 0 or rn == 0:
                return x
        J = -sys.A + np.diag(sys.b / x**2)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-8:
            xn = x + lam * dx
            if np.all(xn > 0) and np.max(np.abs(eval_rhs(sys, xn))) < rn:
                break
            lam *= 0.5
        else:
            return x if rn <= tol else None
        x = xn
    r = eval_rhs(sys, x)
    return x if np.max(np.abs(r)) <= tol else None


def enumerate_equilibria_2d(sys: SystemData, grid_density: int = 400) -> EquilibriumList:
    """Scan a log grid for cells where both residual components change sign,
    polish each candidate with Newton and deduplicate."""
    if sys.n != 2:
        raise ValueError("enumerate_equilibria_2d needs a two-node system")
    lo, hi = search_box(sys)
    g1 = np.geomspace(lo[0], hi[0], grid_density + 1)
    g2 = np.geomspace(lo[1], hi[1], grid_density + 1)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    A, b, w = sys.A, sys.b, sys.w
    F1 = -A[0, 0] * X1 - A[0, 1] * X2 - b[0] / X1 + w[0]
    F2 = -A[1, 0] * X1 - A[1, 1] * X2 - b[1] / X2 + w[1]

    def changes(F):
        corners = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    cells = np.argwhere(changes(F1) & changes(F2))
    tol = 1e-9 * sys.scale
    found = []
    for i, j in cells:
        start = np.array([math.sqrt(g1[i] * g1[i + 1]), math.sqrt(g2[j] * g2[j + 1])])
        x = _newton(sys, start, tol)
        if x is None:
            continue
        if all(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1.0)) > 1e-6 for y in found):
            found.append(x)
    found.sort(key=lambda p: tuple(p))
    points = []
    for x in found:
        J = -A + np.diag(b / x**2)
        points.append((x, bool(np.max(np.linalg.eigvalsh(J)) < 0)))
    return EquilibriumList(points, exhaustive=False, grid_density=grid_density)


def enumerate_equilibria(sys: SystemData, grid_density: int = 400) -> EquilibriumList:
    if sys.n == 1:
        return solve_scalar(float(sys.A[0, 0]), float(sys.b[0]), float(sys.w[0]))
    if sys.n == 2:
        return enumerate_equilibria_2d(sys, grid_density)
    raise ValueError("oracle enumeration supports n <= 2 only")
