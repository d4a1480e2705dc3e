"""Characteristic-solution integration and equilibrium classification.

Starting from a point of the characteristic set, the solution of
``x' = f(x)`` decays strictly in every coordinate. Either some coordinate with
``b_i > 0`` hits zero in finite time (no equilibrium exists), or the solution
converges to the dominant equilibrium. ``classify`` runs that test end to end.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (SystemData, ValidationReport, eval_jacobian, eval_rhs,
                    in_characteristic_set, symmetrized, validate_system)
from .seed import CharacteristicSeed, build_characteristic_seed
from .stability import HYPER_TOL, StabilityReport, assess

log = logging.getLogger(__name__)

DOMINANT = "dominant"
NONE = "none"
INCONCLUSIVE = "inconclusive"


class ValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        rules = ", ".join(r for r, _ in report.violations)
        super().__init__(f"system fails validation: {rules}")


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegrationOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10          # relative to the largest seed coordinate
    collapse_threshold: float = 1e-6  # fraction of the initial coordinate
    converge_tol: float = 1e-8      # on max|f|, relative to max(1, max|w|)
    max_time: float = 1e4
    max_steps: int = 200_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "collapse_threshold", "converge_tol",
                     "max_time", "max_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    derivative_negative: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def append(self, t, x, fx):
        self.times.append(float(t))
        self.states.append(np.array(x, dtype=float))
        self.derivative_negative.append(bool(np.all(fx < 0)))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def x(self) -> np.ndarray:
        return np.vstack(self.states)

    @property
    def min_coordinate(self) -> np.ndarray:
        return self.x.min(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = self.states[0].size
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for t, x in zip(self.times, self.states):
            writer.writerow([repr(t)] + [repr(float(v)) for v in x])
        return buf.getvalue()


@dataclass(frozen=True)
class RawOutcome:
    kind: str                       # "collapsed" | "converged" | "budget"
    state: np.ndarray
    time: float
    indices: tuple = ()             # collapsed coordinates, 0-based


# Dormand-Prince 5(4) tableau (autonomous field, stage times unused)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(sys, x, fx, h):
    """One Dormand-Prince step. Returns None if a stage leaves the orthant."""
    K = np.empty((7, x.size))
    K[0] = fx
    for s in range(1, 7):
        xs = x + h * (np.dot(_A[s], K[:s]))
        if not np.all(xs > 0):
            return None
        K[s] = -sys.A @ xs - sys.b / xs + sys.w
    # stage 7 is evaluated at the 5th order solution (FSAL)
    x_new = x + h * (_B5 @ K)
    err = h * (_E @ K)
    return x_new, K[6], err


class _Stepper:
    def __init__(self, sys: SystemData, x0, opts: IntegrationOptions):
        self.sys = sys
        self.opts = opts
        self.x0 = np.array(x0, dtype=float)
        self.atol = opts.abs_tol * float(np.max(self.x0))
        # step-error noise in x shows up in f amplified by up to ||A||; keep it
        # well below the convergence threshold so convergence stays detectable
        self.err_cap = 0.1 * opts.converge_tol * sys.scale / float(np.max(np.sum(np.abs(sys.A), axis=1)))

    def tolerance(self, x):
        return np.minimum(self.atol + self.opts.rel_tol * x, self.err_cap)

    def initial_step(self, x, fx) -> float:
        sc = self.tolerance(np.abs(x))
        d0 = np.max(np.abs(x) / sc)
        d1 = np.max(np.abs(fx) / sc)
        h = 0.01 * d0 / d1 if d1 > 1e-300 else 1e-6
        return min(h, self.opts.max_time)

    def attempt(self, x, fx, h):
        """Try one step; returns (x_new, f_new, err_norm) or None on domain exit."""
        res = _dp_step(self.sys, x, fx, h)
        if res is None:
            return None
        x_new, f_new, err = res
        if not np.all(x_new > 0) or not np.all(np.isfinite(f_new)):
            return None
        sc = self.tolerance(np.maximum(np.abs(x), np.abs(x_new)))
        return x_new, f_new, float(np.max(np.abs(err) / sc))

    @staticmethod
    def next_h(h, err):
        if err == 0:
            return 5.0 * h
        return h * min(5.0, max(0.2, 0.9 * err ** -0.2))


def integrate_characteristic(sys: SystemData, x0, opts: Optional[IntegrationOptions] = None,
                             check_start: bool = True):
    """Integrate ``x' = f(x)`` from ``x0`` until collapse, convergence or budget.

    Returns ``(Trajectory, RawOutcome)``. ``check_start=False`` allows starts
    outside the characteristic set (used for comparison and attraction tests).
    """
    opts = opts or IntegrationOptions()
    x = np.array(x0, dtype=float)
    if not np.all(x > 0):
        raise ValueError("x0 must be strictly positive")
    if check_start and not in_characteristic_set(sys, x):
        raise ValueError("x0 is not in the characteristic set")

    stepper = _Stepper(sys, x, opts)
    threshold = opts.collapse_threshold * x
    can_collapse = sys.b > 0
    conv = opts.converge_tol * sys.scale

    traj = Trajectory()
    t = 0.0
    fx = eval_rhs(sys, x)
    traj.append(t, x, fx)
    if np.max(np.abs(fx)) <= conv:
        traj.events.append((t, "converged"))
        return traj, RawOutcome("converged", x, t)

    h = stepper.initial_step(x, fx)
    steps = 0
    while steps < opts.max_steps and t < opts.max_time:
        h = min(h, opts.max_time - t)
        if h <= _min_step(t):
            # the step size underflowed; a coordinate heading to zero this fast
            # is a collapse whose last stretch is below time resolution
            near = can_collapse & (fx < 0) & (x < np.sqrt(opts.collapse_threshold) * stepper.x0)
            if np.any(near):
                traj.events.append((t, "collapse"))
                return traj, RawOutcome("collapsed", x, t, tuple(int(i) for i in np.flatnonzero(near)))
            break
        res = stepper.attempt(x, fx, h)
        steps += 1
        if res is None:
            h *= 0.5
            continue
        x_new, f_new, err = res
        if err > 1.0:
            h = stepper.next_h(h, err)
            continue

        hit = (x_new < threshold) & can_collapse & (f_new < 0)
        if np.any(hit):
            t_c, x_c = _localize_collapse(stepper, x, fx, h, threshold, can_collapse)
            traj.append(t + t_c, x_c, eval_rhs(sys, x_c))
            idx = tuple(int(i) for i in np.flatnonzero(hit | ((x_c < threshold) & can_collapse)))
            traj.events.append((t + t_c, "collapse"))
            return traj, RawOutcome("collapsed", x_c, t + t_c, idx)

        t += h
        x, fx = x_new, f_new
        traj.append(t, x, fx)
        if np.max(np.abs(fx)) <= conv:
            traj.events.append((t, "converged"))
            return traj, RawOutcome("converged", x, t)
        h = stepper.next_h(h, err)

    traj.events.append((t, "budget"))
    return traj, RawOutcome("budget", x, t)


def _min_step(t):
    return 4.0 * np.finfo(float).eps * t if t > 0 else np.finfo(float).tiny


def _localize_collapse(stepper, x, fx, h, threshold, can_collapse, rel=1e-3):
    """Bisect the step length for the threshold crossing to ``rel`` of the step."""
    def crossed(hh):
        res = _dp_step(stepper.sys, x, fx, hh)
        if res is None:
            return True, None
        xn = res[0]
        if not np.all(xn > 0):
            return True, None
        return bool(np.any((xn < threshold) & can_collapse)), xn

    lo, hi = 0.0, h
    x_hi = None
    while hi - lo > rel * h:
        mid = 0.5 * (lo + hi)
        c, xm = crossed(mid)
        if c:
            hi = mid
            if xm is not None:
                x_hi = xm
        else:
            lo = mid
    if x_hi is None:
        _, x_hi = crossed(hi)
        if x_hi is None:
            x_hi = np.maximum(x + hi * fx, np.finfo(float).tiny)
    return hi, x_hi


def integrate_on_grid(sys: SystemData, x0, times, opts: Optional[IntegrationOptions] = None):
    """States at prescribed ``times`` (steps are clipped to land on them).

    Rows after a collapse (a coordinate leaving the orthant) are NaN.
    """
    opts = opts or IntegrationOptions()
    times = np.asarray(times, dtype=float)
    x = np.array(x0, dtype=float)
    out = np.full((times.size, x.size), np.nan)
    stepper = _Stepper(sys, x, opts)
    fx = eval_rhs(sys, x)
    t = 0.0
    h = stepper.initial_step(x, fx)
    k = 0
    while k < times.size and times[k] <= t:
        out[k] = x
        k += 1
    steps = 0
    while k < times.size and steps < opts.max_steps:
        target = times[k]
        hh = min(h, target - t)
        if hh <= _min_step(t):
            break
        res = stepper.attempt(x, fx, hh)
        steps += 1
        if res is None:
            h = 0.5 * hh
            continue
        x_new, f_new, err = res
        if err > 1.0:
            h = stepper.next_h(hh, err)
            continue
        t = target if hh == target - t else t + hh
        x, fx = x_new, f_new
        if t >= target:
            out[k] = x
            k += 1
            if hh < h:
                # clipped step: keep the unclipped proposal
                continue
        h = stepper.next_h(hh, err)
    return out


def refine_equilibrium(sys: SystemData, x_approx, tol: Optional[float] = None,
                       max_iter: int = 100) -> np.ndarray:
    """Damped Newton polish of ``f(x) = 0`` that keeps iterates positive.

    Iterates past ``tol`` while the residual keeps shrinking, so the result is
    accurate to roundoff. Raises ``RefinementError`` if ``tol`` is not reached.
    """
    tol = 1e-9 * sys.scale if tol is None else tol
    x = np.array(x_approx, dtype=float)
    if not np.all(x > 0):
        raise RefinementError("starting point must be positive")
    r = eval_rhs(sys, x)
    rn = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if rn == 0.0:
            break
        try:
            dx = np.linalg.solve(eval_jacobian(sys, x), -r)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(dx)):
            break
        lam = 1.0
        accepted = False
        while lam > 1e-10:
            xn = x + lam * dx
            if np.all(xn > 0):
                rnew = eval_rhs(sys, xn)
                rnn = float(np.max(np.abs(rnew)))
                if rnn < rn:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            break
        progress = rnn / rn
        x, r, rn = xn, rnew, rnn
        if rn <= tol and (progress > 0.9 or np.max(np.abs(lam * dx) / x) < 1e-15):
            break
    if not rn <= tol:
        raise RefinementError(f"Newton stalled at residual {rn:.3e} (tol {tol:.3e})")
    return x


@dataclass
class Outcome:
    kind: str
    seed: Optional[CharacteristicSeed] = None
    x_max: Optional[np.ndarray] = None
    residual: Optional[float] = None
    stability: Optional[StabilityReport] = None
    collapsed: tuple = ()           # 0-based coordinate indices
    t_collapse: Optional[float] = None
    last_state: Optional[np.ndarray] = None
    reason: Optional[str] = None
    non_hyperbolic_suspect: bool = False
    warnings: list = field(default_factory=list)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == DOMINANT:
            out["x_max"] = self.x_max.tolist()
            out["residual"] = self.residual
        elif self.kind == NONE:
            out["collapsed"] = [i + 1 for i in self.collapsed]
            out["t_collapse"] = self.t_collapse
        else:
            out["reason"] = self.reason
            out["non_hyperbolic_suspect"] = self.non_hyperbolic_suspect
            if self.last_state is not None:
                out["last_state"] = self.last_state.tolist()
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def classify(sys: SystemData, opts: Optional[IntegrationOptions] = None,
             safety: float = 1.05, hyper_tol: float = HYPER_TOL) -> Outcome:
    """Decide existence of equilibria and compute the dominant one."""
    opts = opts or IntegrationOptions()
    report = validate_system(sys)
    if not report.passed:
        raise ValidationError(report)
    warnings = [f"{rule}: {detail}" for rule, detail in report.warnings]
    sys = symmetrized(sys)

    seed = build_characteristic_seed(sys, safety)
    traj, raw = integrate_characteristic(sys, seed.x0, opts)
    common = dict(seed=seed, warnings=warnings, trajectory=traj)

    if raw.kind == "collapsed":
        return Outcome(NONE, collapsed=raw.indices, t_collapse=raw.time, **common)
    if raw.kind == "budget":
        log.info("integration budget exhausted at t=%g", raw.time)
        return Outcome(INCONCLUSIVE, reason="budget_exhausted", last_state=raw.state, **common)

    try:
        x_bar = refine_equilibrium(sys, raw.state)
    except RefinementError as exc:
        log.info("refinement failed: %s", exc)
        return Outcome(INCONCLUSIVE, reason="newton_failed", last_state=raw.state,
                       non_hyperbolic_suspect=True, **common)
    stab = assess(sys, x_bar, hyper_tol)
    residual = float(np.max(np.abs(eval_rhs(sys, x_bar))))
    if stab.non_hyperbolic:
        return Outcome(INCONCLUSIVE, reason="non_hyperbolic", last_state=x_bar,
                       stability=stab, residual=residual, non_hyperbolic_suspect=True, **common)
    return Outcome(DOMINANT, x_max=x_bar, residual=residual, stability=stab, **common)
