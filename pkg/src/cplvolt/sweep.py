"""Feasibility map over a two-parameter slice of the power vector ``b``."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import DOMINANT, INCONCLUSIVE, NONE, IntegrationOptions, classify
from .model import SystemData


@dataclass(frozen=True)
class SweepSpec:
    base: SystemData
    axis_i: int
    axis_j: int
    range_i: tuple          # (lo, hi, steps)
    range_j: tuple

    def __post_init__(self):
        n = self.base.n
        if self.axis_i == self.axis_j or not (0 <= self.axis_i < n and 0 <= self.axis_j < n):
            raise ValueError("axis indices must be distinct and < n")
        for lo, hi, steps in (self.range_i, self.range_j):
            if not (np.isfinite(lo) and np.isfinite(hi)) or int(steps) < 2:
                raise ValueError("ranges must be finite with at least 2 steps")

    def values(self):
        gi = np.linspace(self.range_i[0], self.range_i[1], int(self.range_i[2]))
        gj = np.linspace(self.range_j[0], self.range_j[1], int(self.range_j[2]))
        return gi, gj


@dataclass
class RegionMap:
    b_i: np.ndarray
    b_j: np.ndarray
    kinds: np.ndarray                       # object array of outcome kinds
    x_max: dict = field(default_factory=dict)   # (p, q) -> x_max
    warnings: list = field(default_factory=list)
    transitions: list = field(default_factory=list)

    @property
    def boundary(self) -> list:
        """Dominant cells with an infeasible 4-neighbour."""
        out = []
        P, Q = self.kinds.shape
        for p in range(P):
            for q in range(Q):
                if self.kinds[p, q] != DOMINANT:
                    continue
                for dp, dq in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    pp, qq = p + dp, q + dq
                    if 0 <= pp < P and 0 <= qq < Q and self.kinds[pp, qq] == NONE:
                        out.append((p, q))
                        break
        return out

    def to_csv(self, n: int) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["b_i", "b_j", "outcome"] + [f"x{k + 1}" for k in range(n)])
        for p, bi in enumerate(self.b_i):
            for q, bj in enumerate(self.b_j):
                row = [repr(float(bi)), repr(float(bj)), self.kinds[p, q]]
                x = self.x_max.get((p, q))
                row += [repr(float(v)) for v in x] if x is not None else [""] * n
                writer.writerow(row)
        return buf.getvalue()


def _cell(args):
    base, axis_i, axis_j, bi, bj, opts = args
    b = np.array(base.b)
    b[axis_i], b[axis_j] = bi, bj
    try:
        out = classify(base.with_b(b), opts)
    except Exception as exc:    # a cell never aborts the sweep
        return INCONCLUSIVE, None, f"b=({bi!r}, {bj!r}): {exc}"
    return out.kind, out.x_max, None


def sweep(spec: SweepSpec, opts: Optional[IntegrationOptions] = None, workers: int = 1,
          refine: bool = False) -> RegionMap:
    """Classify every grid cell independently (no warm starts between cells)."""
    opts = opts or IntegrationOptions()
    gi, gj = spec.values()
    jobs = [(spec.base, spec.axis_i, spec.axis_j, float(bi), float(bj), opts)
            for bi in gi for bj in gj]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_cell(job) for job in jobs]

    kinds = np.empty((gi.size, gj.size), dtype=object)
    region = RegionMap(gi, gj, kinds)
    for idx, (kind, x, warn) in enumerate(results):
        p, q = divmod(idx, gj.size)
        kinds[p, q] = kind
        if x is not None:
            region.x_max[(p, q)] = x
        if warn:
            region.warnings.append(warn)
        if gi[p] == 0 or gj[q] == 0:
            region.warnings.append(f"b=({gi[p]!r}, {gj[q]!r}): zero power coefficient")

    if refine:
        P, Q = kinds.shape
        for p in range(P):
            for q in range(Q):
                for pp, qq in ((p + 1, q), (p, q + 1)):
                    if pp < P and qq < Q and {kinds[p, q], kinds[pp, qq]} == {DOMINANT, NONE}:
                        a = (gi[p], gj[q]), (gi[pp], gj[qq])
                        feas, infeas = a if kinds[p, q] == DOMINANT else a[::-1]
                        region.transitions.append(
                            refine_transition(spec.base, spec.axis_i, spec.axis_j,
                                              feas, infeas, opts))
    return region


def refine_transition(base: SystemData, axis_i: int, axis_j: int, feasible, infeasible,
                      opts: Optional[IntegrationOptions] = None, rel: float = 1e-3):
    """Bisect the segment between a feasible and an infeasible ``(b_i, b_j)``.

    Returns the final ``(feasible, infeasible)`` bracket, at most ``rel``
    apart relative to the size of the feasible point.
    """
    lo = np.asarray(feasible, dtype=float)
    hi = np.asarray(infeasible, dtype=float)
    while np.linalg.norm(hi - lo) > rel * max(np.linalg.norm(lo), 1e-300):
        mid = 0.5 * (lo + hi)
        kind, _, _ = _cell((base, axis_i, axis_j, mid[0], mid[1], opts))
        if kind == DOMINANT:
            lo = mid
        elif kind == NONE:
            hi = mid
        else:
            break
    return tuple(lo), tuple(hi)
