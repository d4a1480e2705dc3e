"""Construct an initial state inside the characteristic set from data alone."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import SystemData, characteristic_margin


class SeedError(RuntimeError):
    pass


@dataclass(frozen=True)
class CharacteristicSeed:
    z: np.ndarray
    mu: float
    x0: np.ndarray
    margin: float

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "mu": self.mu,
            "x0": self.x0.tolist(),
            "margin": self.margin,
        }


def find_positive_cone_point(A) -> np.ndarray:
    """Return ``z > 0`` with ``A z > 0`` by solving ``A z = 1``.

    For a Stieltjes matrix the inverse is entrywise nonnegative with a positive
    diagonal, so the solution is strictly positive.
    """
    A = np.asarray(A, dtype=float)
    ones = np.ones(A.shape[0])
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SeedError(f"A is not positive definite: {exc}") from None
    z = scipy.linalg.cho_solve(factor, ones)
    Az = A @ z
    if not (np.all(z > 0) and np.all(Az > 0)):
        raise SeedError("linear solve did not yield a positive cone point; "
                        "A is numerically singular or not a Stieltjes matrix")
    return z


def scaling_bounds(sys: SystemData, z: np.ndarray) -> np.ndarray:
    """Per-node lower bounds on the scaling factor mu (strict inequalities)."""
    Az = sys.A @ z
    wplus = np.maximum(sys.w, 0.0)
    bminus = np.maximum(-sys.b, 0.0)
    return (wplus + np.sqrt(wplus**2 + 4.0 * Az * bminus / z)) / (2.0 * Az)


def build_characteristic_seed(sys: SystemData, safety: float = 1.05, z=None) -> CharacteristicSeed:
    """Scale a cone point ``z`` (``z > 0``, ``A z > 0``) into the characteristic set.

    ``z`` defaults to the solution of ``A z = 1``; a caller-supplied ``z`` is
    checked, not trusted.
    """
    if not safety > 1.0:
        raise ValueError("safety factor must exceed 1")
    if z is None:
        z = find_positive_cone_point(sys.A)
    else:
        z = np.asarray(z, dtype=float)
        if not (np.all(z > 0) and np.all(sys.A @ z > 0)):
            raise SeedError("supplied z is not in the positive cone {z > 0, A z > 0}")
    bound = float(np.max(scaling_bounds(sys, z)))
    # bound == 0 when w <= 0 and b > 0: any mu > 0 works
    mu = safety * bound if bound > 0 else safety
    x0 = mu * z
    margin = characteristic_margin(sys, x0)
    if not margin > 0:
        raise SeedError(f"scaled seed misses the characteristic set (margin {margin:.3e})")
    return CharacteristicSeed(z=z, mu=mu, x0=x0, margin=margin)
