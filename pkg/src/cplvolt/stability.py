"""Spectral checks at a computed equilibrium."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DomainError, SystemData, eval_jacobian

HYPER_TOL = 1e-6


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    hurwitz: bool
    hyperbolicity_margin: float
    non_hyperbolic: bool
    # None when b has mixed signs: uniqueness is only known for same-sign b
    unique_stable: Optional[bool]

    @property
    def long_term_stable(self) -> bool:
        return self.hurwitz

    def to_dict(self) -> dict:
        out = {
            "eigenvalues": self.eigenvalues.tolist(),
            "hurwitz": self.hurwitz,
            "long_term_stable": self.long_term_stable,
            "hyperbolicity_margin": self.hyperbolicity_margin,
            "non_hyperbolic_suspect": self.non_hyperbolic,
        }
        if self.unique_stable is not None:
            out["unique_stable"] = self.unique_stable
        return out


def same_sign(b) -> bool:
    b = np.asarray(b)
    return bool(np.all(b > 0) or np.all(b < 0))


def assess(sys: SystemData, x_bar, hyper_tol: float = HYPER_TOL) -> StabilityReport:
    """Eigen-analysis of the (symmetric) Jacobian at ``x_bar``.

    The hyperbolicity margin is compared against ``hyper_tol`` times the larger
    of the spectral radius of the Jacobian and of ``A``, which keeps the test
    meaningful for scalar systems.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    if not np.all(x_bar > 0):
        raise DomainError("equilibrium must be strictly positive")
    J = eval_jacobian(sys, x_bar)
    eig = np.sort(np.linalg.eigvalsh(0.5 * (J + J.T)))
    margin = float(np.min(np.abs(eig)))
    ref = max(float(np.max(np.abs(eig))), float(np.max(np.abs(np.linalg.eigvalsh(sys.A)))))
    hurwitz = bool(eig[-1] < 0)
    unique = (hurwitz if same_sign(sys.b) else None)
    return StabilityReport(
        eigenvalues=eig,
        hurwitz=hurwitz,
        hyperbolicity_margin=margin,
        non_hyperbolic=margin <= hyper_tol * ref,
        unique_stable=unique,
    )
