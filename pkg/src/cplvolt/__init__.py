"""Existence and long-term stability of voltage equilibria in networks with
constant power loads."""
from .model import (DomainError, ParseError, SystemData, ValidationReport,
                    characteristic_margin, eval_jacobian, eval_rhs,
                    in_characteristic_set, validate_system)
from .seed import CharacteristicSeed, build_characteristic_seed, find_positive_cone_point
from .engine import (DOMINANT, INCONCLUSIVE, NONE, IntegrationOptions, Outcome,
                     RawOutcome, RefinementError, Trajectory, ValidationError, classify,
                     integrate_characteristic, integrate_on_grid, refine_equilibrium)
from .stability import StabilityReport, assess
from .adapters import (AcGridSpec, DcMicrogridSpec, HvdcSpec, build_from_ac,
                       build_from_dc_microgrid, build_from_hvdc, system_from_document)
from .oracle import EquilibriumList, enumerate_equilibria_2d, solve_scalar
from .sweep import RegionMap, SweepSpec, refine_transition, sweep

__version__ = "0.1.0"
