"""Levy-driven stochastic transport equations by stochastic characteristics.

The pipeline: sample a driving path (:mod:`.driver`), integrate the
characteristics system forward from a grid of initial points
(:mod:`.characteristics`, with jumps applied through the canonical
exponential map of :mod:`.expmap`), invert the flow table
(:mod:`.inverse_flow`), and assemble the solution field with closed-form
oracles for validation (:mod:`.solver`).
"""

from .characteristics import (CharacteristicState, CoefficientSet,
                              FlowSolution, apply_jump, integrate_path,
                              small_jump_compensator, step_continuous,
                              xi_closed_form_check)
from .driver import (DriverRealization, JumpEvent, LevyMeasureSpec,
                     MarkDistribution, brownian_path, build_grid,
                     coarsen_driver, decompose_events, jump_path_value,
                     make_realization, rng_streams, sample_brownian,
                     sample_compound_poisson, sample_stable_events,
                     sample_stable_path, stable_levy_density_constant,
                     stable_small_jump_variance, stable_tail_intensity)
from .exceptions import (ConditioningError, ConfigError, DiffeomorphismError,
                         DivergenceError, ExtrapolationError, InversionError,
                         MarcusTransportError, QuadratureError)
from .expmap import (ExpMapResult, JumpVectorField, exp_map,
                     exp_map_fractional, exp_map_inverse_check,
                     exp_map_structured, structured_jump_factors)
from .inverse_flow import (InverseCoefficients, invert_1d, invert_1d_batch,
                           invert_nd, round_trip_residual)
from .presets import PRESET_NAMES, Preset, get_preset
from .solver import (InitialCondition, OracleReport, OracleSpec,
                     SolutionField, deterministic_solution,
                     h_transform_solution, marcus_path_value, oracle_compare,
                     sinh_solution, solve)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # driver
    "MarkDistribution", "LevyMeasureSpec", "JumpEvent", "DriverRealization",
    "rng_streams", "sample_brownian", "sample_compound_poisson",
    "sample_stable_path", "sample_stable_events", "decompose_events",
    "stable_levy_density_constant", "stable_tail_intensity",
    "stable_small_jump_variance", "build_grid", "make_realization",
    "coarsen_driver", "brownian_path", "jump_path_value",
    # exponential map
    "JumpVectorField", "ExpMapResult", "exp_map", "exp_map_fractional",
    "exp_map_structured", "structured_jump_factors", "exp_map_inverse_check",
    # characteristics
    "CoefficientSet", "CharacteristicState", "FlowSolution",
    "step_continuous", "apply_jump", "small_jump_compensator",
    "integrate_path", "xi_closed_form_check",
    # inverse flow
    "InverseCoefficients", "invert_1d", "invert_1d_batch", "invert_nd",
    "round_trip_residual",
    # solver
    "InitialCondition", "SolutionField", "OracleSpec", "OracleReport",
    "solve", "deterministic_solution", "h_transform_solution",
    "sinh_solution", "marcus_path_value", "oracle_compare",
    # presets
    "Preset", "get_preset", "PRESET_NAMES",
    # exceptions
    "MarcusTransportError", "DivergenceError", "ExtrapolationError",
    "DiffeomorphismError", "InversionError", "ConditioningError",
    "QuadratureError", "ConfigError",
]
