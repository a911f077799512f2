"""Reflected BSDEs, penalization and Dynkin games on finite probability trees."""

from ._core import (
    DomainError,
    EnumerationOverflow,
    ModelError,
    ScenarioParseError,
    SolverError,
    StepSizeError,
    canonical_scenario,
    game_values,
    generate_random_scenario,
    min_variation_bound,
    reflection_mass,
    run,
    solve,
)

__all__ = [
    "DomainError",
    "EnumerationOverflow",
    "ModelError",
    "ScenarioParseError",
    "SolverError",
    "StepSizeError",
    "canonical_scenario",
    "game_values",
    "generate_random_scenario",
    "min_variation_bound",
    "reflection_mass",
    "run",
    "solve",
]
