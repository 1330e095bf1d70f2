"""Pydantic schemas for scenario and validation suite files."""

from psmflow.schemas.scenario import (
    BodyConfig,
    BoundaryConfig,
    DomainConfig,
    DynamicConfig,
    ExecutionConfig,
    NumericsConfig,
    OutputConfig,
    PrescribedConfig,
    PrimitiveConfig,
    ScenarioConfig,
    load_scenario,
)
from psmflow.schemas.validation import (
    SettlingCase,
    SettlingSuite,
    ValidationSuiteError,
    VolumeErrorCase,
    load_settling_suite,
)

__all__ = [
    "BodyConfig",
    "BoundaryConfig",
    "DomainConfig",
    "DynamicConfig",
    "ExecutionConfig",
    "NumericsConfig",
    "OutputConfig",
    "PrescribedConfig",
    "PrimitiveConfig",
    "ScenarioConfig",
    "SettlingCase",
    "SettlingSuite",
    "ValidationSuiteError",
    "VolumeErrorCase",
    "load_scenario",
    "load_settling_suite",
]
