# Utils module
from utils.errors import (
    AllocationContractError,
    CahcbfError,
    ConfigError,
    DegeneratePairError,
    GeometryError,
    ParameterError,
    ScenarioError,
    StateError,
)
from utils.performance import PerformanceMonitor

__all__ = [
    "AllocationContractError",
    "CahcbfError",
    "ConfigError",
    "DegeneratePairError",
    "GeometryError",
    "ParameterError",
    "ScenarioError",
    "StateError",
    "PerformanceMonitor",
]
