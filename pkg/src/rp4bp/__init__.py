"""Comet-type periodic orbits, parabolic infinity and transition chains in the
restricted planar four-body problem."""

from .core_model import (
    Chart,
    ChartState,
    ChartMismatchError,
    CollisionError,
    DomainError,
    EnergyLevel,
    ModelError,
    SystemParams,
    eval_hamiltonian,
    eval_vector_field,
)

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "ChartState",
    "ChartMismatchError",
    "CollisionError",
    "DomainError",
    "EnergyLevel",
    "ModelError",
    "SystemParams",
    "eval_hamiltonian",
    "eval_vector_field",
    "__version__",
]
