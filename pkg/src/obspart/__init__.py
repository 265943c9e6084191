"""Exact and sampled sequential-measurement experiments with observer partitions."""

from .scenario import (
    FactorSpace,
    MeasurementStep,
    Partition,
    PartitionPrior,
    Scenario,
    builtin_frw,
    builtin_wigner,
    validate,
)

__all__ = [
    "FactorSpace",
    "MeasurementStep",
    "Partition",
    "PartitionPrior",
    "Scenario",
    "builtin_frw",
    "builtin_wigner",
    "validate",
]
