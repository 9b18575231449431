"""Entanglement measures, detection protocols, area-law checks, and
matrix product state tools for small spin lattices."""

__version__ = "0.1.0"

from .states import (  # noqa: F401
    DensityOperator,
    KrausSet,
    PureState,
    RegionPartition,
    SiteSpace,
    apply_measurement,
    compose,
    expectation,
    partial_trace,
    partial_transpose,
    validate_kraus,
)
