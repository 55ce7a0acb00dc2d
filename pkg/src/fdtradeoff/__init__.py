"""Uplink/downlink resource-allocation trade-offs for full-duplex OFDMA.

Core pipeline: seeded channel generation -> Tchebycheff scalarization with a
binarity penalty -> majorization-minimization over a log-barrier interior
point solver -> dominance-filtered trade-off frontiers, with half-duplex and
hybrid baselines for comparison.
"""

from .model import (Allocation, ChannelRealization, SolverConfig, SystemParams,
                    db_to_linear, dbm_to_watts, default_params, linear_to_db,
                    validate_params, watts_to_dbm)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ChannelRealization",
    "SolverConfig",
    "SystemParams",
    "db_to_linear",
    "dbm_to_watts",
    "default_params",
    "linear_to_db",
    "validate_params",
    "watts_to_dbm",
    "__version__",
]
