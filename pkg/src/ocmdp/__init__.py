"""One-counter MDPs with interval strategies."""

from .model import INF, REACH, SELTERM, Config, ModelError, Objective, OcMdp, Query, absorb_targets, validate
from .partitions import Interval, IntervalPartition, PeriodicPartition, isolate, refine, refine_partition
from .strategies import CIS, OEIS, IntervalStrategy, cis, oeis

__all__ = [
    "INF",
    "REACH",
    "SELTERM",
    "CIS",
    "OEIS",
    "Config",
    "Interval",
    "IntervalPartition",
    "IntervalStrategy",
    "ModelError",
    "Objective",
    "OcMdp",
    "PeriodicPartition",
    "Query",
    "absorb_targets",
    "cis",
    "isolate",
    "oeis",
    "refine",
    "refine_partition",
    "validate",
]
