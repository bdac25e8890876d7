"""Exchangeable sequences of clusters: microclustering priors for record linkage."""
from .partition import Partition, enumerate_partitions, from_allocations, log_eppf_conditional, move_record
from .prior import EscHyper, ExplicitSizes, TruncNegBin

__all__ = [
    "EscHyper", "ExplicitSizes", "Partition", "TruncNegBin",
    "enumerate_partitions", "from_allocations", "log_eppf_conditional", "move_record",
]
__version__ = "0.1.0"
