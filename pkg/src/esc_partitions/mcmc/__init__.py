"""Markov chain samplers over partitions."""
from .chain import ChainConfig, ModelSpec, PriorWeights, chaperones_move, gibbs_scan, run_chain, run_chains
from .chaperones import ChaperoneSampler, chaperone_pair
from .diagnostics import diagnostics
from .state import PartitionState
from .trace import Trace

__all__ = [
    "ChainConfig", "ChaperoneSampler", "ModelSpec", "PartitionState", "PriorWeights", "Trace",
    "chaperone_pair", "chaperones_move", "diagnostics", "gibbs_scan", "run_chain", "run_chains",
]
