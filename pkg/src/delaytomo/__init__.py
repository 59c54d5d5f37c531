"""Sparse link/node delay tomography from end-to-end probe paths."""

from .harness import TrialConfig, TrialReport, run_experiment, sample_truth
from .network import Network, ProbePath, path_delay
from .peeling import DecodeResult, decode, detect_leaf
from .sensing import (
    DelayVector,
    GroupedOutput,
    MeasurementMatrix,
    build_matrix,
    encode,
    min_group_height,
    riemann_zeta,
)
from .steiner import SteinerTree, steiner_approx, steiner_length_stats, tree_tour
from .tomography import (
    RecoveryResult,
    build_spanning_path,
    build_weighted_path,
    recover,
    subtract_measurements,
)
from .topology import generate_topology

__all__ = [
    "DecodeResult",
    "DelayVector",
    "GroupedOutput",
    "MeasurementMatrix",
    "Network",
    "ProbePath",
    "RecoveryResult",
    "SteinerTree",
    "TrialConfig",
    "TrialReport",
    "build_matrix",
    "build_spanning_path",
    "build_weighted_path",
    "decode",
    "detect_leaf",
    "encode",
    "generate_topology",
    "min_group_height",
    "path_delay",
    "recover",
    "riemann_zeta",
    "run_experiment",
    "sample_truth",
    "steiner_approx",
    "steiner_length_stats",
    "subtract_measurements",
    "tree_tour",
]

__version__ = "0.1.0"
