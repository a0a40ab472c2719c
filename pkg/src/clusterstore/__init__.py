"""Page-based object store simulator with dynamic clustering engines."""
from .kernels import BACKEND
from .store import IoCounters, ObjectStore, RelocationReport, StoredObject
from .stats import StatStore
from .dro import ClusterProposal, ClusteringReport, DroParams, dissimilarity, step2_order
from .dstc import DstcEngine, DstcParams
from .workload import DatabaseSpec, TraversalSpec, generate_database, run_workload
from .bench import ExperimentConfig, gain_factor, run_experiment

__all__ = [
    "BACKEND",
    "ClusterProposal",
    "ClusteringReport",
    "DatabaseSpec",
    "DroParams",
    "DstcEngine",
    "DstcParams",
    "ExperimentConfig",
    "IoCounters",
    "ObjectStore",
    "RelocationReport",
    "StatStore",
    "StoredObject",
    "TraversalSpec",
    "dissimilarity",
    "gain_factor",
    "generate_database",
    "run_experiment",
    "run_workload",
    "step2_order",
]
__version__ = "0.1.0"
