"""Crystal property prediction with dual-scale cutoff graphs."""

from .crystal import Crystal, Lattice, PropertyRecord
from .featurize import BasisConfig
from .graph import CutoffConfig, build_graph, build_graph_single_scale, graph_stats
from .model import ModelConfig, ModelState, predict, train
from .nn import OptimConfig

__all__ = [
    "BasisConfig",
    "Crystal",
    "CutoffConfig",
    "Lattice",
    "ModelConfig",
    "ModelState",
    "OptimConfig",
    "PropertyRecord",
    "build_graph",
    "build_graph_single_scale",
    "graph_stats",
    "predict",
    "train",
]

__version__ = "0.1.0"
