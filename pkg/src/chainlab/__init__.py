"""chainlab: growth chains for discrete structures and their limit diagnostics."""

__version__ = "0.1.0"

from .chains import ChainSpec, RecordsState, Trajectory, UrnState, simulate
from .graphs import Graph, Permutation
from .martin import AdjacencyLimit, LogProb
from .silhouette import BinaryTree, End, SplitTable

__all__ = [
    "__version__",
    "AdjacencyLimit",
    "BinaryTree",
    "ChainSpec",
    "End",
    "Graph",
    "LogProb",
    "Permutation",
    "RecordsState",
    "SplitTable",
    "Trajectory",
    "UrnState",
    "simulate",
]
