"""Neural logic decision trees grown with a neural ID3 variant."""
from __future__ import annotations

from .dataset import Dataset, Example
from .errors import NeuID3Error
from .induction import InductionConfig, neuid3
from .logic import LogicProgram, wmc_query
from .pool import PoolSpec, Test, build_pool, make_test
from .tree import NLDT, classify, leaf_probs, load_tree, predict, save_tree, translate

__all__ = [
    "Dataset",
    "Example",
    "InductionConfig",
    "LogicProgram",
    "NLDT",
    "NeuID3Error",
    "PoolSpec",
    "Test",
    "build_pool",
    "classify",
    "leaf_probs",
    "load_tree",
    "make_test",
    "neuid3",
    "predict",
    "save_tree",
    "translate",
    "wmc_query",
]
__version__ = "0.1.0"
