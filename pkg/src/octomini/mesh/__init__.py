from .tree import (
    Octree,
    OctreeNode,
    SubGrid,
    build_uniform_tree,
    check_balance,
    refine_by_criterion,
)
from .ghosts import exchange_ghosts, fill_leaf_ghosts
from .transfer import prolong, prolong_block, restrict, restrict_block

__all__ = [
    "Octree",
    "OctreeNode",
    "SubGrid",
    "build_uniform_tree",
    "check_balance",
    "refine_by_criterion",
    "exchange_ghosts",
    "fill_leaf_ghosts",
    "prolong",
    "prolong_block",
    "restrict",
    "restrict_block",
]
