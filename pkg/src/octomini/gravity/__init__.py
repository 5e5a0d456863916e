from .multipole import MultipoleExpansion, moments_from_points
from .solver import (
    FmmSolver,
    GravityField,
    compute_multipoles,
    direct_sum,
    direct_sum_tree,
    mac_accept,
    potential_time_derivative,
    root_direct,
)

__all__ = [
    "MultipoleExpansion",
    "moments_from_points",
    "FmmSolver",
    "GravityField",
    "compute_multipoles",
    "direct_sum",
    "direct_sum_tree",
    "mac_accept",
    "potential_time_derivative",
    "root_direct",
]
