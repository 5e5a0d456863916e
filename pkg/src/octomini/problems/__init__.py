from .diagnostics import conservation_totals, density_error_l1, dynamical_time
from .lane_emden import lane_emden_density, lane_emden_profile
from .sedov import SedovConfig, init_sedov, sedov_refinement_criterion
from .sedov_analytic import energy_integral_residual, front_factor, sedov_analytic, shock_radius
from .star import (
    StarConfig,
    StarState,
    build_star_tree,
    density_refinement_criterion,
    measured_axis_ratio,
    scf_build_star,
    surface_radius,
)

__all__ = [
    "conservation_totals",
    "density_error_l1",
    "dynamical_time",
    "lane_emden_density",
    "lane_emden_profile",
    "SedovConfig",
    "init_sedov",
    "sedov_refinement_criterion",
    "energy_integral_residual",
    "front_factor",
    "sedov_analytic",
    "shock_radius",
    "StarConfig",
    "StarState",
    "build_star_tree",
    "density_refinement_criterion",
    "measured_axis_ratio",
    "scf_build_star",
    "surface_radius",
]
