"""Rotating equilibrium star built by self-consistent-field iteration.

The density and potential are alternated: given rho, solve phi; set the
rotation rate and enthalpy constant by pinning the stellar surface at the
prescribed equatorial and polar boundary points; rebuild the density from
the enthalpy; repeat until the density stops changing.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError
from ..geometry import RHO
from ..gravity import FmmSolver
from ..hydro.eos import conserved_from_primitive
from ..mesh import build_uniform_tree, refine_by_criterion
from .lane_emden import lane_emden_density


@dataclass
class StarConfig:
    n_poly: float = 1.5  # polytropic index (gamma = 1 + 1/n)
    q: float = 0.75  # minor/major axis ratio
    r_eq: float = 0.5  # equatorial radius in domain units
    rho_c: float = 1.0
    theta: float = 0.5  # opening criterion for the gravity solves
    tol: float = 1.0e-6
    max_iter: int = 100
    relax: float = 0.8
    floor_rho: float = 1.0e-10

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValueError("axis ratio q must lie in (0, 1]")

    @property
    def gamma(self):
        return 1.0 + 1.0 / self.n_poly


@dataclass
class StarState:
    tree: object
    omega: float
    kpoly: float
    h_c: float
    r_eq_cell: float
    iterations: int
    residuals: list = field(default_factory=list)
    rho_ic: dict = field(default_factory=dict)


def locate_leaf(tree, point):
    node = tree.root
    lo = tree.lower.copy()
    width = tree.width
    while not node.is_leaf:
        width /= 2.0
        k = 0
        for a in range(3):
            if point[a] >= lo[a] + width:
                k |= 1 << a
                lo[a] += width
        node = node.children[k]
    return node


def nearest_cell(tree, point):
    """(leaf, (i,j,k)) of the cell whose center is closest to `point`."""
    leaf = locate_leaf(tree, np.asarray(point, dtype=float))
    sg = leaf.subgrid
    idx = []
    for a in range(3):
        i = int(np.round((point[a] - sg.origin[a]) / sg.dx))
        idx.append(min(max(i, 0), sg.n - 1))
    return leaf, tuple(idx)


def sample_cell(tree, point, f=RHO):
    leaf, idx = nearest_cell(tree, point)
    return float(leaf.subgrid.interior[(f,) + idx])


def density_refinement_criterion(rho_c, max_level):
    """Refine a leaf when any cell reaches rho_c * 4^(level - max_level)."""

    def criterion(leaf):
        thresh = rho_c * 4.0 ** (leaf.level - max_level)
        return bool(np.any(leaf.subgrid.interior[RHO] >= thresh))

    return criterion


def build_star_tree(config, n_per_side, max_level, boundary="outflow",
                    refine_full_star=False):
    """Octree refined around the initial-guess star profile."""
    guess_radius = config.r_eq

    def guess_rho(leaf):
        sg = leaf.subgrid
        x = sg.cell_centers(0)[:, None, None]
        y = sg.cell_centers(1)[None, :, None]
        z = sg.cell_centers(2)[None, None, :]
        r = np.sqrt(x * x + y * y + z * z)
        return lane_emden_density(r, guess_radius, config.n_poly, config.rho_c)

    tree = build_uniform_tree(0, n_per_side, boundary=boundary)

    def criterion(leaf):
        rho = guess_rho(leaf)
        if refine_full_star:
            thresh = config.rho_c * min(
                4.0 ** (leaf.level - max_level), 1e-5
            ) if leaf.level >= max_level else 1e-5 * config.rho_c
            return bool(np.any(rho >= thresh))
        thresh = config.rho_c * 4.0 ** (leaf.level - max_level)
        return bool(np.any(rho >= thresh))

    refine_by_criterion(tree, criterion, max_level)
    for leaf in tree.leaves():
        leaf.subgrid.interior[RHO] = np.maximum(guess_rho(leaf), config.floor_rho)
    return tree


def scf_build_star(config, tree=None, n_per_side=8, max_level=3, boundary="outflow",
                   refine_full_star=False, solver=None):
    """Iterate density <-> potential to a rotating equilibrium.

    Returns a StarState whose tree holds the full conserved state (zero
    velocity in the rotating frame) and the converged rotation rate.
    """
    if tree is None:
        tree = build_star_tree(config, n_per_side, max_level, boundary, refine_full_star)
    if solver is None:
        solver = FmmSolver(config.theta)
    n = config.n_poly

    point_a = np.array([config.r_eq, 0.0, 0.0])
    point_b = np.array([0.0, 0.0, config.q * config.r_eq])
    leaf_a, idx_a = nearest_cell(tree, point_a)
    leaf_b, idx_b = nearest_cell(tree, point_b)
    leaf_c, idx_c = nearest_cell(tree, np.zeros(3))
    r_a = float(leaf_a.subgrid.origin[0] + idx_a[0] * leaf_a.subgrid.dx)

    residuals = []
    omega2 = 0.0
    h_c = None
    for iteration in range(1, config.max_iter + 1):
        phi, _ = solver.solve_density(tree)
        phi_a = phi[leaf_a.path][idx_a]
        phi_b = phi[leaf_b.path][idx_b]
        phi_c = phi[leaf_c.path][idx_c]
        if config.q < 1.0:
            omega2 = max(2.0 * (phi_a - phi_b) / (r_a * r_a), 0.0)
        else:
            omega2 = 0.0
        c_const = phi_b
        h_c = c_const - phi_c
        if h_c <= 0.0:
            raise ConvergenceError("central enthalpy is not positive", residuals)
        worst = 0.0
        for leaf in tree.sorted_leaves():
            sg = leaf.subgrid
            x = sg.cell_centers(0)[:, None, None]
            y = sg.cell_centers(1)[None, :, None]
            h = c_const - phi[leaf.path] + 0.5 * omega2 * (x * x + y * y)
            rho_new = np.where(h > 0.0, (np.maximum(h, 0.0) / h_c) ** n, 0.0)
            rho_new = np.maximum(rho_new, config.floor_rho)
            old = sg.interior[RHO]
            mixed = (1.0 - config.relax) * old + config.relax * rho_new
            worst = max(worst, float(np.max(np.abs(mixed - old))))
            sg.interior[RHO] = mixed
        residuals.append(worst / config.rho_c)
        if residuals[-1] < config.tol:
            break
    else:
        raise ConvergenceError(
            f"self-consistent field stalled at residual {residuals[-1]:.3e}", residuals
        )

    kpoly = h_c / (n + 1.0)
    gamma = config.gamma
    eosless_gamma = gamma
    rho_ic = {}
    from ..hydro.eos import EosConfig

    eos = EosConfig(gamma=gamma)
    for leaf in tree.sorted_leaves():
        sg = leaf.subgrid
        rho = np.maximum(sg.interior[RHO], config.floor_rho)
        p = kpoly * rho**eosless_gamma
        sg.interior[:] = conserved_from_primitive(rho, (0.0, 0.0, 0.0), p, eos)
        rho_ic[leaf.path] = rho.copy()
    return StarState(
        tree=tree,
        omega=float(np.sqrt(omega2)),
        kpoly=kpoly,
        h_c=h_c,
        r_eq_cell=r_a,
        iterations=iteration,
        residuals=residuals,
        rho_ic=rho_ic,
    )


def surface_radius(tree, axis, floor=1.0e-6, samples=512):
    """Zero-crossing radius of the density along one positive axis."""
    dx_min = min(leaf.subgrid.dx for leaf in tree.leaves())
    rmax = tree.width / 2.0
    rr = np.linspace(0.0, rmax - dx_min, samples)
    last = 0.0
    for r in rr:
        p = np.zeros(3)
        p[axis] = r
        if sample_cell(tree, p) > floor:
            last = r
        elif last > 0.0:
            break
    return last


def measured_axis_ratio(tree, floor=1.0e-6):
    re = surface_radius(tree, 0, floor)
    rp = surface_radius(tree, 2, floor)
    return rp / re if re > 0 else np.nan
