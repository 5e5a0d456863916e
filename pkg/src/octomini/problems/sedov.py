"""Point-blast initialization."""

from dataclasses import dataclass

import numpy as np

from ..geometry import EGAS, RHO, TAU
from ..hydro.eos import conserved_from_primitive


@dataclass
class SedovConfig:
    e0: float = 1.0
    rho0: float = 1.0
    p0: float = 1.0e-6
    gamma: float = 1.4
    deposit_radius: float = 3.5  # in finest-level cell widths


def init_sedov(config, tree, eos):
    """Ambient gas everywhere; E0 spread uniformly over the cells whose
    centers lie within the deposit radius of the domain center."""
    dx_min = min(leaf.subgrid.dx for leaf in tree.leaves())
    r_dep = config.deposit_radius * dx_min
    chosen = []
    for leaf in tree.leaves():
        sg = leaf.subgrid
        x = sg.cell_centers(0)[:, None, None]
        y = sg.cell_centers(1)[None, :, None]
        z = sg.cell_centers(2)[None, None, :]
        r2 = x * x + y * y + z * z
        sg.interior[:] = conserved_from_primitive(
            np.full((sg.n,) * 3, config.rho0), (0.0, 0.0, 0.0), config.p0, eos
        )
        mask = r2 <= r_dep * r_dep
        if np.any(mask):
            chosen.append((leaf, mask))
    if not chosen:
        raise ValueError("deposit radius smaller than one cell")
    volume = sum(float(m.sum()) * leaf.subgrid.dx**3 for leaf, m in chosen)
    e_density = config.e0 / volume
    for leaf, mask in chosen:
        sg = leaf.subgrid
        egas = sg.interior[EGAS]
        egas[mask] += e_density
        # retune the tracer to the deposited internal energy
        sg.interior[TAU][mask] = egas[mask] ** (1.0 / eos.gamma)
    return tree


def sedov_refinement_criterion(config, threshold=1.2):
    """Refine where the density deviates from ambient (shock tracking)."""

    def criterion(leaf):
        rho = leaf.subgrid.interior[RHO]
        return bool(np.any(rho > threshold * config.rho0))

    return criterion
