"""Run diagnostics: conserved totals and density-error norms."""

import numpy as np

from ..geometry import EGAS, RHO, SX, SY, SZ
from ..errors import StructureError


def conservation_totals(tree, phi=None):
    """(mass, sx, sy, sz, egas, total energy), reduced in canonical leaf
    order.  With a potential, total energy = egas + rho*phi/2 integrated."""
    mass = sx = sy = sz = egas = ebind = 0.0
    for leaf in tree.sorted_leaves():
        u = leaf.subgrid.interior
        dv = leaf.subgrid.dx**3
        mass += float(u[RHO].sum()) * dv
        sx += float(u[SX].sum()) * dv
        sy += float(u[SY].sum()) * dv
        sz += float(u[SZ].sum()) * dv
        egas += float(u[EGAS].sum()) * dv
        if phi is not None:
            ebind += 0.5 * float((u[RHO] * phi[leaf.path]).sum()) * dv
    return {
        "mass": mass,
        "sx": sx,
        "sy": sy,
        "sz": sz,
        "egas": egas,
        "etot": egas + ebind,
    }


def density_error_l1(tree, rho_ic, signed=False, support_floor=1.0e-6, rho_c=1.0):
    """Volume-integrated density error against the initial conditions,
    normalized by the initial star volume:

        rho_L1 = sum_domain |rho_ic - rho| dV / V,
        V = volume of cells with rho_ic > support_floor * rho_c.

    With signed=True the absolute value is dropped (plain signed sum)."""
    num = 0.0
    vol = 0.0
    for leaf in tree.sorted_leaves():
        if leaf.path not in rho_ic:
            raise StructureError("tree topology does not match the reference field")
        dv = leaf.subgrid.dx**3
        ref = rho_ic[leaf.path]
        diff = ref - leaf.subgrid.interior[RHO]
        if not signed:
            diff = np.abs(diff)
        num += float(diff.sum()) * dv
        vol += float((ref > support_floor * rho_c).sum()) * dv
    if vol == 0.0:
        raise ValueError("reference field has empty support")
    return num / vol


def dynamical_time(rho_c=1.0, G=1.0):
    """Characteristic gravitational timescale 1/sqrt(G rho_c)."""
    return 1.0 / np.sqrt(G * rho_c)
