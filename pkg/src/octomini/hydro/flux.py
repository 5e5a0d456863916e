"""Central-upwind point fluxes and face quadrature."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError
from ..geometry import W_CENTER, W_EDGE, W_VERTEX


@dataclass
class PrimitiveState:
    rho: float
    vx: float
    vy: float
    vz: float
    p: float
    eint: float = 0.0  # specific internal energy
    tau: float = 0.0

    @classmethod
    def from_fields(cls, rho, v, p, eos, tau=None):
        eint = p / ((eos.gamma - 1.0) * rho)
        if tau is None:
            tau = (rho * eint) ** (1.0 / eos.gamma)
        return cls(rho, v[0], v[1], v[2], p, eint, tau)

    def velocity(self, axis):
        return (self.vx, self.vy, self.vz)[axis]

    def conserved(self):
        kin = 0.5 * self.rho * (self.vx**2 + self.vy**2 + self.vz**2)
        egas = self.rho * self.eint + kin
        return np.array(
            [self.rho, self.rho * self.vx, self.rho * self.vy, self.rho * self.vz, egas, self.tau]
        )


def physical_flux(state, axis):
    """Exact flux of the Euler system along one axis."""
    u = state.conserved()
    vn = state.velocity(axis)
    f = u * vn
    f[1 + axis] += state.p
    f[4] += state.p * vn
    return f


def kt_flux(left, right, axis, eos):
    """Semi-discrete central-upwind flux from one-sided signal speeds.

    F = [a+ F(uL) - a- F(uR)] / (a+ - a-) + [a+ a- / (a+ - a-)] (uR - uL)
    with a+ = max(0, vL+cL, vR+cR) and a- = min(0, vL-cL, vR-cR).  The
    degenerate a+ = a- = 0 case returns the physical flux of either state.
    """
    for s in (left, right):
        if not all(np.isfinite([s.rho, s.vx, s.vy, s.vz, s.p])):
            raise NumericsError("non-finite state passed to kt_flux")
    gamma = eos.gamma
    cl = np.sqrt(gamma * left.p / left.rho)
    cr = np.sqrt(gamma * right.p / right.rho)
    vl = left.velocity(axis)
    vr = right.velocity(axis)
    ap = max(0.0, vl + cl, vr + cr)
    am = min(0.0, vl - cl, vr - cr)
    fl = physical_flux(left, axis)
    if ap - am <= 0.0:
        return fl
    fr = physical_flux(right, axis)
    ul = left.conserved()
    ur = right.conserved()
    return (ap * fl - am * fr + (ap * am) * (ur - ul)) / (ap - am)


def face_flux(point_fluxes, new_mode=True):
    """Average the 9 quadrature-point fluxes of one face.

    `point_fluxes` is indexed (point, field) with the face center first,
    then the 4 edge midpoints, then the 4 vertices.  Weights are the
    tensor-product Simpson rule (16/36, 4/36, 1/36); the sum is assembled
    in deviation form so 9 identical inputs return the input bit-for-bit.
    In old mode the face-center value is the flux.
    """
    pf = np.asarray(point_fluxes, dtype=np.float64)
    if pf.shape[0] != 9:
        raise ValueError("face_flux expects 9 point fluxes")
    center = pf[0]
    if not new_mode:
        return center.copy()
    edges = pf[1:5] - center
    verts = pf[5:9] - center
    edev = (edges[0] + edges[1]) + (edges[2] + edges[3])
    vdev = (verts[0] + verts[1]) + (verts[2] + verts[3])
    return center + (4.0 * edev + vdev) / 36.0


QUADRATURE_WEIGHTS = np.array([W_CENTER] + [W_EDGE] * 4 + [W_VERTEX] * 4)
