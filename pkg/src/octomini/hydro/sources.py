"""Source terms: rotating frame (Coriolis + centrifugal) and gravity."""

import numpy as np

from ..geometry import EGAS, RHO, SX, SY, SZ


def rotating_frame_sources(u, omega, x, y):
    """Momentum and energy sources for a frame rotating at omega about z.

    Coriolis: -2 (Omega x s); centrifugal: rho Omega^2 (x, y, 0).  The
    Coriolis force is perpendicular to the velocity, so it contributes
    exactly nothing to the energy source by construction.
    """
    ds = np.zeros_like(u)
    if omega == 0.0:
        return ds
    w2 = omega * omega
    ds[SX] = 2.0 * omega * u[SY] + u[RHO] * w2 * x
    ds[SY] = -2.0 * omega * u[SX] + u[RHO] * w2 * y
    ds[EGAS] = w2 * (x * u[SX] + y * u[SY])
    return ds


def gravity_sources(u, phi, dphi_dt, g):
    """Momentum source rho*g; energy source s.g plus the potential-energy
    bookkeeping term rho*dphi_dt/2 (total energy is reported as
    egas + rho*phi/2)."""
    ds = np.zeros_like(u)
    gx, gy, gz = g
    ds[SX] = u[RHO] * gx
    ds[SY] = u[RHO] * gy
    ds[SZ] = u[RHO] * gz
    ds[EGAS] = u[SX] * gx + u[SY] * gy + u[SZ] * gz + 0.5 * u[RHO] * dphi_dt
    return ds
