"""Lane-Emden polytrope profile: theta'' + (2/xi) theta' = -theta^n."""

from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator


@lru_cache(maxsize=8)
def lane_emden_profile(n):
    """Returns (theta(xi) interpolant, xi1) for polytropic index n.

    Series start: theta = 1 - xi^2/6 + n xi^4/120 near the center.
    """
    n = float(n)
    xi0 = 1e-4
    th0 = 1.0 - xi0**2 / 6.0 + n * xi0**4 / 120.0
    dth0 = -xi0 / 3.0 + n * xi0**3 / 30.0

    def rhs(xi, y):
        th, dth = y
        src = np.sign(th) * np.abs(th) ** n if th > 0 else 0.0
        return [dth, -src - 2.0 * dth / xi]

    def crossed(xi, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1
    sol = solve_ivp(
        rhs, (xi0, 20.0), [th0, dth0], method="LSODA",
        dense_output=True, rtol=1e-11, atol=1e-13, events=crossed,
    )
    if not sol.t_events[0].size:
        raise RuntimeError("Lane-Emden profile never reached the surface")
    xi1 = float(sol.t_events[0][0])
    xs = np.linspace(xi0, xi1, 4000)
    th = sol.sol(xs)[0]
    th = np.clip(th, 0.0, None)
    xs = np.concatenate([[0.0], xs])
    th = np.concatenate([[1.0], th])
    return PchipInterpolator(xs, th), xi1


def lane_emden_density(r, radius, n=1.5, rho_c=1.0):
    """rho(r) of an n-polytrope with the given surface radius."""
    theta, xi1 = lane_emden_profile(n)
    xi = np.asarray(r) * (xi1 / radius)
    out = np.where(xi <= xi1, np.clip(theta(np.clip(xi, 0.0, xi1)), 0.0, None) ** n, 0.0)
    return rho_c * out
