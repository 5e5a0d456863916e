"""Self-similar point-blast solution by integration of the similarity ODEs.

Scaled variables on 0 <= lam = r/R(t) <= 1:

    v = (2r/5t) V(lam),  p = rho0 (4r^2/25t^2) P(lam),  rho = rho0 W(lam)

with strong-shock values V(1) = 2/(g+1), P(1) = 2/(g+1), W(1) = (g+1)/(g-1).
The shock radius is R(t) = xi0 (E t^2 / rho0)^(1/5); xi0 comes from
requiring the integrated kinetic plus thermal energy to equal E, with the
energy integral accumulated alongside the profile integration.

Toward the center the density vanishes as a steep power of lam while the
pressure tends to a constant, so integration stops at LAM_MIN and the
fields are continued analytically (v linear in r, p constant, rho = 0).
"""

from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

LAM_MIN = 1e-3


def _rhs(s, y, gamma):
    """Derivatives of (V, lnP, lnW, I) with respect to s = ln(lam).

    Continuity:  (V-1) dlnW + dV = -3V
    Momentum:    (V-1) dV + V^2 - 5V/2 = -(P/W)(2 + dlnP)
    Entropy:     (V-1)(dlnP - g dlnW) = 5 - 2V
    Energy tally: dI/ds = (W V^2/2 + P/(g-1)) lam^5
    """
    V, lnP, lnW, _I = y
    lam5 = np.exp(5.0 * s)
    Vm1 = V - 1.0
    PW = np.exp(lnP - lnW)
    denom = Vm1 - PW * gamma / Vm1
    num = -PW * (2.0 + (-3.0 * gamma * V + 5.0 - 2.0 * V) / Vm1) - V * V + 2.5 * V
    dV = num / denom
    dlnW = (-3.0 * V - dV) / Vm1
    dlnP = gamma * dlnW + (5.0 - 2.0 * V) / Vm1
    dI = (0.5 * np.exp(lnW) * V * V + np.exp(lnP) / (gamma - 1.0)) * lam5
    return [dV, dlnP, dlnW, dI]


@lru_cache(maxsize=8)
def _profiles(gamma):
    """Dense interior profiles, the front factor xi0, and the energy
    integral I = int_0^1 (W V^2/2 + P/(g-1)) lam^4 dlam."""
    V1 = 2.0 / (gamma + 1.0)
    P1 = 2.0 / (gamma + 1.0)
    W1 = (gamma + 1.0) / (gamma - 1.0)
    s_end = np.log(LAM_MIN)
    sol = solve_ivp(
        _rhs,
        (0.0, s_end),
        [V1, np.log(P1), np.log(W1), 0.0],
        args=(gamma,),
        method="Radau",
        dense_output=True,
        rtol=3e-11,
        atol=1e-13,
    )
    if not sol.success:
        raise RuntimeError(f"similarity integration failed: {sol.message}")
    s = np.linspace(s_end, 0.0, 4000)
    V, lnP, lnW, _ = sol.sol(s)
    lam = np.exp(s)
    fV = PchipInterpolator(lam, V)
    fP = PchipInterpolator(lam, np.exp(lnP))
    fW = PchipInterpolator(lam, np.exp(lnW))
    I = -float(sol.y[3, -1])  # downward integration accumulates -I
    xi0 = (25.0 / (16.0 * np.pi * I)) ** 0.2
    return fV, fP, fW, xi0, I


def shock_radius(t, e0, rho0, gamma):
    _, _, _, xi0, _ = _profiles(float(gamma))
    return xi0 * (e0 * t * t / rho0) ** 0.2


def front_factor(gamma):
    """xi0 in R(t) = xi0 (E t^2/rho0)^(1/5)."""
    return _profiles(float(gamma))[3]


def energy_integral_residual(gamma):
    """Relative defect between the ODE-accumulated energy integral and an
    independent quadrature of the interpolated profiles."""
    fV, fP, fW, _, I_ode = _profiles(float(gamma))
    lam = np.linspace(LAM_MIN, 1.0, 200_001)
    integ = (0.5 * fW(lam) * fV(lam) ** 2 + fP(lam) / (gamma - 1.0)) * lam**4
    I_quad = np.trapezoid(integ, lam)
    return abs(I_quad - I_ode) / I_ode


def sedov_analytic(t, r, e0, rho0, gamma, p_ambient=0.0):
    """(rho, v_r, p) of the point blast at time t and radii r."""
    if t <= 0.0:
        raise ValueError("the similarity solution needs t > 0")
    r = np.asarray(r, dtype=float)
    fV, fP, fW, xi0, _ = _profiles(float(gamma))
    R = xi0 * (e0 * t * t / rho0) ** 0.2
    lam = r / R
    inside = lam <= 1.0
    lam_in = np.clip(lam, LAM_MIN, 1.0)
    rho = np.where(inside, rho0 * fW(lam_in), rho0)
    v = np.where(inside, (2.0 * r / (5.0 * t)) * fV(lam_in), 0.0)
    p = np.where(inside, rho0 * (4.0 * r**2 / (25.0 * t**2)) * fP(lam_in), p_ambient)
    deep = lam < LAM_MIN
    if np.any(deep):
        rc = LAM_MIN * R
        p_c = rho0 * (4.0 * rc**2 / (25.0 * t**2)) * fP(LAM_MIN)
        rho = np.where(deep, 0.0, rho)
        v = np.where(deep, (2.0 * r / (5.0 * t)) * fV(LAM_MIN), v)
        p = np.where(deep, p_c, p)
    return rho, v, p
