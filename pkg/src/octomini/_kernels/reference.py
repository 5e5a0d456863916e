"""Pure-python (numpy) implementations of the hot kernels.

These mirror the compiled kernels in octomini._kernels._core and are the
import-time fallback when the extension is unavailable.  Shapes and
semantics are identical; summation orders match so results agree to the
last bit on the paths covered by the backend parity tests.
"""

import numpy as np

from ..geometry import (
    FACE_TABLES,
    GHOST,
    LINE_DIRS,
    NFIELDS,
    NLINES,
    PP,
    PRHO,
    PTAU,
    RHO,
)

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# primitives and equation of state helpers
# ---------------------------------------------------------------------------

def primitives(u, gamma, eta):
    """Conserved (6,m,m,m) -> primitive (rho, vx, vy, vz, p, tau).

    Internal energy comes from egas - kinetic where that difference is at
    least eta * egas, otherwise from the entropy tracer (tau^gamma).
    """
    rho = u[0]
    inv = 1.0 / rho
    vx = u[1] * inv
    vy = u[2] * inv
    vz = u[3] * inv
    kin = 0.5 * (u[1] * vx + u[2] * vy + u[3] * vz)
    e_from_egas = u[4] - kin
    eint = np.where(e_from_egas >= eta * u[4], e_from_egas, u[5] ** gamma)
    p = (gamma - 1.0) * eint
    return np.stack([rho, vx, vy, vz, p, u[5]])


# ---------------------------------------------------------------------------
# PPM reconstruction along the 13 cell-center lines
# ---------------------------------------------------------------------------

def _shift(a, d, k):
    """a evaluated at cell c - k*d (values wrap; edge cells are unused)."""
    return np.roll(a, shift=(k * d[0], k * d[1], k * d[2]), axis=(-3, -2, -1))


def _ppm_line(prim, d):
    """Limited left/right values of every cell along one line direction.

    Returns (lo, hi): value at cell-center minus/plus d/2, shape like prim.
    """
    a = prim
    am1 = _shift(a, d, 1)
    ap1 = _shift(a, d, -1)
    ap2 = _shift(a, d, -2)
    # interface value between c and c+d (quartic estimate), clamped monotone
    iface = (7.0 / 12.0) * (a + ap1) - (1.0 / 12.0) * (am1 + ap2)
    iface = np.clip(iface, np.minimum(a, ap1), np.maximum(a, ap1))
    hi = iface
    lo = _shift(iface, d, 1)  # interface between c-d and c
    return lo.copy(), hi.copy()


def _monotonize(a, lo, hi):
    """Colella-Woodward parabola monotonization (in place on copies)."""
    extremum = (hi - a) * (a - lo) <= 0.0
    diff = hi - lo
    mid = a - 0.5 * (lo + hi)
    cond_lo = diff * mid > diff * diff / 6.0
    cond_hi = -diff * diff / 6.0 > diff * mid
    new_lo = np.where(cond_lo, 3.0 * a - 2.0 * hi, lo)
    new_hi = np.where(cond_hi, 3.0 * a - 2.0 * lo, hi)
    new_lo = np.where(extremum, a, new_lo)
    new_hi = np.where(extremum, a, new_hi)
    return new_lo, new_hi


def _mc_slope(a, d):
    am1 = _shift(a, d, 1)
    ap1 = _shift(a, d, -1)
    dc = 0.5 * (ap1 - am1)
    dl = 2.0 * (a - am1)
    dr = 2.0 * (ap1 - a)
    mag = np.minimum(np.abs(dc), np.minimum(np.abs(dl), np.abs(dr)))
    slope = np.sign(dc) * mag
    return np.where(dl * dr > 0.0, slope, 0.0)


def _steepen_density(prim, d, lo, hi, gamma):
    """Contact-discontinuity steepening of the density parabola (CW-style)."""
    rho = prim[PRHO]
    p = prim[PP]
    rm1 = _shift(rho, d, 1)
    rp1 = _shift(rho, d, -1)
    pm1 = _shift(p, d, 1)
    pp1 = _shift(p, d, -1)
    d2 = rp1 - 2.0 * rho + rm1
    d2m = _shift(d2, d, 1)
    d2p = _shift(d2, d, -1)
    dr = rp1 - rm1
    with np.errstate(divide="ignore", invalid="ignore"):
        eta_t = np.where(np.abs(dr) > 1e-300, (d2m - d2p) / (6.0 * dr), 0.0)
    eta = np.clip(20.0 * (eta_t - 0.05), 0.0, 1.0)
    # only at genuine contacts: curvature sign change, finite jump, small dp
    gate = (d2m * d2p < 0.0) & (
        np.abs(dr) - 0.01 * np.minimum(np.abs(rp1), np.abs(rm1)) > 0.0
    )
    pgate = np.abs(pp1 - pm1) / np.minimum(pp1, pm1) < 0.1 * gamma * np.abs(dr) / np.minimum(
        rp1, rm1
    )
    eta = np.where(gate & pgate, eta, 0.0)
    slope = _mc_slope(rho, d)
    lo_s = rm1 + 0.5 * _shift(slope, d, 1)
    hi_s = rp1 - 0.5 * _shift(slope, d, -1)
    return lo * (1.0 - eta) + lo_s * eta, hi * (1.0 - eta) + hi_s * eta


def reconstruct(prim, n, new_mode, contact_on, gamma, out_lo=None, out_hi=None):
    """PPM left/right states of every cell along every active line.

    Returns (lo, hi, fallback_count) with lo/hi of shape
    (NLINES, 6, m, m, m); lo[l,v,c] is the state at cell center minus
    dirs[l]/2, hi at plus dirs[l]/2.  Cells within 2 of the array border
    hold wrapped garbage and must not be consumed.
    """
    m = prim.shape[-1]
    shape = (NLINES, NFIELDS) + prim.shape[-3:]
    lo = out_lo if out_lo is not None else np.zeros(shape)
    hi = out_hi if out_hi is not None else np.zeros(shape)
    if out_lo is not None:
        lo[:] = 0.0
    if out_hi is not None:
        hi[:] = 0.0
    nlines = NLINES if new_mode else 3
    fallback = 0
    g = GHOST
    core = (slice(2, m - 2),) * 3
    for l in range(nlines):
        d = LINE_DIRS[l]
        llo, lhi = _ppm_line(prim, d)
        llo, lhi = _monotonize(prim, llo, lhi)
        if contact_on:
            slo, shi = _steepen_density(prim, d, llo[PRHO], lhi[PRHO], gamma)
            llo[PRHO] = slo
            lhi[PRHO] = shi
        # positivity fallback: first-order state where rho or p go negative
        bad_lo = (llo[PRHO] <= 0.0) | (llo[PP] <= 0.0)
        bad_hi = (lhi[PRHO] <= 0.0) | (lhi[PP] <= 0.0)
        fallback += int(np.count_nonzero(bad_lo[core])) + int(
            np.count_nonzero(bad_hi[core])
        )
        llo = np.where(bad_lo[None], prim, llo)
        lhi = np.where(bad_hi[None], prim, lhi)
        lo[l] = llo
        hi[l] = lhi
    return lo, hi, fallback


# ---------------------------------------------------------------------------
# central-upwind fluxes and face quadrature
# ---------------------------------------------------------------------------

def _prim_to_cons_flux(prim, axis, gamma):
    """Conserved state and physical flux along `axis` from primitives."""
    rho, vx, vy, vz, p, tau = prim
    v = (vx, vy, vz)
    eint = p / (gamma - 1.0)
    kin = 0.5 * rho * (vx * vx + vy * vy + vz * vz)
    egas = eint + kin
    U = np.stack([rho, rho * vx, rho * vy, rho * vz, egas, tau])
    vn = v[axis]
    F = U * vn
    F[1 + axis] += p
    F[4] += p * vn
    return U, F, vn


def kt_flux_block(left, right, axis, gamma):
    """Kurganov-style central-upwind flux for blocks of primitive states.

    Returns (flux(6,...), a_plus, a_minus)."""
    UL, FL, vnl = _prim_to_cons_flux(left, axis, gamma)
    UR, FR, vnr = _prim_to_cons_flux(right, axis, gamma)
    cl = np.sqrt(gamma * left[PP] / left[PRHO])
    cr = np.sqrt(gamma * right[PP] / right[PRHO])
    ap = np.maximum(0.0, np.maximum(vnl + cl, vnr + cr))
    am = np.minimum(0.0, np.minimum(vnl - cl, vnr - cr))
    denom = ap - am
    safe = denom > 0.0
    denom_safe = np.where(safe, denom, 1.0)
    F = (ap * FL - am * FR + (ap * am) * (UR - UL)) / denom_safe
    F = np.where(safe[None], F, FL)
    return F, ap, am


def _row_states(lo, hi, axis, row, n):
    """Left/right primitive blocks for one interface family over every face
    with the given normal axis.  Face f sits between interior cells f-1 and
    f along `axis`; the lower cell has padded index GHOST-1+f there and
    GHOST+t at transverse position t."""
    line, dP, flip = row
    d = LINE_DIRS[line]
    g = GHOST
    psl, qsl = [], []
    for a in range(3):
        start = (g - 1 if a == axis else g) + dP[a]
        stop = start + (n + 1 if a == axis else n)
        psl.append(slice(start, stop))
        qsl.append(slice(start + d[a], stop + d[a]))
    P = hi[line][:, psl[0], psl[1], psl[2]]
    Q = lo[line][:, qsl[0], qsl[1], qsl[2]]
    if flip:
        return Q, P
    return P, Q


def fluxes(lo, hi, n, gamma, new_mode, override_center):
    """Simpson-quadrature face fluxes from reconstructed line states.

    Returns (FX, FY, FZ, amax).  FX has shape (6, n+1, n, n) and
    FX[:, f, j, k] is the flux through the x-face between interior cells
    f-1 and f; FY and FZ are laid out analogously.  amax is the largest
    one-sided signal speed seen at any face quadrature point.
    """
    out = []
    amax = 0.0
    for axis in range(3):
        center = None
        edges = []
        verts = []
        for kind, rows in FACE_TABLES[axis]:
            if kind != "center" and (not new_mode or override_center):
                continue
            vals = []
            for row in rows:
                L, R = _row_states(lo, hi, axis, row, n)
                F, ap, am = kt_flux_block(L, R, axis, gamma)
                amax = max(amax, float(np.max(ap)), float(np.max(-am)))
                vals.append(F)
            if len(vals) == 1:
                point = vals[0]
            elif len(vals) == 2:
                point = 0.5 * (vals[0] + vals[1])
            else:
                point = 0.25 * ((vals[0] + vals[1]) + (vals[2] + vals[3]))
            if kind == "center":
                center = point
            elif kind == "edge":
                edges.append(point)
            else:
                verts.append(point)
        if new_mode and not override_center:
            # deviation form keeps the all-equal case exact to the bit
            edge_dev = (edges[0] - center) + (edges[1] - center)
            edge_dev = edge_dev + ((edges[2] - center) + (edges[3] - center))
            vert_dev = (verts[0] - center) + (verts[1] - center)
            vert_dev = vert_dev + ((verts[2] - center) + (verts[3] - center))
            out.append(center + (4.0 * edge_dev + vert_dev) / 36.0)
        else:
            out.append(center)
    return out[0], out[1], out[2], amax


# ---------------------------------------------------------------------------
# gravity: dual-tree traversal and interaction streaming
# ---------------------------------------------------------------------------

def build_interactions(center, width, children, is_cell, root, theta):
    """Enumerate far-field and cell-cell interaction pairs.

    Pairs are grouped by their (exact, lattice-quantized) center offset so
    the kernel derivatives are computed once per group.  Returns a list of
    (R(3,), a_idx, b_idx, a_cell, b_cell) with every unordered pair
    appearing exactly once.
    """
    quant = 2.0 / float(width.min())
    groups = {}
    stack = [(root, root)]
    while stack:
        a, b = stack.pop()
        if a == b:
            if is_cell[a]:
                continue
            ch = children[a]
            for i in range(8):
                stack.append((ch[i], ch[i]))
                for j in range(i + 1, 8):
                    stack.append((ch[i], ch[j]))
            continue
        R = center[b] - center[a]
        d = float(np.sqrt(R @ R))
        if 0.5 * (width[a] + width[b]) < theta * d:
            pass  # accepted: multipole-to-local
        elif is_cell[a] and is_cell[b]:
            pass  # adjacent cells: exact point-pair interaction
        else:
            # split the wider entity; on ties split the refined one(s)
            if width[a] > width[b]:
                for c in children[a]:
                    stack.append((c, b))
            elif width[b] > width[a]:
                for c in children[b]:
                    stack.append((a, c))
            elif is_cell[a]:
                for c in children[b]:
                    stack.append((a, c))
            elif is_cell[b]:
                for c in children[a]:
                    stack.append((c, b))
            else:
                for ca in children[a]:
                    for cb in children[b]:
                        stack.append((ca, cb))
            continue
        key = (
            int(round(R[0] * quant)),
            int(round(R[1] * quant)),
            int(round(R[2] * quant)),
            bool(is_cell[a]),
            bool(is_cell[b]),
        )
        grp = groups.get(key)
        if grp is None:
            groups[key] = grp = ([], [], R.copy())
        grp[0].append(a)
        grp[1].append(b)
    out = []
    for key, (alist, blist, R) in groups.items():
        out.append(
            (
                R,
                np.asarray(alist, dtype=np.int64),
                np.asarray(blist, dtype=np.int64),
                key[3],
                key[4],
            )
        )
    return out


def m2l_apply(groups, M, L):
    """Stream every interaction group into the local expansions (both
    directions of each pair, with parity-negated derivatives)."""
    from ..gravity.multipole import flip_derivatives, kernel_derivatives, m2l

    for R, aa, bb, a_cell, b_cell in groups:
        D = kernel_derivatives(R)
        if a_cell and b_cell:
            ma = M[aa, 0]
            mb = M[bb, 0]
            L[bb, 0] += ma * D[0]
            L[aa, 0] += mb * D[0]
            for c in range(3):
                L[bb, 1 + c] += ma * D[1 + c]
                L[aa, 1 + c] += mb * (-D[1 + c])
            continue
        Df = flip_derivatives(D)
        L[bb] += m2l(M[aa], D)
        L[aa] += m2l(M[bb], Df)


def direct_traversal_eval(center, width, children, is_cell, root, theta, mass):
    """Traversal with inline evaluation of cell pairs; used when theta is so
    strict that nothing is accepted (pure direct summation through the same
    machinery, without materializing pair lists)."""
    N = len(width)
    phi = np.zeros(N)
    g = np.zeros((N, 3))
    stack = [(root, root)]
    while stack:
        a, b = stack.pop()
        if a == b:
            if is_cell[a]:
                continue
            ch = children[a]
            for i in range(8):
                stack.append((ch[i], ch[i]))
                for j in range(i + 1, 8):
                    stack.append((ch[i], ch[j]))
            continue
        R = center[b] - center[a]
        r2 = float(R @ R)
        d = np.sqrt(r2)
        if 0.5 * (width[a] + width[b]) < theta * d:
            raise ValueError("direct_traversal_eval expects an always-reject MAC")
        if is_cell[a] and is_cell[b]:
            inv_r = 1.0 / d
            inv_r3 = inv_r / r2
            phi[b] -= mass[a] * inv_r
            phi[a] -= mass[b] * inv_r
            g[b] -= mass[a] * R * inv_r3
            g[a] += mass[b] * R * inv_r3
            continue
        if width[a] > width[b] or (width[a] == width[b] and is_cell[b] and not is_cell[a]):
            for c in children[a]:
                stack.append((c, b))
        elif width[b] > width[a] or is_cell[a]:
            for c in children[b]:
                stack.append((a, c))
        else:
            for ca in children[a]:
                for cb in children[b]:
                    stack.append((ca, cb))
    return phi, g


def direct_sum_pairs(pos, mass, block=2048):
    """O(N^2) reference field: phi_i = -sum m_j/r_ij, g toward sources."""
    pos = np.asarray(pos, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    N = len(mass)
    phi = np.zeros(N)
    g = np.zeros((N, 3))
    for i0 in range(0, N, block):
        i1 = min(i0 + block, N)
        d = pos[i0:i1, None, :] - pos[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        self_block = np.zeros_like(r2, dtype=bool)
        idx = np.arange(i0, i1)
        self_block[np.arange(i1 - i0), idx] = True
        if np.any((r2 == 0.0) & ~self_block):
            raise ValueError("coincident cell centers in direct summation")
        r2[self_block] = 1.0
        inv_r = 1.0 / np.sqrt(r2)
        inv_r[self_block] = 0.0
        phi[i0:i1] = -(mass[None, :] * inv_r).sum(axis=1)
        inv_r3 = inv_r / r2
        g[i0:i1] = -np.einsum("ij,ijk->ik", mass[None, :] * inv_r3, d)
    return phi, g
