# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: PPM reconstruction, central-upwind face quadrature,
FMM traversal and interaction streaming, direct summation.

Semantics mirror octomini._kernels.reference; expression and summation
order are kept identical where results must agree between backends.
"""

from libc.math cimport fabs, fmax, fmin, llround, sqrt
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

from .reference import primitives  # vectorized numpy is fast enough here

from ..geometry import LINE_DIRS as _LINE_DIRS
from ..geometry import NLINES as _NLINES
from ..geometry import flat_face_table

cdef int NL = _NLINES
cdef long[:, ::1] DIRS = np.ascontiguousarray(_LINE_DIRS, dtype=np.int64)

_FT = [flat_face_table(a) for a in range(3)]
_FT_KIND = [np.ascontiguousarray(t[0]) for t in _FT]
_FT_NROW = [np.ascontiguousarray(t[1]) for t in _FT]
_FT_LINE = [np.ascontiguousarray(t[2]) for t in _FT]
_FT_DP = [np.ascontiguousarray(t[3]) for t in _FT]
_FT_FLIP = [np.ascontiguousarray(t[4]) for t in _FT]


# ---------------------------------------------------------------------------
# PPM reconstruction
# ---------------------------------------------------------------------------

def reconstruct(prim_in, int n, bint new_mode, bint contact_on, double gamma,
                out_lo=None, out_hi=None):
    prim_arr = np.ascontiguousarray(prim_in)
    cdef double[:, :, :, ::1] prim = prim_arr
    cdef int m = prim_arr.shape[1]
    lo_arr = out_lo if out_lo is not None else np.zeros((NL, 6, m, m, m))
    hi_arr = out_hi if out_hi is not None else np.zeros((NL, 6, m, m, m))
    cdef double[:, :, :, :, ::1] lo = lo_arr
    cdef double[:, :, :, :, ::1] hi = hi_arr
    tmp_arr = np.empty((6, m, m, m))
    cdef double[:, :, :, ::1] tmp = tmp_arr
    cdef int nlines = NL if new_mode else 3
    cdef long fallback = 0
    cdef int l, v, i, j, k, dx, dy, dz
    cdef int ilo, ihi, jlo, jhi, klo, khi
    cdef double a, ap1, am1, ap2, v7, lov, hiv, lo_min, lo_max, diff, mid
    cdef double d2m, d2p, dr, eta_t, eta, slope_m, slope_p, pmin, rmin
    cdef bint bad

    with nogil:
        for l in range(nlines):
            dx = <int> DIRS[l, 0]
            dy = <int> DIRS[l, 1]
            dz = <int> DIRS[l, 2]
            # interface stencil needs c-d and c+2d in bounds per axis
            ilo = 2 if dx < 0 else 1
            ihi = (m - 1) if dx < 0 else (m - 2)
            jlo = 2 if dy < 0 else 1
            jhi = (m - 1) if dy < 0 else (m - 2)
            klo = 2 if dz < 0 else 1
            khi = (m - 1) if dz < 0 else (m - 2)
            for v in range(6):
                for i in range(ilo, ihi):
                    for j in range(jlo, jhi):
                        for k in range(klo, khi):
                            a = prim[v, i, j, k]
                            ap1 = prim[v, i + dx, j + dy, k + dz]
                            am1 = prim[v, i - dx, j - dy, k - dz]
                            ap2 = prim[v, i + 2 * dx, j + 2 * dy, k + 2 * dz]
                            v7 = (7.0 / 12.0) * (a + ap1) - (1.0 / 12.0) * (am1 + ap2)
                            lo_min = fmin(a, ap1)
                            lo_max = fmax(a, ap1)
                            if v7 < lo_min:
                                v7 = lo_min
                            if v7 > lo_max:
                                v7 = lo_max
                            tmp[v, i, j, k] = v7
            for v in range(6):
                for i in range(2, m - 2):
                    for j in range(2, m - 2):
                        for k in range(2, m - 2):
                            a = prim[v, i, j, k]
                            hiv = tmp[v, i, j, k]
                            lov = tmp[v, i - dx, j - dy, k - dz]
                            if (hiv - a) * (a - lov) <= 0.0:
                                lov = a
                                hiv = a
                            else:
                                diff = hiv - lov
                                mid = a - 0.5 * (lov + hiv)
                                if diff * mid > diff * diff / 6.0:
                                    lov = 3.0 * a - 2.0 * hiv
                                if -diff * diff / 6.0 > diff * mid:
                                    hiv = 3.0 * a - 2.0 * lov
                            lo[l, v, i, j, k] = lov
                            hi[l, v, i, j, k] = hiv
            if contact_on:
                for i in range(2, m - 2):
                    for j in range(2, m - 2):
                        for k in range(2, m - 2):
                            ap1 = prim[0, i + dx, j + dy, k + dz]
                            am1 = prim[0, i - dx, j - dy, k - dz]
                            dr = ap1 - am1
                            if fabs(dr) <= 1e-300:
                                continue
                            d2m = prim[0, i, j, k] - 2.0 * am1 + \
                                prim[0, i - 2 * dx, j - 2 * dy, k - 2 * dz]
                            d2p = prim[0, i + 2 * dx, j + 2 * dy, k + 2 * dz] - \
                                2.0 * ap1 + prim[0, i, j, k]
                            if d2m * d2p >= 0.0:
                                continue
                            if fabs(dr) - 0.01 * fmin(fabs(ap1), fabs(am1)) <= 0.0:
                                continue
                            pmin = fmin(prim[4, i + dx, j + dy, k + dz],
                                        prim[4, i - dx, j - dy, k - dz])
                            rmin = fmin(fabs(ap1), fabs(am1))
                            if fabs(prim[4, i + dx, j + dy, k + dz] -
                                    prim[4, i - dx, j - dy, k - dz]) / pmin >= \
                                    0.1 * gamma * fabs(dr) / rmin:
                                continue
                            eta_t = (d2m - d2p) / (6.0 * dr)
                            eta = 20.0 * (eta_t - 0.05)
                            if eta <= 0.0:
                                continue
                            if eta > 1.0:
                                eta = 1.0
                            slope_m = _mc_slope_at(prim, i - dx, j - dy, k - dz, dx, dy, dz)
                            slope_p = _mc_slope_at(prim, i + dx, j + dy, k + dz, dx, dy, dz)
                            lov = lo[l, 0, i, j, k]
                            hiv = hi[l, 0, i, j, k]
                            lo[l, 0, i, j, k] = lov * (1.0 - eta) + (am1 + 0.5 * slope_m) * eta
                            hi[l, 0, i, j, k] = hiv * (1.0 - eta) + (ap1 - 0.5 * slope_p) * eta
            for i in range(2, m - 2):
                for j in range(2, m - 2):
                    for k in range(2, m - 2):
                        bad = lo[l, 0, i, j, k] <= 0.0 or lo[l, 4, i, j, k] <= 0.0
                        if bad:
                            fallback += 1
                            for v in range(6):
                                lo[l, v, i, j, k] = prim[v, i, j, k]
                        bad = hi[l, 0, i, j, k] <= 0.0 or hi[l, 4, i, j, k] <= 0.0
                        if bad:
                            fallback += 1
                            for v in range(6):
                                hi[l, v, i, j, k] = prim[v, i, j, k]
    return lo_arr, hi_arr, int(fallback)


cdef inline double _mc_slope_at(double[:, :, :, ::1] prim, int i, int j, int k,
                                int dx, int dy, int dz) nogil:
    cdef double am1 = prim[0, i - dx, j - dy, k - dz]
    cdef double ap1 = prim[0, i + dx, j + dy, k + dz]
    cdef double a = prim[0, i, j, k]
    cdef double dc = 0.5 * (ap1 - am1)
    cdef double dl = 2.0 * (a - am1)
    cdef double dr = 2.0 * (ap1 - a)
    cdef double mag
    if dl * dr <= 0.0:
        return 0.0
    mag = fmin(fabs(dc), fmin(fabs(dl), fabs(dr)))
    if dc < 0.0:
        return -mag
    return mag


# ---------------------------------------------------------------------------
# central-upwind fluxes + Simpson face quadrature
# ---------------------------------------------------------------------------

cdef inline double _kt_point(double* L, double* R, int axis, double gamma,
                             double* out) nogil:
    cdef double rl = L[0], vxl = L[1], vyl = L[2], vzl = L[3], pl = L[4], tl = L[5]
    cdef double rr = R[0], vxr = R[1], vyr = R[2], vzr = R[3], pr = R[4], tr = R[5]
    cdef double cl = sqrt(gamma * pl / rl)
    cdef double cr = sqrt(gamma * pr / rr)
    cdef double vnl, vnr
    if axis == 0:
        vnl = vxl; vnr = vxr
    elif axis == 1:
        vnl = vyl; vnr = vyr
    else:
        vnl = vzl; vnr = vzr
    cdef double ap = fmax(0.0, fmax(vnl + cl, vnr + cr))
    cdef double am = fmin(0.0, fmin(vnl - cl, vnr - cr))
    cdef double ul[6]
    cdef double ur[6]
    cdef double fl[6]
    cdef double fr[6]
    cdef double kinl = 0.5 * rl * (vxl * vxl + vyl * vyl + vzl * vzl)
    cdef double kinr = 0.5 * rr * (vxr * vxr + vyr * vyr + vzr * vzr)
    ul[0] = rl; ul[1] = rl * vxl; ul[2] = rl * vyl; ul[3] = rl * vzl
    ul[4] = pl / (gamma - 1.0) + kinl; ul[5] = tl
    ur[0] = rr; ur[1] = rr * vxr; ur[2] = rr * vyr; ur[3] = rr * vzr
    ur[4] = pr / (gamma - 1.0) + kinr; ur[5] = tr
    cdef int v
    for v in range(6):
        fl[v] = ul[v] * vnl
        fr[v] = ur[v] * vnr
    fl[1 + axis] += pl
    fr[1 + axis] += pr
    fl[4] += pl * vnl
    fr[4] += pr * vnr
    cdef double denom = ap - am
    if denom > 0.0:
        for v in range(6):
            out[v] = (ap * fl[v] - am * fr[v] + (ap * am) * (ur[v] - ul[v])) / denom
    else:
        for v in range(6):
            out[v] = fl[v]
    return fmax(ap, -am)


def fluxes(lo_in, hi_in, int n, double gamma, bint new_mode, bint override_center):
    cdef double[:, :, :, :, ::1] lo = np.ascontiguousarray(lo_in)
    cdef double[:, :, :, :, ::1] hi = np.ascontiguousarray(hi_in)
    fx_arr = np.empty((6, n + 1, n, n))
    fy_arr = np.empty((6, n, n + 1, n))
    fz_arr = np.empty((6, n, n, n + 1))
    cdef double[:, :, :, ::1] fx = fx_arr
    cdef double[:, :, :, ::1] fy = fy_arr
    cdef double[:, :, :, ::1] fz = fz_arr
    cdef int[::1] kind0 = _FT_KIND[0], nrow0 = _FT_NROW[0], line0 = _FT_LINE[0], flip0 = _FT_FLIP[0]
    cdef int[:, ::1] dp0 = _FT_DP[0]
    cdef int[::1] kind1 = _FT_KIND[1], nrow1 = _FT_NROW[1], line1 = _FT_LINE[1], flip1 = _FT_FLIP[1]
    cdef int[:, ::1] dp1 = _FT_DP[1]
    cdef int[::1] kind2 = _FT_KIND[2], nrow2 = _FT_NROW[2], line2 = _FT_LINE[2], flip2 = _FT_FLIP[2]
    cdef int[:, ::1] dp2 = _FT_DP[2]
    cdef double amax = 0.0, a1, a2, a3
    with nogil:
        a1 = _flux_axis(lo, hi, fx, 0, n, gamma, new_mode, override_center,
                        kind0, nrow0, line0, dp0, flip0)
        a2 = _flux_axis(lo, hi, fy, 1, n, gamma, new_mode, override_center,
                        kind1, nrow1, line1, dp1, flip1)
        a3 = _flux_axis(lo, hi, fz, 2, n, gamma, new_mode, override_center,
                        kind2, nrow2, line2, dp2, flip2)
        amax = fmax(a1, fmax(a2, a3))
    return fx_arr, fy_arr, fz_arr, float(amax)


cdef double _flux_axis(double[:, :, :, :, ::1] lo, double[:, :, :, :, ::1] hi,
                       double[:, :, :, ::1] F, int axis, int n, double gamma,
                       bint new_mode, bint override_center,
                       int[::1] kind, int[::1] nrow, int[::1] rline,
                       int[:, ::1] rdp, int[::1] rflip) nogil:
    cdef int g = 3
    cdef int i0, i1, i2, pt, r, rr0, v, l, px, py, pz, qx, qy, qz
    cdef int lower0, lower1, lower2
    cdef double Ls[6]
    cdef double Rs[6]
    cdef double fv[6]
    cdef double acc[6]
    cdef double center[6]
    cdef double pdev[4][6]
    cdef double edev[6]
    cdef double vdev[6]
    cdef double pair01[6]
    cdef double amax = 0.0, sp, w
    cdef int d0, d1, d2, flip
    cdef int n0 = n + 1 if axis == 0 else n
    cdef int n1 = n + 1 if axis == 1 else n
    cdef int n2 = n + 1 if axis == 2 else n
    cdef int edge_i, vert_i
    for i0 in range(n0):
        for i1 in range(n1):
            for i2 in range(n2):
                lower0 = (g - 1 + i0) if axis == 0 else (g + i0)
                lower1 = (g - 1 + i1) if axis == 1 else (g + i1)
                lower2 = (g - 1 + i2) if axis == 2 else (g + i2)
                rr0 = 0
                edge_i = 0
                vert_i = 0
                for pt in range(9):
                    if kind[pt] != 0 and (not new_mode or override_center):
                        rr0 += nrow[pt]
                        continue
                    for v in range(6):
                        acc[v] = 0.0
                    for r in range(nrow[pt]):
                        l = rline[rr0 + r]
                        d0 = <int> DIRS[l, 0]
                        d1 = <int> DIRS[l, 1]
                        d2 = <int> DIRS[l, 2]
                        px = lower0 + rdp[rr0 + r, 0]
                        py = lower1 + rdp[rr0 + r, 1]
                        pz = lower2 + rdp[rr0 + r, 2]
                        qx = px + d0
                        qy = py + d1
                        qz = pz + d2
                        flip = rflip[rr0 + r]
                        for v in range(6):
                            if flip:
                                Ls[v] = lo[l, v, qx, qy, qz]
                                Rs[v] = hi[l, v, px, py, pz]
                            else:
                                Ls[v] = hi[l, v, px, py, pz]
                                Rs[v] = lo[l, v, qx, qy, qz]
                        sp = _kt_point(Ls, Rs, axis, gamma, fv)
                        if sp > amax:
                            amax = sp
                        if nrow[pt] == 4:
                            # pairwise sums keep mirror images bit-equal
                            if r == 0 or r == 2:
                                for v in range(6):
                                    pair01[v] = fv[v]
                            else:
                                for v in range(6):
                                    acc[v] += pair01[v] + fv[v]
                        else:
                            for v in range(6):
                                acc[v] += fv[v]
                    rr0 += nrow[pt]
                    if kind[pt] == 0:
                        for v in range(6):
                            center[v] = acc[v]
                    elif kind[pt] == 1:
                        w = 0.5
                        for v in range(6):
                            pdev[edge_i][v] = w * acc[v] - center[v]
                        edge_i += 1
                        if edge_i == 4:
                            for v in range(6):
                                edev[v] = (pdev[0][v] + pdev[1][v]) + (pdev[2][v] + pdev[3][v])
                    else:
                        w = 0.25
                        for v in range(6):
                            pdev[vert_i][v] = w * acc[v] - center[v]
                        vert_i += 1
                        if vert_i == 4:
                            for v in range(6):
                                vdev[v] = (pdev[0][v] + pdev[1][v]) + (pdev[2][v] + pdev[3][v])
                if new_mode and not override_center:
                    for v in range(6):
                        F[v, i0, i1, i2] = center[v] + (4.0 * edev[v] + vdev[v]) / 36.0
                else:
                    for v in range(6):
                        F[v, i0, i1, i2] = center[v]
    return amax


# ---------------------------------------------------------------------------
# FMM traversal
# ---------------------------------------------------------------------------

cdef struct PairStack:
    long* data
    long size
    long cap


cdef inline bint _push(PairStack* s, long a, long b) nogil:
    if s.size + 2 > s.cap:
        s.cap *= 2
        s.data = <long*> realloc(s.data, s.cap * sizeof(long))
        if s.data == NULL:
            return False
    s.data[s.size] = a
    s.data[s.size + 1] = b
    s.size += 2
    return True


def build_interactions(center_in, width_in, children_in, is_cell_in, long root,
                       double theta):
    """Same contract as the reference: grouped unordered interaction pairs."""
    cdef double[:, ::1] center = np.ascontiguousarray(center_in)
    cdef double[::1] width = np.ascontiguousarray(width_in)
    cdef long[:, ::1] children = np.ascontiguousarray(children_in, dtype=np.int64)
    cdef unsigned char[::1] is_cell = np.ascontiguousarray(is_cell_in, dtype=np.uint8)
    cdef double quant = 2.0 / float(np.min(width_in))

    cdef PairStack st
    st.cap = 1 << 16
    st.size = 0
    st.data = <long*> malloc(st.cap * sizeof(long))

    cdef long pcap = 1 << 16
    cdef long pn = 0
    cdef long* pa = <long*> malloc(pcap * sizeof(long))
    cdef long* pb = <long*> malloc(pcap * sizeof(long))
    cdef long* pk = <long*> malloc(pcap * sizeof(long))

    cdef long a, b, i, j, c, ca
    cdef double rx, ry, rz, d, wa, wb
    cdef long qx, qy, qz, key, flags
    cdef long BIAS = 1 << 16
    cdef long SPAN = 1 << 17
    cdef bint ok = True

    with nogil:
        _push(&st, root, root)
        while st.size > 0 and ok:
            b = st.data[st.size - 1]
            a = st.data[st.size - 2]
            st.size -= 2
            if a == b:
                if is_cell[a]:
                    continue
                for i in range(8):
                    ok = ok and _push(&st, children[a, i], children[a, i])
                    for j in range(i + 1, 8):
                        ok = ok and _push(&st, children[a, i], children[a, j])
                continue
            rx = center[b, 0] - center[a, 0]
            ry = center[b, 1] - center[a, 1]
            rz = center[b, 2] - center[a, 2]
            d = sqrt(rx * rx + ry * ry + rz * rz)
            wa = width[a]
            wb = width[b]
            if 0.5 * (wa + wb) < theta * d:
                pass
            elif is_cell[a] and is_cell[b]:
                pass
            else:
                if wa > wb:
                    for i in range(8):
                        ok = ok and _push(&st, children[a, i], b)
                elif wb > wa:
                    for i in range(8):
                        ok = ok and _push(&st, a, children[b, i])
                elif is_cell[a]:
                    for i in range(8):
                        ok = ok and _push(&st, a, children[b, i])
                elif is_cell[b]:
                    for i in range(8):
                        ok = ok and _push(&st, children[a, i], b)
                else:
                    for i in range(8):
                        for j in range(8):
                            ok = ok and _push(&st, children[a, i], children[b, j])
                continue
            # record the pair
            if pn >= pcap:
                pcap *= 2
                pa = <long*> realloc(pa, pcap * sizeof(long))
                pb = <long*> realloc(pb, pcap * sizeof(long))
                pk = <long*> realloc(pk, pcap * sizeof(long))
                if pa == NULL or pb == NULL or pk == NULL:
                    ok = False
                    break
            qx = llround(rx * quant)
            qy = llround(ry * quant)
            qz = llround(rz * quant)
            flags = (2 if is_cell[a] else 0) + (1 if is_cell[b] else 0)
            key = (((qx + BIAS) * SPAN + (qy + BIAS)) * SPAN + (qz + BIAS)) * 4 + flags
            pa[pn] = a
            pb[pn] = b
            pk[pn] = key
            pn += 1

    free(st.data)
    if not ok:
        free(pa); free(pb); free(pk)
        raise MemoryError("traversal stack allocation failed")

    pa_arr = np.empty(pn, dtype=np.int64)
    pb_arr = np.empty(pn, dtype=np.int64)
    pk_arr = np.empty(pn, dtype=np.int64)
    cdef long[::1] pav = pa_arr
    cdef long[::1] pbv = pb_arr
    cdef long[::1] pkv = pk_arr
    for i in range(pn):
        pav[i] = pa[i]
        pbv[i] = pb[i]
        pkv[i] = pk[i]
    free(pa); free(pb); free(pk)

    if pn == 0:
        return []
    keys, first_idx, inverse = np.unique(pk_arr, return_index=True, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    cen = np.asarray(center_in)
    out = []
    for gidx in range(len(keys)):
        sel = order[bounds[gidx] : bounds[gidx + 1]]
        f = int(keys[gidx] & 3)
        i0 = int(first_idx[gidx])
        R = cen[pb_arr[i0]] - cen[pa_arr[i0]]
        out.append((R, pa_arr[sel], pb_arr[sel], bool(f & 2), bool(f & 1)))
    return out


# ---------------------------------------------------------------------------
# interaction streaming (multipole-to-local plus exact cell pairs)
# ---------------------------------------------------------------------------

cdef int IDX2[3][3]
IDX2[0][0] = 0; IDX2[0][1] = 1; IDX2[0][2] = 2
IDX2[1][0] = 1; IDX2[1][1] = 3; IDX2[1][2] = 4
IDX2[2][0] = 2; IDX2[2][1] = 4; IDX2[2][2] = 5

cdef long S2A[6]
cdef long S2B[6]
S2A[0] = 0; S2B[0] = 0
S2A[1] = 0; S2B[1] = 1
S2A[2] = 0; S2B[2] = 2
S2A[3] = 1; S2B[3] = 1
S2A[4] = 1; S2B[4] = 2
S2A[5] = 2; S2B[5] = 2
cdef double MULT2[6]
MULT2[0] = 1.0; MULT2[1] = 2.0; MULT2[2] = 2.0
MULT2[3] = 1.0; MULT2[4] = 2.0; MULT2[5] = 1.0

cdef long S3A[10]
cdef long S3B[10]
cdef long S3C[10]
cdef double MULT3[10]
_s3 = [(0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 1), (0, 1, 2),
       (0, 2, 2), (1, 1, 1), (1, 1, 2), (1, 2, 2), (2, 2, 2)]
_m3 = [1.0, 3.0, 3.0, 3.0, 6.0, 3.0, 1.0, 3.0, 3.0, 1.0]
for _i in range(10):
    S3A[_i] = _s3[_i][0]
    S3B[_i] = _s3[_i][1]
    S3C[_i] = _s3[_i][2]
    MULT3[_i] = _m3[_i]

cdef int IDX3[3][3][3]
for _a in range(3):
    for _b in range(3):
        for _c in range(3):
            IDX3[_a][_b][_c] = _s3.index(tuple(sorted((_a, _b, _c))))


cdef inline void _m2l_add(double* M, double* D, double* L) nogil:
    """L += m2l(M, D) with the same accumulation order as the reference."""
    cdef double M0 = M[0]
    cdef double acc
    cdef int a, b, i
    acc = D[0] * M0
    for a in range(3):
        acc = acc - D[1 + a] * M[1 + a]
    for i in range(6):
        acc = acc + 0.5 * MULT2[i] * D[4 + i] * M[4 + i]
    for i in range(10):
        acc = acc - (MULT3[i] / 6.0) * D[10 + i] * M[10 + i]
    L[0] += acc
    for a in range(3):
        acc = D[1 + a] * M0
        for b in range(3):
            acc = acc - D[4 + IDX2[a][b]] * M[1 + b]
        for i in range(6):
            acc = acc + 0.5 * MULT2[i] * D[10 + IDX3[a][S2A[i]][S2B[i]]] * M[4 + i]
        L[1 + a] += acc
    for i in range(6):
        acc = D[4 + i] * M0
        for b in range(3):
            acc = acc - D[10 + IDX3[S2A[i]][S2B[i]][b]] * M[1 + b]
        L[4 + i] += acc
    for i in range(10):
        L[10 + i] += D[10 + i] * M0


def m2l_apply(groups, M_in, L_in):
    cdef double[:, ::1] M = M_in
    cdef double[:, ::1] L = L_in
    from ..gravity.multipole import flip_derivatives, kernel_derivatives

    cdef double[::1] Dv
    cdef double[::1] Dfv
    cdef long[::1] aa
    cdef long[::1] bb
    cdef long i, k, ea, eb
    cdef bint a_cell, b_cell
    cdef double D0, D1x, D1y, D1z, ma, mb
    for R, aidx, bidx, ac, bc in groups:
        D = kernel_derivatives(R)
        Df = flip_derivatives(D)
        Dv = D
        Dfv = Df
        aa = aidx
        bb = bidx
        a_cell = ac
        b_cell = bc
        k = aa.shape[0]
        if a_cell and b_cell:
            D0 = Dv[0]
            D1x = Dv[1]; D1y = Dv[2]; D1z = Dv[3]
            with nogil:
                for i in range(k):
                    ea = aa[i]
                    eb = bb[i]
                    ma = M[ea, 0]
                    mb = M[eb, 0]
                    L[eb, 0] += ma * D0
                    L[ea, 0] += mb * D0
                    L[eb, 1] += ma * D1x
                    L[ea, 1] += mb * (-D1x)
                    L[eb, 2] += ma * D1y
                    L[ea, 2] += mb * (-D1y)
                    L[eb, 3] += ma * D1z
                    L[ea, 3] += mb * (-D1z)
        else:
            with nogil:
                for i in range(k):
                    ea = aa[i]
                    eb = bb[i]
                    _m2l_add(&M[ea, 0], &Dv[0], &L[eb, 0])
                    _m2l_add(&M[eb, 0], &Dfv[0], &L[ea, 0])


def direct_traversal_eval(center_in, width_in, children_in, is_cell_in, long root,
                          double theta, mass_in):
    cdef double[:, ::1] center = np.ascontiguousarray(center_in)
    cdef double[::1] width = np.ascontiguousarray(width_in)
    cdef long[:, ::1] children = np.ascontiguousarray(children_in, dtype=np.int64)
    cdef unsigned char[::1] is_cell = np.ascontiguousarray(is_cell_in, dtype=np.uint8)
    cdef double[::1] mass = np.ascontiguousarray(mass_in)
    cdef long N = center.shape[0]
    phi_arr = np.zeros(N)
    g_arr = np.zeros((N, 3))
    cdef double[::1] phi = phi_arr
    cdef double[:, ::1] g = g_arr

    cdef PairStack st
    st.cap = 1 << 16
    st.size = 0
    st.data = <long*> malloc(st.cap * sizeof(long))
    cdef long a, b, i, j
    cdef double rx, ry, rz, r2, d, inv_r, inv_r3, wa, wb
    cdef bint ok = True
    cdef bint bad_mac = False

    with nogil:
        _push(&st, root, root)
        while st.size > 0 and ok:
            b = st.data[st.size - 1]
            a = st.data[st.size - 2]
            st.size -= 2
            if a == b:
                if is_cell[a]:
                    continue
                for i in range(8):
                    ok = ok and _push(&st, children[a, i], children[a, i])
                    for j in range(i + 1, 8):
                        ok = ok and _push(&st, children[a, i], children[a, j])
                continue
            rx = center[b, 0] - center[a, 0]
            ry = center[b, 1] - center[a, 1]
            rz = center[b, 2] - center[a, 2]
            r2 = rx * rx + ry * ry + rz * rz
            d = sqrt(r2)
            wa = width[a]
            wb = width[b]
            if 0.5 * (wa + wb) < theta * d:
                bad_mac = True
                break
            if is_cell[a] and is_cell[b]:
                inv_r = 1.0 / d
                inv_r3 = inv_r / r2
                phi[b] -= mass[a] * inv_r
                phi[a] -= mass[b] * inv_r
                g[b, 0] -= mass[a] * rx * inv_r3
                g[b, 1] -= mass[a] * ry * inv_r3
                g[b, 2] -= mass[a] * rz * inv_r3
                g[a, 0] += mass[b] * rx * inv_r3
                g[a, 1] += mass[b] * ry * inv_r3
                g[a, 2] += mass[b] * rz * inv_r3
                continue
            if wa > wb:
                for i in range(8):
                    ok = ok and _push(&st, children[a, i], b)
            elif wb > wa:
                for i in range(8):
                    ok = ok and _push(&st, a, children[b, i])
            elif is_cell[a]:
                for i in range(8):
                    ok = ok and _push(&st, a, children[b, i])
            elif is_cell[b]:
                for i in range(8):
                    ok = ok and _push(&st, children[a, i], b)
            else:
                for i in range(8):
                    for j in range(8):
                        ok = ok and _push(&st, children[a, i], children[b, j])
    free(st.data)
    if not ok:
        raise MemoryError("traversal stack allocation failed")
    if bad_mac:
        raise ValueError("direct_traversal_eval expects an always-reject MAC")
    return phi_arr, g_arr


def direct_sum_pairs(pos_in, mass_in, block=0):
    """O(N^2) pairwise field; raises on coincident positions."""
    cdef double[:, ::1] pos = np.ascontiguousarray(pos_in, dtype=np.float64)
    cdef double[::1] mass = np.ascontiguousarray(mass_in, dtype=np.float64)
    cdef long N = pos.shape[0]
    phi_arr = np.zeros(N)
    g_arr = np.zeros((N, 3))
    cdef double[::1] phi = phi_arr
    cdef double[:, ::1] g = g_arr
    cdef long i, j
    cdef double rx, ry, rz, r2, inv_r, inv_r3
    cdef bint coincident = False
    with nogil:
        for i in range(N):
            for j in range(i + 1, N):
                rx = pos[i, 0] - pos[j, 0]
                ry = pos[i, 1] - pos[j, 1]
                rz = pos[i, 2] - pos[j, 2]
                r2 = rx * rx + ry * ry + rz * rz
                if r2 == 0.0:
                    coincident = True
                    break
                inv_r = 1.0 / sqrt(r2)
                inv_r3 = inv_r / r2
                phi[i] -= mass[j] * inv_r
                phi[j] -= mass[i] * inv_r
                g[i, 0] -= mass[j] * rx * inv_r3
                g[i, 1] -= mass[j] * ry * inv_r3
                g[i, 2] -= mass[j] * rz * inv_r3
                g[j, 0] += mass[i] * rx * inv_r3
                g[j, 1] += mass[i] * ry * inv_r3
                g[j, 2] += mass[i] * rz * inv_r3
            if coincident:
                break
    if coincident:
        raise ValueError("coincident cell centers in direct summation")
    return phi_arr, g_arr
