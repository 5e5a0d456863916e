"""Cartesian multipole/local expansion algebra through order 3.

Symmetric tensors are stored in canonical component order:

    rank 2: xx xy xz yy yz zz                   (6)
    rank 3: xxx xxy xxz xyy xyz xzz yyy yyz yzz zzz   (10)

A full expansion is a 20-vector [M0, M1(3), M2(6), M3(10)].  Moments are
raw sums (no factorial prefactors): M2_ab = sum m * d_a * d_b, etc.; the
1/p! weights live in the contraction formulas.  The interaction kernel is
g(R) = -1/|R| so a monopole contributes phi = -m/r and g = -grad(phi)
points toward the source.
"""

from dataclasses import dataclass

import numpy as np

S2 = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
S3 = [
    (0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 1), (0, 1, 2),
    (0, 2, 2), (1, 1, 1), (1, 1, 2), (1, 2, 2), (2, 2, 2),
]
MULT2 = np.array([1.0, 2.0, 2.0, 1.0, 2.0, 1.0])
MULT3 = np.array([1.0, 3.0, 3.0, 3.0, 6.0, 3.0, 1.0, 3.0, 3.0, 1.0])

_IDX2 = {}
for i, (a, b) in enumerate(S2):
    _IDX2[(a, b)] = i
    _IDX2[(b, a)] = i
_IDX3 = {}
for i, t in enumerate(S3):
    for p in {(t[0], t[1], t[2]), (t[0], t[2], t[1]), (t[1], t[0], t[2]),
              (t[1], t[2], t[0]), (t[2], t[0], t[1]), (t[2], t[1], t[0])}:
        _IDX3[p] = i

NCOMP = 20


def idx2(a, b):
    return 1 + 3 + _IDX2[(a, b)]


def idx3(a, b, c):
    return 1 + 3 + 6 + _IDX3[(a, b, c)]


@dataclass
class MultipoleExpansion:
    """Order-3 moments about `center` (dense views for inspection)."""

    center: np.ndarray
    M0: float
    M1: np.ndarray  # (3,)
    M2: np.ndarray  # (3,3) symmetric
    M3: np.ndarray  # (3,3,3) symmetric

    @classmethod
    def from_flat(cls, center, flat):
        M2 = np.empty((3, 3))
        for i, (a, b) in enumerate(S2):
            M2[a, b] = M2[b, a] = flat[4 + i]
        M3 = np.empty((3, 3, 3))
        for i, (a, b, c) in enumerate(S3):
            v = flat[10 + i]
            for p in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
                M3[p] = v
        return cls(np.asarray(center, dtype=float), float(flat[0]), np.array(flat[1:4]), M2, M3)

    def to_flat(self):
        flat = np.zeros(NCOMP)
        flat[0] = self.M0
        flat[1:4] = self.M1
        for i, (a, b) in enumerate(S2):
            flat[4 + i] = self.M2[a, b]
        for i, t in enumerate(S3):
            flat[10 + i] = self.M3[t]
        return flat


def moments_from_points(points, masses, center):
    """Raw moments of point masses about `center` (direct summation)."""
    d = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    m = np.asarray(masses, dtype=float)
    flat = np.zeros(NCOMP)
    flat[0] = m.sum()
    flat[1:4] = (m[:, None] * d).sum(axis=0)
    for i, (a, b) in enumerate(S2):
        flat[4 + i] = (m * d[:, a] * d[:, b]).sum()
    for i, (a, b, c) in enumerate(S3):
        flat[10 + i] = (m * d[:, a] * d[:, b] * d[:, c]).sum()
    return flat


def translate_moments(flat, t):
    """Moments about center+(-t)... i.e. re-expand about a center displaced
    by -t: with t = child_center - parent_center, child moments become
    parent moments.  Operates on (..., 20) stacks; t is (..., 3)."""
    flat = np.asarray(flat, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.empty_like(flat)
    M0 = flat[..., 0]
    M1 = [flat[..., 1 + a] for a in range(3)]
    tt = [t[..., a] for a in range(3)]
    out[..., 0] = M0
    for a in range(3):
        out[..., 1 + a] = M1[a] + M0 * tt[a]
    for i, (a, b) in enumerate(S2):
        out[..., 4 + i] = (
            flat[..., 4 + i] + M1[a] * tt[b] + M1[b] * tt[a] + M0 * tt[a] * tt[b]
        )
    for i, (a, b, c) in enumerate(S3):
        m2ab = flat[..., 4 + _IDX2[(a, b)]]
        m2ac = flat[..., 4 + _IDX2[(a, c)]]
        m2bc = flat[..., 4 + _IDX2[(b, c)]]
        out[..., 10 + i] = (
            flat[..., 10 + i]
            + m2ab * tt[c] + m2ac * tt[b] + m2bc * tt[a]
            + M1[a] * tt[b] * tt[c] + M1[b] * tt[a] * tt[c] + M1[c] * tt[a] * tt[b]
            + M0 * tt[a] * tt[b] * tt[c]
        )
    return out


def translate_local(flat, s):
    """Local expansion re-centered by s = child_center - parent_center."""
    flat = np.asarray(flat, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(flat.shape[:-1], s.shape[:-1])
    out = np.empty(shape + (NCOMP,), dtype=float)
    ss = [s[..., a] for a in range(3)]
    L1 = [flat[..., 1 + a] for a in range(3)]

    def L2(a, b):
        return flat[..., 4 + _IDX2[(a, b)]]

    def L3(a, b, c):
        return flat[..., 10 + _IDX3[(a, b, c)]]

    acc0 = flat[..., 0].copy()
    for a in range(3):
        acc0 = acc0 + L1[a] * ss[a]
    for i, (a, b) in enumerate(S2):
        acc0 = acc0 + 0.5 * MULT2[i] * L2(a, b) * ss[a] * ss[b]
    for i, (a, b, c) in enumerate(S3):
        acc0 = acc0 + (MULT3[i] / 6.0) * L3(a, b, c) * ss[a] * ss[b] * ss[c]
    out[..., 0] = acc0
    for a in range(3):
        acc = L1[a].copy()
        for b in range(3):
            acc = acc + L2(a, b) * ss[b]
        for i, (b, c) in enumerate(S2):
            acc = acc + 0.5 * MULT2[i] * L3(a, b, c) * ss[b] * ss[c]
        out[..., 1 + a] = acc
    for i, (a, b) in enumerate(S2):
        acc = L2(a, b).copy()
        for c in range(3):
            acc = acc + L3(a, b, c) * ss[c]
        out[..., 4 + i] = acc
    out[..., 10:] = flat[..., 10:]
    return out


def kernel_derivatives(R):
    """D0..D3 of g(R) = -1/|R| as a flat 20-vector."""
    R = np.asarray(R, dtype=float)
    r2 = float(R @ R)
    r = np.sqrt(r2)
    r3 = r2 * r
    r5 = r3 * r2
    r7 = r5 * r2
    D = np.empty(NCOMP)
    D[0] = -1.0 / r
    D[1:4] = R / r3
    for i, (a, b) in enumerate(S2):
        D[4 + i] = (1.0 if a == b else 0.0) / r3 - 3.0 * R[a] * R[b] / r5
    for i, (a, b, c) in enumerate(S3):
        term = 15.0 * R[a] * R[b] * R[c] / r7
        term -= 3.0 * ((a == b) * R[c] + (a == c) * R[b] + (b == c) * R[a]) / r5
        D[10 + i] = term
    return D


def flip_derivatives(D):
    """D evaluated at -R: odd-rank components change sign."""
    out = D.copy()
    out[..., 1:4] *= -1.0
    out[..., 10:] *= -1.0
    return out


def m2l(M, D):
    """Local expansion increment at the target from source moments M and
    kernel derivatives D(R_target - R_source).  Operates on (..., 20)."""
    M = np.asarray(M, dtype=float)
    L = np.zeros(np.broadcast_shapes(M.shape[:-1], D.shape[:-1]) + (NCOMP,))
    M0 = M[..., 0]
    # L0 = D0 M0 - D1.M1 + 1/2 D2:M2 - 1/6 D3:::M3
    acc = D[..., 0] * M0
    for a in range(3):
        acc = acc - D[..., 1 + a] * M[..., 1 + a]
    for i in range(6):
        acc = acc + 0.5 * MULT2[i] * D[..., 4 + i] * M[..., 4 + i]
    for i in range(10):
        acc = acc - (MULT3[i] / 6.0) * D[..., 10 + i] * M[..., 10 + i]
    L[..., 0] = acc
    # L1_a = D1_a M0 - D2_ab M1_b + 1/2 D3_abc M2_bc
    for a in range(3):
        acc = D[..., 1 + a] * M0
        for b in range(3):
            acc = acc - D[..., 4 + _IDX2[(a, b)]] * M[..., 1 + b]
        for i, (b, c) in enumerate(S2):
            acc = acc + 0.5 * MULT2[i] * D[..., 10 + _IDX3[(a, b, c)]] * M[..., 4 + i]
        L[..., 1 + a] = acc
    # L2_ab = D2_ab M0 - D3_abc M1_c
    for i, (a, b) in enumerate(S2):
        acc = D[..., 4 + i] * M0
        for c in range(3):
            acc = acc - D[..., 10 + _IDX3[(a, b, c)]] * M[..., 1 + c]
        L[..., 4 + i] = acc
    # L3 = D3 M0
    for i in range(10):
        L[..., 10 + i] = D[..., 10 + i] * M0
    return L
