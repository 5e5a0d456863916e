"""Inter-level transfer operators: conservative restriction and
minmod-limited linear prolongation.

Restriction is the exact arithmetic average of the eight child cells.
Prolongation reconstructs a linear profile per coarse cell with minmod
slopes (one-sided at block edges) and samples it at the child centers,
so restrict(prolong(x)) == x and linear data is reproduced exactly.
"""

import numpy as np


def minmod(a, b):
    out = np.where(np.abs(a) < np.abs(b), a, b)
    return np.where(a * b > 0.0, out, 0.0)


def _edge_padded(block, axis):
    """Pad by one cell along `axis` replicating the edge value plus the
    one-sided difference, so minmod at the edge reduces to the one-sided
    slope."""
    lo = 2 * np.take(block, [0], axis=axis) - np.take(block, [1], axis=axis)
    hi = 2 * np.take(block, [-1], axis=axis) - np.take(block, [-2], axis=axis)
    return np.concatenate([lo, block, hi], axis=axis)


def slopes_limited(block, axis):
    """Minmod-limited per-cell slope (per unit cell width) along one axis."""
    if block.shape[axis] == 1:
        return np.zeros_like(block)
    pad = _edge_padded(block, axis)
    n = block.shape[axis]
    fwd = np.take(pad, range(2, n + 2), axis=axis) - np.take(pad, range(1, n + 1), axis=axis)
    bwd = np.take(pad, range(1, n + 1), axis=axis) - np.take(pad, range(0, n), axis=axis)
    return minmod(fwd, bwd)


def prolong_block(block):
    """Prolong (F, nx, ny, nz) coarse cells to (F, 2nx, 2ny, 2nz) fine cells."""
    block = np.asarray(block)
    sx = slopes_limited(block, 1)
    sy = slopes_limited(block, 2)
    sz = slopes_limited(block, 3)
    f, nx, ny, nz = block.shape
    out = np.empty((f, 2 * nx, 2 * ny, 2 * nz), dtype=block.dtype)
    for cx in (0, 1):
        ox = 0.25 if cx else -0.25
        for cy in (0, 1):
            oy = 0.25 if cy else -0.25
            for cz in (0, 1):
                oz = 0.25 if cz else -0.25
                out[:, cx::2, cy::2, cz::2] = block + sx * ox + sy * oy + sz * oz
    return out


def restrict_block(fine):
    """Average (F, 2nx, 2ny, 2nz) fine cells to (F, nx, ny, nz) coarse cells."""
    fine = np.asarray(fine)
    return 0.125 * (
        ((fine[:, 0::2, 0::2, 0::2] + fine[:, 1::2, 0::2, 0::2])
         + (fine[:, 0::2, 1::2, 0::2] + fine[:, 1::2, 1::2, 0::2]))
        + ((fine[:, 0::2, 0::2, 1::2] + fine[:, 1::2, 0::2, 1::2])
           + (fine[:, 0::2, 1::2, 1::2] + fine[:, 1::2, 1::2, 1::2]))
    )


def prolong(parent_region):
    """Child cells from a coarse block."""
    return prolong_block(parent_region)


def restrict(child_cells):
    """Parent cells from a fine block."""
    return restrict_block(child_cells)
