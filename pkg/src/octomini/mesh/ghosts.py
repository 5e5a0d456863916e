"""Ghost-layer exchange.

Each leaf's ghost shell is partitioned into 26 boxes (6 faces, 12 edges,
8 corners).  A box is filled from, in order of availability: a same-level
neighbor's interior, limited-linear prolongation of a coarse neighbor,
restriction of finer neighbors, or the physical boundary rule.  Only
interior cells are ever read, so the exchange is deterministic under any
task order and idempotent.

Boundary corners compose per axis: the in-domain components select the
source neighbor, and off-domain components remap indices into that source
(mirror for reflecting walls, clamp for outflow).
"""

import numpy as np

from ..geometry import GHOST, SX
from .transfer import prolong_block, restrict_block
from .tree import NEIGHBOR_OFFSETS


def _region_ranges(r, n):
    """Target index ranges of region r in padded coordinates, per axis."""
    g = GHOST
    out = []
    for c in r:
        if c == -1:
            out.append((0, g))
        elif c == 0:
            out.append((g, g + n))
        else:
            out.append((g + n, g + n + g))
    return out


def _source_block(tree, leaf, r_dom):
    """Materialize region `r_dom` of `leaf` at the leaf's own resolution.

    Axes with r_dom == 0 span the full interior width n; axes with ±1 span
    the 3 cells adjacent to the shared face.  Returns an array of shape
    (F, bx, by, bz).
    """
    n = leaf.subgrid.n
    g = GHOST
    if not any(r_dom):
        return leaf.subgrid.interior
    pos = tree.neighbor_ipos(leaf, r_dom)
    assert pos is not None
    cover = tree.find_leaf_region(leaf.level, pos)
    role = cover[0][1]
    if role == "same":
        nb = cover[0][0]
        sl = []
        for c in r_dom:
            if c == 1:
                sl.append(slice(g, g + g))
            elif c == -1:
                sl.append(slice(g + n - g, g + n))
            else:
                sl.append(slice(g, g + n))
        return nb.subgrid.u[:, sl[0], sl[1], sl[2]]
    if role == "coarse":
        nb = cover[0][0]
        # fine-cell ranges of the box within the `pos` block
        fr = []
        for c in r_dom:
            fr.append((0, g) if c == 1 else ((n - g, n) if c == -1 else (0, n)))
        oct_ = [int(pos[a]) & 1 for a in range(3)]
        csl, foff = [], []
        for a in range(3):
            c0 = oct_[a] * (n // 2) + fr[a][0] // 2
            c1 = oct_[a] * (n // 2) + (fr[a][1] - 1) // 2 + 1
            m0 = max(c0 - 1, 0)
            m1 = min(c1 + 1, n)
            csl.append(slice(m0, m1))
            # offset of the wanted fine cells inside the prolonged block
            foff.append(fr[a][0] + oct_[a] * n - 2 * m0)
        fine = prolong_block(nb.subgrid.interior[:, csl[0], csl[1], csl[2]])
        out = fine[
            :,
            foff[0] : foff[0] + (fr[0][1] - fr[0][0]),
            foff[1] : foff[1] + (fr[1][1] - fr[1][0]),
            foff[2] : foff[2] + (fr[2][1] - fr[2][0]),
        ]
        return out
    # finer neighbors: restrict each child leaf's overlap
    shape = [g if c else n for c in r_dom]
    out = np.empty((leaf.subgrid.u.shape[0],) + tuple(shape), dtype=np.float64)
    tr = []  # target-cell ranges within the pos block, per axis
    for c in r_dom:
        tr.append((0, g) if c == 1 else ((n - g, n) if c == -1 else (0, n)))
    for child, _ in cover:
        k = [int(child.ipos[a]) & 1 for a in range(3)]
        src_sl, dst_sl = [], []
        ok = True
        for a in range(3):
            # coarse cells covered by this child along axis a
            c0 = max(tr[a][0], k[a] * (n // 2))
            c1 = min(tr[a][1], (k[a] + 1) * (n // 2))
            if c0 >= c1:
                ok = False
                break
            f0 = 2 * c0 - k[a] * n  # fine index inside the child interior
            f1 = 2 * c1 - k[a] * n
            src_sl.append(slice(g + f0, g + f1))
            dst_sl.append(slice(c0 - tr[a][0], c1 - tr[a][0]))
        if not ok:
            continue
        out[:, dst_sl[0], dst_sl[1], dst_sl[2]] = restrict_block(
            child.subgrid.u[:, src_sl[0], src_sl[1], src_sl[2]]
        )
    return out


def fill_leaf_ghosts(tree, leaf):
    """Fill all 26 ghost boxes of one leaf from the frozen interiors."""
    n = leaf.subgrid.n
    u = leaf.subgrid.u
    span = 2**leaf.level
    for r in NEIGHBOR_OFFSETS:
        off_axes = {}
        r_dom = list(r)
        if tree.boundary != "periodic":
            for a in range(3):
                p = leaf.ipos[a] + r[a]
                if p < 0 or p >= span:
                    off_axes[a] = r[a]
                    r_dom[a] = 0
        block = _source_block(tree, leaf, tuple(r_dom))
        sel = []
        flips = []
        for a in range(3):
            odim = block.shape[1 + a]
            if a in off_axes:
                t = np.arange(GHOST)
                if tree.boundary == "reflecting":
                    # mirror about the wall: outermost ghost <- innermost interior
                    sel.append(odim - 1 - t if off_axes[a] == 1 else GHOST - 1 - t)
                    flips.append(a)
                else:  # outflow: clamp to the wall cell
                    sel.append(np.full(GHOST, odim - 1 if off_axes[a] == 1 else 0))
            else:
                sel.append(np.arange(odim))
        piece = block[:, sel[0][:, None, None], sel[1][None, :, None], sel[2][None, None, :]]
        if flips:
            piece = piece.copy()
            for a in flips:
                piece[SX + a] = -piece[SX + a]
        rg = _region_ranges(r, n)
        u[:, rg[0][0] : rg[0][1], rg[1][0] : rg[1][1], rg[2][0] : rg[2][1]] = piece


def exchange_ghosts(tree, leaves=None):
    """Fill ghost layers of every leaf (or the given subset)."""
    for leaf in leaves if leaves is not None else tree.leaves():
        fill_leaf_ghosts(tree, leaf)
    return tree
