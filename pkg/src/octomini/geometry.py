"""Shared grid geometry: field indices, reconstruction lines, quadrature tables.

The 26 quadrature points of a cell sit at the centers of its 6 faces, the
midpoints of its 12 edges, and its 8 vertices.  Each point lies on exactly one
of 13 lines through the cell center connecting it to a neighboring cell
center; reconstruction produces a left/right state pair per point along that
line.  The tables built here enumerate, for every face of a cell, which line
interfaces contribute to each of the face's 9 quadrature points.  Both the
compiled and the pure-python kernels consume these tables, so the geometry is
defined in one place only.
"""

import numpy as np

# conserved fields
RHO, SX, SY, SZ, EGAS, TAU = range(6)
NFIELDS = 6
# primitive fields: rho, vx, vy, vz, pressure, tau
PRHO, PVX, PVY, PVZ, PP, PTAU = range(6)

GHOST = 3  # ghost layer width; covers the 5-cell stencil plus boundary interfaces

# the 13 reconstruction line directions (first nonzero component positive)
LINE_DIRS = np.array(
    [
        (1, 0, 0),
        (0, 1, 0),
        (0, 0, 1),
        (1, 1, 0),
        (1, -1, 0),
        (1, 0, 1),
        (1, 0, -1),
        (0, 1, 1),
        (0, 1, -1),
        (1, 1, 1),
        (1, 1, -1),
        (1, -1, 1),
        (1, -1, -1),
    ],
    dtype=np.int64,
)
NLINES = len(LINE_DIRS)
AXIS_LINES = (0, 1, 2)

# Simpson tensor-product weights over the 3x3 face points
W_CENTER = 16.0 / 36.0
W_EDGE = 4.0 / 36.0
W_VERTEX = 1.0 / 36.0


def _build_face_tables():
    """For each face-normal axis, list the line interfaces behind each of the
    face's 9 quadrature points.

    A face between lower cell c and upper cell c+e_a has points at transverse
    offsets (tb, tc) in {-1/2, 0, +1/2}.  A line with direction d passes
    through a point iff |d_a| = 1 and, per transverse axis, d is diagonal
    exactly where the point offset is half-integer.  The interface along d
    through the point joins P = point - d/2 and P + d.  Rows carry P relative
    to the lower cell and whether the canonical direction runs against the
    face normal (in which case the stored left/right states swap roles).

    Returns, per axis, a list of 9 point entries: (kind, rows) with kind in
    {"center", "edge", "vertex"} and rows = list of (line, dP(3,), flipped).
    """
    tables = []
    for a in range(3):
        b, c = [ax for ax in range(3) if ax != a]
        points = []
        offsets = [0.0, -0.5, 0.5]
        for tb in offsets:
            for tc in offsets:
                nhalf = (abs(tb) == 0.5) + (abs(tc) == 0.5)
                kind = ("center", "edge", "vertex")[nhalf]
                rows = []
                for line, d in enumerate(LINE_DIRS):
                    if abs(d[a]) != 1:
                        continue
                    if (abs(d[b]) == 1) != (abs(tb) == 0.5):
                        continue
                    if (abs(d[c]) == 1) != (abs(tc) == 0.5):
                        continue
                    # point position relative to the lower-cell center
                    pt = np.zeros(3)
                    pt[a] = 0.5
                    pt[b] = tb
                    pt[c] = tc
                    P = pt - d / 2.0
                    assert np.allclose(P, np.round(P))
                    rows.append((line, np.round(P).astype(np.int64), d[a] < 0))
                assert len(rows) == 2**nhalf
                points.append((kind, rows))
        # order: center first, then edges, then vertices (stable within kind)
        points.sort(key=lambda kr: ("center", "edge", "vertex").index(kr[0]))
        assert [k for k, _ in points].count("center") == 1
        tables.append(points)
    return tables


FACE_TABLES = _build_face_tables()


def flat_face_table(axis):
    """Flatten FACE_TABLES[axis] into int arrays for the compiled kernels.

    Returns (point_kind(9,), nrows(9,), line(rows,), dp(rows,3), flip(rows,))
    where point_kind is 0=center, 1=edge, 2=vertex.
    """
    kinds, nrows, lines, dps, flips = [], [], [], [], []
    for kind, rows in FACE_TABLES[axis]:
        kinds.append(("center", "edge", "vertex").index(kind))
        nrows.append(len(rows))
        for line, dP, flip in rows:
            lines.append(line)
            dps.append(dP)
            flips.append(1 if flip else 0)
    return (
        np.array(kinds, dtype=np.int32),
        np.array(nrows, dtype=np.int32),
        np.array(lines, dtype=np.int32),
        np.array(dps, dtype=np.int32),
        np.array(flips, dtype=np.int32),
    )
