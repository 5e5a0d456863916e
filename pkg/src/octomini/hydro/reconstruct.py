"""PPM reconstruction at the 26 quadrature points of every cell."""

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..geometry import GHOST, LINE_DIRS, NLINES
from .flux import PrimitiveState


@dataclass(frozen=True)
class HydroMode:
    scheme: str = "new"  # "old": face centers only; "new": all 26 points
    contact_detection: bool = False
    # testing hook: force all nine face-quadrature inputs to the center value
    quadrature_override: bool = False

    def __post_init__(self):
        if self.scheme not in ("old", "new"):
            raise ValueError("scheme must be 'old' or 'new'")

    @property
    def is_new(self):
        return self.scheme == "new"


class QuadraturePointSet:
    """Reconstructed left/right primitive states per cell and line.

    `lo[l, v]` holds the state at cell center minus dirs[l]/2, `hi[l, v]`
    at plus dirs[l]/2; cells within two of the padded-array border are
    not valid.
    """

    def __init__(self, lo, hi, n, mode, fallback_count):
        self.lo = lo
        self.hi = hi
        self.n = n
        self.mode = mode
        self.fallback_count = fallback_count

    @property
    def points_per_cell(self):
        return 26 if self.mode.is_new else 6

    def line_states(self, cell, line, eos):
        """(left, right) PrimitiveState pair at the interface between
        `cell` and `cell + dirs[line]` (padded indices)."""
        d = LINE_DIRS[line]
        c2 = tuple(np.asarray(cell) + d)
        lvals = self.hi[line][:, cell[0], cell[1], cell[2]]
        rvals = self.lo[line][:, c2[0], c2[1], c2[2]]
        mk = lambda v: PrimitiveState(
            v[0], v[1], v[2], v[3], v[4],
            v[4] / ((eos.gamma - 1.0) * v[0]), v[5],
        )
        return mk(lvals), mk(rvals)


def reconstruct(subgrid, mode, eos):
    """Run PPM along the active lines of one sub-grid (ghosts filled)."""
    prim = kernels.primitives(subgrid.u, eos.gamma, eos.dual_energy_eta)
    lo, hi, fallback = kernels.reconstruct(
        prim, subgrid.n, mode.is_new, mode.contact_detection, eos.gamma
    )
    return QuadraturePointSet(lo, hi, subgrid.n, mode, fallback)
