"""Octree of cubic sub-grids: construction, refinement, 2:1 balance.

Every octree node is either a leaf carrying a sub-grid of n^3 cells (plus a
ghost layer) or is fully refined into eight children of twice the resolution.
Leaves are indexed by (level, lattice position) for O(1) neighbor lookup.
"""

import numpy as np

from ..errors import CapacityError, StructureError
from ..geometry import GHOST, NFIELDS

VALID_N = (8, 16, 32)

# all 26 neighbor offsets, faces first
NEIGHBOR_OFFSETS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]
FACE_OFFSETS = [o for o in NEIGHBOR_OFFSETS if sum(abs(c) for c in o) == 1]


class SubGrid:
    """Cubic block of n^3 interior cells with a ghost layer of width 3.

    The state array ``u`` has shape (6, m, m, m) with m = n + 6 and is
    allocated on first access so that structure-only trees stay cheap.
    """

    __slots__ = ("n", "ghost_width", "level", "origin", "dx", "_u")

    def __init__(self, n, level, origin, dx):
        self.n = n
        self.ghost_width = GHOST
        self.level = level
        self.origin = np.asarray(origin, dtype=np.float64)  # first interior cell center
        self.dx = dx
        self._u = None

    @property
    def m(self):
        return self.n + 2 * GHOST

    @property
    def u(self):
        if self._u is None:
            m = self.m
            self._u = np.zeros((NFIELDS, m, m, m), dtype=np.float64)
        return self._u

    @property
    def allocated(self):
        return self._u is not None

    @property
    def interior(self):
        g = GHOST
        return self.u[:, g : g + self.n, g : g + self.n, g : g + self.n]

    def cell_centers(self, axis):
        """Interior cell-center coordinates along one axis."""
        return self.origin[axis] + self.dx * np.arange(self.n)

    def nbytes_estimate(self):
        return NFIELDS * self.m**3 * 8


class OctreeNode:
    __slots__ = ("level", "path", "ipos", "children", "subgrid")

    def __init__(self, level, path, ipos):
        self.level = level
        self.path = path  # tuple of octant indices from root
        self.ipos = ipos  # lattice position at this level
        self.children = None
        self.subgrid = None

    @property
    def is_leaf(self):
        return self.children is None


class Octree:
    """Octree over a cubic domain centered at the origin."""

    def __init__(self, n_per_side, domain_width=2.0, boundary="outflow", memory_budget=None):
        if n_per_side not in VALID_N:
            raise ValueError(f"n_per_side must be one of {VALID_N}, got {n_per_side}")
        self.n = n_per_side
        self.width = float(domain_width)
        self.lower = np.full(3, -self.width / 2.0)
        self.boundary = boundary
        self.memory_budget = memory_budget
        self.root = OctreeNode(0, (), np.zeros(3, dtype=np.int64))
        self._attach_subgrid(self.root)
        self._leaf_dir = {}
        self.reindex()

    # -- construction -------------------------------------------------------

    def _attach_subgrid(self, node):
        dx = self.width / (self.n * 2**node.level)
        corner = self.lower + node.ipos * (self.width / 2**node.level)
        node.subgrid = SubGrid(self.n, node.level, corner + dx / 2.0, dx)

    def split(self, node):
        """Refine a leaf into eight children (state filled by prolongation)."""
        if not node.is_leaf:
            raise StructureError(f"cannot split non-leaf {node.path}")
        from .transfer import prolong_block  # local import to avoid cycle

        parent_grid = node.subgrid
        node.children = []
        for k in range(8):
            off = np.array([k & 1, (k >> 1) & 1, (k >> 2) & 1], dtype=np.int64)
            child = OctreeNode(node.level + 1, node.path + (k,), node.ipos * 2 + off)
            self._attach_subgrid(child)
            node.children.append(child)
        if parent_grid.allocated:
            fine = prolong_block(parent_grid.interior)
            n = self.n
            for k, child in enumerate(node.children):
                ox, oy, oz = (k & 1) * n, ((k >> 1) & 1) * n, ((k >> 2) & 1) * n
                child.subgrid.interior[:] = fine[:, ox : ox + n, oy : oy + n, oz : oz + n]
        node.subgrid = None

    def reindex(self):
        self._leaf_dir = {}
        for leaf in self.leaves():
            self._leaf_dir[(leaf.level, *leaf.ipos)] = leaf

    # -- queries ------------------------------------------------------------

    def leaves(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def sorted_leaves(self):
        """Leaves in canonical path order (deterministic reduction order)."""
        return sorted(self.leaves(), key=lambda nd: nd.path)

    def max_level(self):
        return max(leaf.level for leaf in self.leaves())

    def cell_count(self):
        return len(self.leaves()) * self.n**3

    def leaf_at(self, level, ipos):
        return self._leaf_dir.get((level, ipos[0], ipos[1], ipos[2]))

    def find_leaf_region(self, level, ipos):
        """Leaf (or leaves) covering lattice cell `ipos` at `level`.

        Returns a list of (leaf, role) with role in {"same", "coarse", "fine"}.
        Raises StructureError if the covering leaves differ from `level` by
        more than one (2:1 violation) or the position is uncovered.
        """
        exact = self.leaf_at(level, ipos)
        if exact is not None:
            return [(exact, "same")]
        coarse = self.leaf_at(level - 1, tuple(np.asarray(ipos) // 2)) if level > 0 else None
        if coarse is not None:
            return [(coarse, "coarse")]
        fine = []
        base = np.asarray(ipos) * 2
        for k in range(8):
            off = np.array([k & 1, (k >> 1) & 1, (k >> 2) & 1])
            hit = self.leaf_at(level + 1, base + off)
            if hit is None:
                raise StructureError(
                    f"region {tuple(ipos)} at level {level} covered by leaves "
                    "more than one level away (2:1 balance violated)"
                )
            fine.append((hit, "fine"))
        return fine

    def neighbor_ipos(self, leaf, offset):
        """Lattice position of the neighbor region; None if off-domain."""
        span = 2**leaf.level
        pos = leaf.ipos + np.asarray(offset, dtype=np.int64)
        if self.boundary == "periodic":
            return pos % span
        if np.any(pos < 0) or np.any(pos >= span):
            return None
        return pos

    # -- capacity -----------------------------------------------------------

    def check_capacity(self, extra_leaves=0):
        if self.memory_budget is None:
            return
        per_leaf = NFIELDS * (self.n + 2 * GHOST) ** 3 * 8
        total = (len(self.leaves()) + extra_leaves) * per_leaf
        if total > self.memory_budget:
            raise CapacityError(
                f"tree state would need {total} bytes, budget is {self.memory_budget}"
            )


def build_uniform_tree(level, n_per_side, domain_width=2.0, boundary="outflow", memory_budget=None):
    """Complete octree with 8^level leaf sub-grids."""
    if level < 0:
        raise ValueError("level must be >= 0")
    tree = Octree(n_per_side, domain_width, boundary, memory_budget)
    if memory_budget is not None:
        per_leaf = NFIELDS * (n_per_side + 2 * GHOST) ** 3 * 8
        if 8**level * per_leaf > memory_budget:
            raise CapacityError(
                f"uniform level-{level} tree would need {8**level * per_leaf} bytes"
            )
    for _ in range(level):
        for leaf in tree.leaves():
            tree.split(leaf)
    tree.reindex()
    return tree


def refine_by_criterion(tree, criterion, max_level):
    """Split every leaf below max_level for which `criterion(leaf)` is true,
    then restore 2:1 balance by forced refinement.  Children are initialized
    by limited-linear prolongation."""
    changed = True
    while changed:
        changed = False
        for leaf in tree.leaves():
            if leaf.level < max_level and criterion(leaf):
                tree.check_capacity(extra_leaves=8)
                tree.split(leaf)
                changed = True
        tree.reindex()
        changed |= _balance_pass(tree)
    tree.reindex()
    return tree


def _balance_pass(tree):
    """Split leaves whose 26-neighborhood contains leaves two or more levels
    finer.  Returns True if anything was split."""
    did = False
    while True:
        leaves = tree.leaves()
        # cover[L] = lattice cells at level L containing a leaf at level >= L+2
        cover = {}
        for leaf in leaves:
            ip = leaf.ipos
            for coarse in range(leaf.level - 2, -1, -1):
                cover.setdefault(coarse, set()).add(tuple(ip >> (leaf.level - coarse)))
        to_split = []
        for leaf in leaves:
            deep = cover.get(leaf.level)
            if not deep:
                continue
            span = 2**leaf.level
            for off in NEIGHBOR_OFFSETS:
                pos = leaf.ipos + np.asarray(off)
                if tree.boundary == "periodic":
                    pos = pos % span
                elif np.any(pos < 0) or np.any(pos >= span):
                    continue
                if tuple(pos) in deep:
                    to_split.append(leaf)
                    break
        if not to_split:
            return did
        for leaf in to_split:
            tree.check_capacity(extra_leaves=8)
            tree.split(leaf)
        tree.reindex()
        did = True


def check_balance(tree):
    """Raise StructureError if any leaf's 26-neighborhood violates 2:1."""
    for leaf in tree.leaves():
        for off in NEIGHBOR_OFFSETS:
            pos = tree.neighbor_ipos(leaf, off)
            if pos is None:
                continue
            tree.find_leaf_region(leaf.level, pos)
