"""Flat interaction-entity table for the gravity solver.

Every octree node is an entity; leaf sub-grids additionally contribute a
complete sub-hierarchy of blocks down to single cells, so the traversal
sees one uniform octree whose finest entities are cells.  An entity at
global depth g has width domain/2^g; cells of a leaf at octree level l
sit at depth l + log2(n).
"""

import numpy as np

from ..geometry import GHOST


class EntityTable:
    __slots__ = (
        "center",
        "width",
        "children",
        "is_cell",
        "level",
        "root",
        "cell_ids",
        "node_entity",
        "n",
        "nentities",
        "leaf_paths",
    )

    def __init__(self, tree):
        n = tree.n
        s = int(np.log2(n))
        assert 2**s == n
        leaves = tree.sorted_leaves()
        per_leaf = (8 ** (s + 1) - 1) // 7
        internal = []

        def count_internal(node):
            if not node.is_leaf:
                internal.append(node)
                for c in node.children:
                    count_internal(c)

        count_internal(tree.root)
        total = len(internal) + len(leaves) * per_leaf

        center = np.empty((total, 3), dtype=np.float64)
        width = np.empty(total, dtype=np.float64)
        children = np.full((total, 8), -1, dtype=np.int64)
        is_cell = np.zeros(total, dtype=bool)
        level = np.empty(total, dtype=np.int32)
        cell_ids = {}

        cursor = 0

        def alloc(k):
            nonlocal cursor
            base = cursor
            cursor += k
            return base

        def build_leaf(node):
            sg = node.subgrid
            bases = []
            for j in range(s + 1):
                bases.append(alloc(8**j))
            for j in range(s + 1):
                nb = 2**j
                ids = bases[j] + (
                    np.arange(nb)[:, None, None] * nb + np.arange(nb)[None, :, None]
                ) * nb + np.arange(nb)[None, None, :]
                w = tree.width / (2 ** (node.level + j))
                corner = tree.lower + node.ipos * (tree.width / 2**node.level)
                bx = np.arange(nb)
                cx = corner[0] + (bx + 0.5) * w
                cy = corner[1] + (bx + 0.5) * w
                cz = corner[2] + (bx + 0.5) * w
                flat = ids.reshape(-1)
                center[flat, 0] = np.repeat(cx, nb * nb)
                center[flat, 1] = np.tile(np.repeat(cy, nb), nb)
                center[flat, 2] = np.tile(cz, nb * nb)
                width[flat] = w
                level[flat] = node.level + j
                if j < s:
                    nb2 = 2 * nb
                    child = bases[j + 1] + (
                        np.arange(nb2)[:, None, None] * nb2
                        + np.arange(nb2)[None, :, None]
                    ) * nb2 + np.arange(nb2)[None, None, :]
                    for kz in (0, 1):
                        for ky in (0, 1):
                            for kx in (0, 1):
                                k = kx + 2 * ky + 4 * kz
                                children[flat, k] = child[
                                    kx::2, ky::2, kz::2
                                ].reshape(-1)
                else:
                    is_cell[flat] = True
            cell_ids[node.path] = (bases[s] + np.arange(n**3)).reshape(n, n, n)
            return bases[0]

        node_entity = {}

        def build(node):
            if node.is_leaf:
                eid = build_leaf(node)
                node_entity[node.path] = eid
                return eid
            eid = alloc(1)
            node_entity[node.path] = eid
            w = tree.width / 2**node.level
            corner = tree.lower + node.ipos * w
            center[eid] = corner + 0.5 * w
            width[eid] = w
            level[eid] = node.level
            for k, c in enumerate(node.children):
                children[eid, k] = build(c)
            return eid

        self.root = build(tree.root)
        assert cursor == total
        self.center = center
        self.width = width
        self.children = children
        self.is_cell = is_cell
        self.level = level
        self.cell_ids = cell_ids
        self.node_entity = node_entity
        self.n = n
        self.nentities = total
        self.leaf_paths = [leaf.path for leaf in leaves]

    def load_cell_masses(self, tree, per_leaf_density=None):
        """Point masses rho * dx^3 at cell centers -> (N,) mass vector.

        `per_leaf_density` optionally overrides the density field (dict
        path -> (n,n,n) array), used for the potential time derivative."""
        m = np.zeros(self.nentities)
        for leaf in tree.sorted_leaves():
            sg = leaf.subgrid
            if per_leaf_density is None:
                rho = sg.interior[0]
            else:
                rho = per_leaf_density[leaf.path]
            m[self.cell_ids[leaf.path].reshape(-1)] = (rho * sg.dx**3).reshape(-1)
        return m

    def levels_fine_to_coarse(self):
        return np.sort(np.unique(self.level))[::-1]
