"""FMM gravity solver: upward moments, interaction streaming, downward
local expansions, and the direct-summation oracle."""

import numpy as np

from .. import kernels
from ..errors import StructureError
from ..geometry import GHOST, SX, SY, SZ
from .entities import EntityTable
from .multipole import (
    MultipoleExpansion,
    NCOMP,
    moments_from_points,
    translate_local,
    translate_moments,
)

G = 1.0  # code units


def mac_accept(node_a, node_b, theta, tree_width=2.0):
    """Opening criterion: accept iff (w_a + w_b)/2 < theta * dist(centers)."""
    wa = tree_width / 2**node_a.level
    wb = tree_width / 2**node_b.level
    ca = (np.asarray(node_a.ipos) + 0.5) * wa - tree_width / 2.0
    cb = (np.asarray(node_b.ipos) + 0.5) * wb - tree_width / 2.0
    d = float(np.linalg.norm(cb - ca))
    return 0.5 * (wa + wb) < theta * d


class GravityField:
    """Per-leaf potential, acceleration, and potential time derivative."""

    def __init__(self):
        self.per_leaf = {}

    def __getitem__(self, path):
        return self.per_leaf[path]

    def add_leaf(self, path, phi, gx, gy, gz, dphi_dt=None):
        self.per_leaf[path] = {
            "phi": phi,
            "gx": gx,
            "gy": gy,
            "gz": gz,
            "dphi_dt": dphi_dt if dphi_dt is not None else np.zeros_like(phi),
        }


class FmmSolver:
    """Order-3 FMM over the entity table; interaction lists are cached per
    tree topology and reused across solves."""

    def __init__(self, theta):
        if theta < 0.0 or theta > 1.0:
            raise ValueError("theta must lie in [0, 1]")
        self.theta = theta
        self._table = None
        self._groups = None
        self._signature = None
        self.stats = {}

    # -- preparation ---------------------------------------------------------

    def _topology_signature(self, tree):
        return (tree.n, tree.width, tuple(leaf.path for leaf in tree.sorted_leaves()))

    def prepare(self, tree):
        sig = self._topology_signature(tree)
        if sig == self._signature:
            return
        from ..mesh.tree import check_balance

        check_balance(tree)
        self._table = EntityTable(tree)
        t = self._table
        if self.theta > 0.0:
            self._groups = kernels.build_interactions(
                t.center, t.width, t.children, t.is_cell, t.root, self.theta
            )
            self.stats["groups"] = len(self._groups)
            self.stats["pairs"] = int(sum(len(g[1]) for g in self._groups))
        else:
            self._groups = None
        self._signature = sig

    # -- passes ---------------------------------------------------------------

    def _upward(self, masses):
        t = self._table
        M = np.zeros((t.nentities, NCOMP))
        M[:, 0] = masses
        for lvl in t.levels_fine_to_coarse():
            parents = np.where((t.level == lvl) & ~t.is_cell)[0]
            if len(parents) == 0:
                continue
            ch = t.children[parents]
            tvec = t.center[ch] - t.center[parents][:, None, :]
            M[parents] = translate_moments(M[ch], tvec).sum(axis=1)
        return M

    def _downward(self, L):
        t = self._table
        for lvl in np.sort(np.unique(t.level)):
            parents = np.where((t.level == lvl) & ~t.is_cell)[0]
            if len(parents) == 0:
                continue
            ch = t.children[parents]
            svec = t.center[ch] - t.center[parents][:, None, :]
            shifted = translate_local(L[parents][:, None, :], svec)
            L[ch.reshape(-1)] += shifted.reshape(-1, NCOMP)
        return L

    def _solve_masses(self, masses):
        """Potential and acceleration at every cell entity."""
        t = self._table
        if self.theta == 0.0:
            phi, g = kernels.direct_traversal_eval(
                t.center, t.width, t.children, t.is_cell, t.root, self.theta, masses
            )
            return phi, g
        M = self._upward(masses)
        L = np.zeros_like(M)
        kernels.m2l_apply(self._groups, M, L)
        self._downward(L)
        phi = L[:, 0].copy()
        g = -L[:, 1:4].copy()
        return phi, g

    # -- public API ------------------------------------------------------------

    def solve_density(self, tree, per_leaf_density=None):
        """Solve for the field of the current density (or a replacement
        per-leaf source).  Returns (phi, g) keyed by leaf path."""
        self.prepare(tree)
        t = self._table
        masses = t.load_cell_masses(tree, per_leaf_density)
        phi, g = self._solve_masses(masses)
        out_phi, out_g = {}, {}
        for path in t.leaf_paths:
            ids = t.cell_ids[path]
            out_phi[path] = phi[ids]
            out_g[path] = (g[ids.reshape(-1)].T).reshape(3, *ids.shape)
        return out_phi, out_g

    def solve(self, tree, need_derivative=True):
        """Full field for the hydro sources: phi and g from rho, dphi_dt
        from the discrete source rho_dot = -div(momentum)."""
        self.prepare(tree)
        phi, g = self.solve_density(tree)
        field = GravityField()
        dphi = None
        if need_derivative:
            rho_dot = {
                leaf.path: momentum_divergence_source(leaf.subgrid)
                for leaf in tree.sorted_leaves()
            }
            dphi, _ = self.solve_density(tree, per_leaf_density=rho_dot)
        for path in phi:
            gx, gy, gz = g[path]
            field.add_leaf(
                path, phi[path], gx, gy, gz, dphi[path] if dphi is not None else None
            )
        return field


def momentum_divergence_source(subgrid):
    """rho_dot = -div(s) by second-order central differences (ghosts filled)."""
    g = GHOST
    n = subgrid.n
    u = subgrid.u
    inv2dx = 1.0 / (2.0 * subgrid.dx)
    sl = slice(g, g + n)
    out = -(
        (u[SX, g + 1 : g + n + 1, sl, sl] - u[SX, g - 1 : g + n - 1, sl, sl])
        + (u[SY, sl, g + 1 : g + n + 1, sl] - u[SY, sl, g - 1 : g + n - 1, sl])
        + (u[SZ, sl, sl, g + 1 : g + n + 1] - u[SZ, sl, sl, g - 1 : g + n - 1])
    ) * inv2dx
    return out


def potential_time_derivative(tree, theta):
    """dphi/dt per leaf, from the same FMM machinery with source -div(s)."""
    from ..mesh.ghosts import exchange_ghosts

    exchange_ghosts(tree)
    solver = FmmSolver(theta)
    solver.prepare(tree)
    rho_dot = {
        leaf.path: momentum_divergence_source(leaf.subgrid)
        for leaf in tree.sorted_leaves()
    }
    dphi, _ = solver.solve_density(tree, per_leaf_density=rho_dot)
    return dphi


def compute_multipoles(tree):
    """Per-octree-node expansions from the upward pass (leaf moments from
    cell masses, internal moments by exact translation of children)."""
    solver = FmmSolver(theta=0.5)
    solver.prepare(tree)
    t = solver._table
    masses = t.load_cell_masses(tree)
    M = solver._upward(masses)
    out = {}
    for path, eid in t.node_entity.items():
        out[path] = MultipoleExpansion.from_flat(t.center[eid], M[eid])
    return out


def direct_sum(positions, masses):
    """Softening-free O(N^2) oracle; raises on coincident centers."""
    return kernels.direct_sum_pairs(positions, masses)


def direct_sum_tree(tree):
    """Oracle field over all leaf cells of a tree, keyed by leaf path."""
    pos, mass, slices = gather_cells(tree)
    phi, g = direct_sum(pos, mass)
    out_phi, out_g = {}, {}
    n = tree.n
    for path, sl in slices.items():
        out_phi[path] = phi[sl].reshape(n, n, n)
        out_g[path] = g[sl].T.reshape(3, n, n, n)
    return out_phi, out_g


def gather_cells(tree):
    """All leaf cell centers and masses in canonical order."""
    pos_list, mass_list, slices = [], [], {}
    start = 0
    n = tree.n
    for leaf in tree.sorted_leaves():
        sg = leaf.subgrid
        x = sg.cell_centers(0)
        c = np.stack(np.meshgrid(x, sg.cell_centers(1), sg.cell_centers(2), indexing="ij"), axis=-1)
        pos_list.append(c.reshape(-1, 3))
        mass_list.append((sg.interior[0] * sg.dx**3).reshape(-1))
        slices[leaf.path] = slice(start, start + n**3)
        start += n**3
    return np.concatenate(pos_list), np.concatenate(mass_list), slices


def root_direct(subgrid):
    """All-pairs direct interactions within a single sub-grid (the root has
    no coarser level to absorb them).  Returns (phi, g) shaped like the
    interior."""
    n = subgrid.n
    x = subgrid.cell_centers(0)
    pos = np.stack(
        np.meshgrid(x, subgrid.cell_centers(1), subgrid.cell_centers(2), indexing="ij"),
        axis=-1,
    ).reshape(-1, 3)
    mass = (subgrid.interior[0] * subgrid.dx**3).reshape(-1)
    phi, g = direct_sum(pos, mass)
    return phi.reshape(n, n, n), g.T.reshape(3, n, n, n)
