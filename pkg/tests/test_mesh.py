import numpy as np
import pytest

from octomini.errors import CapacityError, StructureError
from octomini.geometry import GHOST, RHO, SX
from octomini.mesh import (
    build_uniform_tree,
    check_balance,
    exchange_ghosts,
    prolong_block,
    refine_by_criterion,
    restrict_block,
)


def fill_constant(tree, values):
    for leaf in tree.leaves():
        for f, v in enumerate(values):
            leaf.subgrid.interior[f] = v


def total_mass(tree):
    return sum(
        float(np.sum(leaf.subgrid.interior[RHO])) * leaf.subgrid.dx**3
        for leaf in tree.sorted_leaves()
    )


class TestBuildUniform:
    def test_table_configs(self):
        # the three 16,777,216-cell configurations
        for level, n, nleaf in [(5, 8, 32768), (4, 16, 4096), (3, 32, 512)]:
            tree = build_uniform_tree(level, n)
            assert len(tree.leaves()) == nleaf
            assert tree.cell_count() == 16_777_216

    def test_root_only(self):
        tree = build_uniform_tree(0, 8)
        assert len(tree.leaves()) == 1
        assert tree.cell_count() == 512

    def test_leaf_count_mod_seven(self):
        for level in range(4):
            tree = build_uniform_tree(level, 8)
            assert len(tree.leaves()) % 7 == 1

    def test_capacity_error(self):
        with pytest.raises(CapacityError):
            build_uniform_tree(3, 8, memory_budget=10_000)

    def test_dx_invariant(self):
        tree = build_uniform_tree(2, 16)
        for leaf in tree.leaves():
            assert leaf.subgrid.dx == tree.width / (16 * 2**leaf.level)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            build_uniform_tree(1, 9)


class TestRefine:
    def test_all_false_unchanged(self):
        tree = build_uniform_tree(1, 8)
        before = {leaf.path for leaf in tree.leaves()}
        refine_by_criterion(tree, lambda leaf: False, max_level=3)
        assert {leaf.path for leaf in tree.leaves()} == before

    def test_always_true_complete(self):
        tree = build_uniform_tree(0, 8)
        refine_by_criterion(tree, lambda leaf: True, max_level=2)
        assert len(tree.leaves()) == 64
        assert all(leaf.level == 2 for leaf in tree.leaves())

    def test_point_refine_balanced(self):
        tree = build_uniform_tree(1, 8)
        fill_constant(tree, [1.0, 0, 0, 0, 1.0, 1.0])
        corner = tree.leaf_at(1, (0, 0, 0))
        corner.subgrid.interior[RHO, 0, 0, 0] = 100.0

        def crit(leaf):
            return bool(np.any(leaf.subgrid.interior[RHO] > 10.0))

        refine_by_criterion(tree, crit, max_level=3)
        check_balance(tree)
        counts = {leaf.path for leaf in tree.leaves()}
        assert 8 < len(counts) < 8**3

    def test_mass_conserved(self):
        tree = build_uniform_tree(1, 8)
        rng = np.random.default_rng(7)
        for leaf in tree.leaves():
            leaf.subgrid.interior[RHO] = rng.uniform(0.5, 2.0, (8, 8, 8))
        m0 = total_mass(tree)
        refine_by_criterion(tree, lambda leaf: True, max_level=2)
        m1 = total_mass(tree)
        assert abs(m1 - m0) <= 1e-13 * abs(m0)


class TestTransfer:
    def test_constant_parent(self):
        block = np.full((1, 2, 2, 2), 3.5)
        fine = prolong_block(block)
        assert fine.shape == (1, 4, 4, 4)
        assert np.all(fine == 3.5)

    def test_restrict_prolong_identity(self):
        rng = np.random.default_rng(3)
        block = rng.normal(size=(6, 4, 4, 4))
        back = restrict_block(prolong_block(block))
        assert np.allclose(back, block, rtol=1e-15, atol=1e-15)

    def test_minmod_slope_values(self):
        # along x: parent row densities [1, 2, 3]; middle-cell children at 2 -/+ 0.25
        block = np.zeros((1, 3, 1, 1))
        block[0, :, 0, 0] = [1.0, 2.0, 3.0]
        fine = prolong_block(block)
        assert fine[0, 2, 0, 0] == pytest.approx(1.75)
        assert fine[0, 3, 0, 0] == pytest.approx(2.25)

    def test_prolong_exact_on_linear(self):
        # linear field in all coordinates reproduced exactly
        x, y, z = np.meshgrid(np.arange(4), np.arange(4), np.arange(4), indexing="ij")
        block = (2.0 * x - 3.0 * y + 0.5 * z + 1.0)[None, ...]
        fine = prolong_block(block)
        xf = (np.arange(8) - 0.5) / 2.0  # fine centers in coarse index units
        Xf, Yf, Zf = np.meshgrid(xf, xf, xf, indexing="ij")
        expect = 2.0 * Xf - 3.0 * Yf + 0.5 * Zf + 1.0
        assert np.allclose(fine[0], expect, atol=1e-13)


class TestGhosts:
    def test_same_level_constants(self):
        tree = build_uniform_tree(1, 8)
        for idx, leaf in enumerate(tree.sorted_leaves()):
            leaf.subgrid.interior[RHO] = float(idx + 1)
        exchange_ghosts(tree)
        a = tree.leaf_at(1, (0, 0, 0))
        b = tree.leaf_at(1, (1, 0, 0))
        val_b = b.subgrid.interior[RHO, 0, 0, 0]
        g = GHOST
        # a's +x ghost face equals b's constant
        assert np.all(a.subgrid.u[RHO, g + 8 : g + 11, g : g + 8, g : g + 8] == val_b)

    def test_periodic_single_leaf(self):
        tree = build_uniform_tree(0, 8, boundary="periodic")
        leaf = tree.leaves()[0]
        rng = np.random.default_rng(0)
        leaf.subgrid.interior[:] = rng.normal(size=(6, 8, 8, 8))
        exchange_ghosts(tree)
        u = leaf.subgrid.u
        g = GHOST
        assert np.array_equal(u[:, 0:g, g : g + 8, g : g + 8], u[:, 8 : 8 + g, g : g + 8, g : g + 8])
        assert np.array_equal(u[:, g + 8 :, g : g + 8, g : g + 8], u[:, g : 2 * g, g : g + 8, g : g + 8])
        # corner wraps too
        assert u[RHO, 0, 0, 0] == u[RHO, 8, 8, 8]

    def test_coarse_fine_linear_ramp_exact(self):
        tree = build_uniform_tree(1, 8)
        # refine one octant to create a coarse-fine boundary
        corner = tree.leaf_at(1, (0, 0, 0))
        tree.split(corner)
        tree.reindex()
        check_balance(tree)

        def set_linear(leaf):
            sg = leaf.subgrid
            x = sg.cell_centers(0)
            y = sg.cell_centers(1)
            z = sg.cell_centers(2)
            X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
            sg.interior[RHO] = 2.0 + 3.0 * X - 1.5 * Y + 0.25 * Z

        for leaf in tree.leaves():
            set_linear(leaf)
        exchange_ghosts(tree)
        # fine leaf whose +x neighbor region is coarse
        fine = tree.leaf_at(2, (1, 0, 0))
        sg = fine.subgrid
        g = GHOST
        xg = sg.origin[0] + sg.dx * np.arange(-g, sg.n + g)
        yg = sg.origin[1] + sg.dx * np.arange(-g, sg.n + g)
        zg = sg.origin[2] + sg.dx * np.arange(-g, sg.n + g)
        X, Y, Z = np.meshgrid(xg, yg, zg, indexing="ij")
        expect = 2.0 + 3.0 * X - 1.5 * Y + 0.25 * Z
        got = sg.u[RHO, g + sg.n :, g : g + sg.n, g : g + sg.n]
        want = expect[g + sg.n :, g : g + sg.n, g : g + sg.n]
        assert np.allclose(got, want, atol=1e-12)

    def test_idempotent(self):
        tree = build_uniform_tree(1, 8, boundary="reflecting")
        rng = np.random.default_rng(5)
        for leaf in tree.leaves():
            leaf.subgrid.interior[:] = rng.normal(size=(6, 8, 8, 8))
        exchange_ghosts(tree)
        snap = [leaf.subgrid.u.copy() for leaf in tree.sorted_leaves()]
        exchange_ghosts(tree)
        for leaf, ref in zip(tree.sorted_leaves(), snap):
            assert np.array_equal(leaf.subgrid.u, ref)

    def test_reflecting_flips_normal_momentum(self):
        tree = build_uniform_tree(0, 8, boundary="reflecting")
        leaf = tree.leaves()[0]
        leaf.subgrid.interior[SX] = 2.0
        exchange_ghosts(tree)
        u = leaf.subgrid.u
        g = GHOST
        assert np.all(u[SX, 0:g, g : g + 8, g : g + 8] == -2.0)
        assert np.all(u[SX, g : g + 8, 0:g, g : g + 8] == 2.0)  # tangential not flipped

    def test_unbalanced_tree_errors(self):
        tree = build_uniform_tree(1, 8)
        leaf = tree.leaf_at(1, (0, 0, 0))
        tree.split(leaf)
        tree.reindex()
        inner = tree.leaf_at(2, (0, 0, 0))
        tree.split(inner)  # now a level-3 leaf touches level-1 leaves
        tree.reindex()
        with pytest.raises(StructureError):
            exchange_ghosts(tree)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        from octomini.mesh import checkpoint

        tree = build_uniform_tree(1, 8)
        corner = tree.leaf_at(1, (1, 1, 1))
        tree.split(corner)
        tree.reindex()
        rng = np.random.default_rng(11)
        for leaf in tree.leaves():
            leaf.subgrid.interior[:] = rng.normal(size=(6, 8, 8, 8))
        p = tmp_path / "state.omck"
        checkpoint.write(tree, p, time=1.25, step=7, extra={"gamma": 1.4})
        tree2, header = checkpoint.read(p)
        assert header["time"] == 1.25 and header["step"] == 7
        assert header["extra"]["gamma"] == 1.4
        la = tree.sorted_leaves()
        lb = tree2.sorted_leaves()
        assert [x.path for x in la] == [x.path for x in lb]
        for a, b in zip(la, lb):
            assert np.array_equal(a.subgrid.interior, b.subgrid.interior)

    def test_corrupt_file(self, tmp_path):
        from octomini.errors import CheckpointError
        from octomini.mesh import checkpoint

        tree = build_uniform_tree(0, 8)
        p = tmp_path / "state.omck"
        checkpoint.write(tree, p)
        raw = p.read_bytes()
        p.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            checkpoint.read(p)

    def test_version_mismatch(self, tmp_path):
        from octomini.errors import CheckpointError
        from octomini.mesh import checkpoint

        tree = build_uniform_tree(0, 8)
        p = tmp_path / "state.omck"
        checkpoint.write(tree, p)
        raw = bytearray(p.read_bytes())
        raw[4] = 99
        p.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            checkpoint.read(p)
