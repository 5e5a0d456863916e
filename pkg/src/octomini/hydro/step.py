"""Tree-level hydro update: SSP-RK3 stages over per-leaf flux kernels.

Each stage runs ghost exchange, reconstruction + flux kernels per leaf,
coarse-fine flux matching, then the conservative update with sources.
Work is dispatched through a minimal executor interface so the same code
runs serially in tests and on the task scheduler in production runs.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import NumericsError
from ..geometry import EGAS, GHOST, RHO, SX, SY, SZ, TAU
from ..mesh.ghosts import fill_leaf_ghosts
from .eos import dual_energy_sync, pressure, sound_speed
from .sources import gravity_sources, rotating_frame_sources

SSP_RK3_STAGES = ((0.0, 1.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0))


class SerialExecutor:
    """Runs phases inline; the runtime module provides the parallel one."""

    def run_tasks(self, name, fns):
        for fn in fns:
            fn()

    def run_kernels(self, name, fns, cells_each=0):
        for fn in fns:
            fn()


@dataclass
class FloorConfig:
    rho: float = 0.0
    tau: float = 0.0
    vmax: float = 0.0  # cap |v| where rho < 100*rho floor; 0 disables


@dataclass
class StepStats:
    amax: float = 0.0
    fallback_count: int = 0
    kernel_launches: int = 0


class HydroStepper:
    """Owns the per-stage machinery for one tree."""

    def __init__(
        self,
        tree,
        eos,
        mode,
        executor=None,
        gravity=None,
        omega=0.0,
        floors=None,
        abort_courant=1.0,
        buffers=None,
        profiler=None,
        lane_pool=None,
    ):
        self.tree = tree
        self.eos = eos
        self.mode = mode
        self.executor = executor or SerialExecutor()
        self.gravity = gravity  # object with solve(tree, need_derivative) -> fields
        self.omega = omega
        self.floors = floors or FloorConfig()
        self.abort_courant = abort_courant
        self.buffers = buffers  # optional BufferManager for kernel scratch
        self.profiler = profiler
        self.lane_pool = lane_pool
        self.stats = StepStats()

    # -- timestep ------------------------------------------------------------

    def cfl_dt(self, cfl):
        """dt = cfl * min over cells of dx / (max_axis |v| + c)."""
        worst = np.inf
        for leaf in self.tree.sorted_leaves():
            u = leaf.subgrid.interior
            vmax = np.max(np.abs(u[SX:SZ + 1]) / u[RHO], axis=0)
            c = sound_speed(u, self.eos)
            speed = float(np.max(vmax + c))
            if not np.isfinite(speed):
                raise NumericsError(f"non-finite wave speed on leaf {leaf.path}")
            worst = min(worst, leaf.subgrid.dx / speed)
        return cfl * worst

    def rk3_step(self, dt):
        """One SSP-RK3 step: u1 = u + dt L(u); u2 = 3/4 u + 1/4 (u1 + dt L(u1));
        u3 = 1/3 u + 2/3 (u2 + dt L(u2))."""
        self.stats = StepStats()
        leaves = self.tree.sorted_leaves()
        u0 = {leaf.path: leaf.subgrid.interior.copy() for leaf in leaves}
        for a, b in SSP_RK3_STAGES:
            self._stage(leaves, u0, dt, a, b)
        return self.stats

    # -- one stage -----------------------------------------------------------

    def _stage(self, leaves, u0, dt, a, b):
        ex = self.executor
        tree = self.tree
        ex.run_tasks("ghost_fill", [self._ghost_task(leaf) for leaf in leaves])

        fields = None
        if self.gravity is not None:
            fields = self.gravity.solve(tree, need_derivative=True)

        recon_store = {}
        flux_store = {}
        amax_store = {}
        ex.run_kernels(
            "reconstruct",
            [self._recon_kernel(leaf, recon_store) for leaf in leaves],
            cells_each=tree.n**3,
        )
        ex.run_kernels(
            "compute_fluxes",
            [self._fluxes_kernel(leaf, recon_store, flux_store, amax_store) for leaf in leaves],
            cells_each=tree.n**3,
        )
        self.stats.kernel_launches += 2 * len(leaves)

        self._reflux(leaves, flux_store)

        amax = max(amax_store[leaf.path] for leaf in leaves)
        self.stats.amax = max(self.stats.amax, amax)
        dx_min = min(leaf.subgrid.dx for leaf in leaves)
        if dt * amax / dx_min > self.abort_courant:
            raise NumericsError(
                f"CFL violation mid-step: dt*amax/dx = {dt * amax / dx_min:.3f} "
                f"exceeds {self.abort_courant}"
            )

        ex.run_tasks(
            "update",
            [self._update_task(leaf, u0, flux_store, fields, dt, a, b) for leaf in leaves],
        )

    def _ghost_task(self, leaf):
        def task():
            fill_leaf_ghosts(self.tree, leaf)

        return task

    def _recon_kernel(self, leaf, recon_store):
        def kern():
            import time as _time

            sg = leaf.subgrid
            shape = (13, 6, sg.m, sg.m, sg.m)
            staging = ()
            lo = hi = None
            if self.buffers is not None:
                t0 = _time.monotonic_ns()
                b_lo, lo = self.buffers.acquire_array(shape)
                b_hi, hi = self.buffers.acquire_array(shape)
                staging = (b_lo, b_hi)
                self._record_memory("stage_in", t0)
            prim = kernels.primitives(sg.u, self.eos.gamma, self.eos.dual_energy_eta)
            lo, hi, fb = kernels.reconstruct(
                prim, sg.n, self.mode.is_new, self.mode.contact_detection,
                self.eos.gamma, out_lo=lo, out_hi=hi,
            )
            recon_store[leaf.path] = (lo, hi, staging)
            self.stats.fallback_count += fb

        return kern

    def _fluxes_kernel(self, leaf, recon_store, flux_store, amax_store):
        def kern():
            import time as _time

            sg = leaf.subgrid
            lo, hi, staging = recon_store.pop(leaf.path)
            fx, fy, fz, amax = kernels.fluxes(
                lo, hi, sg.n, self.eos.gamma, self.mode.is_new, self.mode.quadrature_override
            )
            if staging:
                t0 = _time.monotonic_ns()
                for b in staging:
                    self.buffers.release(b)
                self._record_memory("stage_out", t0)
            flux_store[leaf.path] = (fx, fy, fz)
            amax_store[leaf.path] = amax

        return kern

    def _record_memory(self, name, start_ns):
        import time as _time

        prof = self.profiler
        if prof is None or not getattr(prof, "timers", False):
            return
        lane = None
        if self.lane_pool is not None:
            lane = self.lane_pool.current_lane()
        prof.record_event(name, start_ns, _time.monotonic_ns(), lane=lane, kind="memory")

    def _reflux(self, leaves, flux_store):
        """Replace coarse-side face fluxes at refinement boundaries with the
        restriction of the fine-side fluxes so the update telescopes."""
        tree = self.tree
        n = tree.n
        for leaf in leaves:
            for axis in range(3):
                for side in (-1, 1):
                    off = [0, 0, 0]
                    off[axis] = side
                    pos = tree.neighbor_ipos(leaf, off)
                    if pos is None:
                        continue
                    cover = tree.find_leaf_region(leaf.level, pos)
                    if cover[0][1] != "fine":
                        continue
                    F = flux_store[leaf.path][axis]
                    t1, t2 = [ax for ax in range(3) if ax != axis]
                    face_idx = n if side > 0 else 0
                    for child, _ in cover:
                        k = [int(child.ipos[ax]) & 1 for ax in range(3)]
                        if k[axis] != (0 if side > 0 else 1):
                            continue
                        cf = flux_store[child.path][axis]
                        sl = [slice(None)] * 4
                        sl[1 + axis] = 0 if side > 0 else n
                        fine = cf[tuple(sl)]  # (6, n, n) fine transverse
                        red = 0.25 * (
                            (fine[:, 0::2, 0::2] + fine[:, 1::2, 0::2])
                            + (fine[:, 0::2, 1::2] + fine[:, 1::2, 1::2])
                        )
                        dst = [slice(None)] * 4
                        dst[1 + axis] = face_idx
                        dst[1 + t1] = slice(k[t1] * n // 2, (k[t1] + 1) * n // 2)
                        dst[1 + t2] = slice(k[t2] * n // 2, (k[t2] + 1) * n // 2)
                        F[tuple(dst)] = red

    def _update_task(self, leaf, u0, flux_store, fields, dt, a, b):
        def task():
            sg = leaf.subgrid
            n = sg.n
            cur = sg.interior
            fx, fy, fz = flux_store[leaf.path]
            rhs = np.zeros_like(cur)
            inv_dx = 1.0 / sg.dx
            rhs -= (fx[:, 1:, :, :] - fx[:, :-1, :, :]) * inv_dx
            rhs -= (fy[:, :, 1:, :] - fy[:, :, :-1, :]) * inv_dx
            rhs -= (fz[:, :, :, 1:] - fz[:, :, :, :-1]) * inv_dx
            if self.omega != 0.0 or fields is not None:
                x = sg.cell_centers(0)[:, None, None]
                y = sg.cell_centers(1)[None, :, None]
                if self.omega != 0.0:
                    rhs += rotating_frame_sources(cur, self.omega, x, y)
                if fields is not None:
                    f = fields[leaf.path]
                    rhs += gravity_sources(cur, f["phi"], f["dphi_dt"], (f["gx"], f["gy"], f["gz"]))
            new = a * u0[leaf.path] + b * (cur + dt * rhs) if a != 0.0 else cur + dt * rhs
            dual_energy_sync(new, self.eos)
            self._apply_floors(new)
            sg.interior[:] = new

        return task

    def _apply_floors(self, u):
        fl = self.floors
        if fl.rho > 0.0:
            low = u[RHO] < fl.rho
            if np.any(low):
                u[RHO] = np.maximum(u[RHO], fl.rho)
        if fl.vmax > 0.0 and fl.rho > 0.0:
            thin = u[RHO] < 100.0 * fl.rho
            v2 = (u[SX] ** 2 + u[SY] ** 2 + u[SZ] ** 2) / u[RHO] ** 2
            fast = thin & (v2 > fl.vmax**2)
            if np.any(fast):
                scale = np.where(fast, fl.vmax / np.sqrt(np.maximum(v2, 1e-300)), 1.0)
                kin_old = 0.5 * (u[SX] ** 2 + u[SY] ** 2 + u[SZ] ** 2) / u[RHO]
                u[SX] *= scale
                u[SY] *= scale
                u[SZ] *= scale
                kin_new = 0.5 * (u[SX] ** 2 + u[SY] ** 2 + u[SZ] ** 2) / u[RHO]
                u[EGAS] += kin_new - kin_old
        if fl.tau > 0.0:
            u[TAU] = np.maximum(u[TAU], fl.tau)
