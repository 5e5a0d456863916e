"""Batch run driver: setup, timestep loop, metrics, artifacts."""

import csv
import io
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, OctominiError
from .geometry import RHO
from .gravity import FmmSolver
from .hydro import EosConfig, FloorConfig, HydroMode, HydroStepper
from .mesh import build_uniform_tree, checkpoint, exchange_ghosts
from .problems import (
    SedovConfig,
    StarConfig,
    conservation_totals,
    density_error_l1,
    dynamical_time,
    init_sedov,
    scf_build_star,
)
from .profiler import (
    Profiler,
    export_counters_csv,
    export_scatter_csv,
    export_task_graph,
    export_task_tree,
    export_trace,
)
from .runtime import BufferManager, LanePool, PoolExecutor, Scheduler

METRIC_COLUMNS = [
    "step", "time", "dt", "wall_seconds", "cells_per_second",
    "mass", "sx", "sy", "sz", "egas", "etot", "rho_l1",
]
WALL_CLOCK_COLUMNS = {"wall_seconds", "cells_per_second"}


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS)
        w.writeheader()
        for row in self.rows:
            w.writerow(row)
        return buf.getvalue()


class Simulation:
    """One configured run; `execute` drives it to completion."""

    def __init__(self, config):
        self.config = config.validate()
        self.profiler = None
        if config.profile:
            self.profiler = Profiler(
                timers=True,
                counters="counters" in config.profile,
                trace="trace" in config.profile,
                seed=config.seed or 12345,
            )
        self.scheduler = Scheduler(workers=config.workers, profiler=self.profiler)
        self.lanes = LanePool(
            self.scheduler, lanes=config.lanes, latency_us=config.latency_us,
            profiler=self.profiler,
        )
        self.buffers = BufferManager()
        self.executor = PoolExecutor(self.scheduler, self.lanes)
        self.gamma = 1.4 if config.problem == "sedov" else 5.0 / 3.0
        self.eos = EosConfig(gamma=self.gamma)
        self.omega = 0.0
        self.rho_ic = None
        self.time = 0.0
        self.step0 = 0
        self._setup()
        if self.profiler is not None:
            self.profiler.register_gauge(
                "buffer_bytes_outstanding", lambda: self.buffers.counters()["bytes_outstanding"]
            )
            self.profiler.register_gauge(
                "lane_in_flight", lambda: self.lanes.counters()["in_flight"]
            )
            self.profiler.register_gauge(
                "lane_poll_calls", lambda: self.lanes.counters()["poll_calls"]
            )
            if "counters" in self.config.profile:
                self.profiler.start_sampler()

    # -- setup ------------------------------------------------------------------

    def _setup(self):
        cfg = self.config
        gravity = None
        floors = FloorConfig()
        if cfg.resume:
            tree, header = checkpoint.read(cfg.resume)
            extra = header.get("extra", {})
            self.gamma = extra.get("gamma", self.gamma)
            self.eos = EosConfig(gamma=self.gamma)
            self.omega = extra.get("omega", 0.0)
            self.time = header["time"]
            self.step0 = header["step"]
            if extra.get("problem") == "star":
                gravity = FmmSolver(cfg.theta)
                floors = FloorConfig(rho=1.0e-10, tau=0.0)
            self.tree = tree
        elif cfg.problem == "sedov":
            budget = cfg.memory_budget or None
            self.tree = build_uniform_tree(
                cfg.level, cfg.subgrid, boundary=cfg.boundary_or_default,
                memory_budget=budget,
            )
            init_sedov(SedovConfig(gamma=self.gamma), self.tree, self.eos)
        else:
            star_cfg = StarConfig(q=cfg.star_q, theta=cfg.theta)
            star = scf_build_star(
                star_cfg, n_per_side=cfg.subgrid, max_level=cfg.level,
                boundary=cfg.boundary_or_default,
            )
            self.tree = star.tree
            self.omega = star.omega
            self.rho_ic = star.rho_ic
            gravity = FmmSolver(cfg.theta)
            floors = FloorConfig(rho=star_cfg.floor_rho, tau=0.0)
        mode = HydroMode(cfg.hydro, contact_detection=cfg.contact)
        self.stepper = HydroStepper(
            self.tree, self.eos, mode,
            executor=self.executor,
            gravity=gravity,
            omega=self.omega,
            floors=floors,
            buffers=self.buffers,
            profiler=self.profiler,
            lane_pool=self.lanes,
        )

    # -- main loop ---------------------------------------------------------------

    def execute(self):
        cfg = self.config
        report = MetricsReport()
        cells = self.tree.cell_count()
        t_wall0 = time.perf_counter()
        self._metrics_row(report, self.step0, 0.0, t_wall0, cells)
        step = self.step0
        try:
            while True:
                if cfg.steps and step - self.step0 >= cfg.steps:
                    break
                if cfg.end_time and self.time >= cfg.end_time - 1e-14:
                    break
                if not cfg.steps and not cfg.end_time:
                    break
                dt = self.stepper.cfl_dt(cfg.cfl)
                if cfg.end_time:
                    dt = min(dt, cfg.end_time - self.time)
                self.stepper.rk3_step(dt)
                self.time += dt
                step += 1
                self._metrics_row(report, step, dt, t_wall0, cells)
        finally:
            self.scheduler.quiesce()
        report.counters = {
            "lanes": self.lanes.counters(),
            "buffers": self.buffers.counters(),
            "kernel_launches_per_step": self.stepper.stats.kernel_launches,
            "tasks_executed": self.scheduler.tasks_executed,
        }
        report.summary = self._summarize(report)
        return report

    def _metrics_row(self, report, step, dt, t_wall0, cells):
        tot = conservation_totals(self.tree, phi=self._phi_if_star())
        wall = time.perf_counter() - t_wall0
        done = step - self.step0
        row = {
            "step": step,
            "time": self.time,
            "dt": dt,
            "wall_seconds": wall,
            "cells_per_second": cells * done / wall if wall > 0 else 0.0,
            "rho_l1": self._rho_l1(),
            **tot,
        }
        report.rows.append(row)
        if self.profiler is not None:
            self.profiler.sample_counter("cells_per_second", row["cells_per_second"])

    def _phi_if_star(self):
        grav = self.stepper.gravity
        if grav is None:
            return None
        phi, _ = grav.solve_density(self.tree)
        return phi

    def _rho_l1(self):
        if self.rho_ic is None:
            return float("nan")
        return density_error_l1(self.tree, self.rho_ic)

    def _summarize(self, report):
        first, last = report.rows[0], report.rows[-1]
        out = {"steps": last["step"] - first["step"], "time": last["time"]}
        for name in ("mass", "egas", "etot"):
            base = abs(first[name]) or 1.0
            out[f"{name}_drift"] = abs(last[name] - first[name]) / base
        mom_scale = max(abs(first["mass"]), 1e-30)
        out["momentum_magnitude"] = float(
            np.sqrt(last["sx"] ** 2 + last["sy"] ** 2 + last["sz"] ** 2) / mom_scale
        )
        out["rho_l1"] = last["rho_l1"]
        out["cells_per_second"] = last["cells_per_second"]
        return out

    # -- artifacts -----------------------------------------------------------------

    def emit_artifacts(self, report):
        cfg = self.config
        os.makedirs(cfg.out, exist_ok=True)

        def write(name, text):
            with open(os.path.join(cfg.out, name), "w") as fh:
                fh.write(text)

        write("metrics.csv", report.to_csv())
        if self.profiler is not None:
            records = self.profiler.flush_records()
            if "tree" in cfg.profile:
                write("task_tree.dot", export_task_tree(records, self.profiler))
            if "graph" in cfg.profile:
                write("task_graph.dot", export_task_graph(records, self.profiler))
            if "trace" in cfg.profile:
                write("trace.json", export_trace(records, self.profiler))
            if "counters" in cfg.profile:
                self.profiler.sample_builtins()
                write(
                    "counters.csv",
                    export_counters_csv(self.profiler.counter_samples(), self.profiler),
                )
                write(
                    "scatter.csv",
                    export_scatter_csv(
                        records, self.profiler,
                        fraction=self.profiler.scatter_fraction,
                        seed=self.profiler.seed,
                    ),
                )
        if cfg.checkpoint:
            checkpoint.write(
                self.tree, cfg.checkpoint, time=self.time,
                step=self.step0 + (report.rows[-1]["step"] - self.step0),
                extra={"problem": cfg.problem, "gamma": self.gamma, "omega": self.omega},
            )

    def close(self):
        if self.profiler is not None:
            self.profiler.stop_sampler()
        self.lanes.shutdown()
        self.scheduler.shutdown()


def run(config):
    """Execute one configured run; returns the metrics report."""
    sim = Simulation(config)
    try:
        report = sim.execute()
        sim.emit_artifacts(report)
    finally:
        sim.close()
    return report
