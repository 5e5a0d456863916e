import json
import time

import numpy as np
import pytest

from octomini.profiler import (
    NullProfiler,
    Profiler,
    export_counters_csv,
    export_scatter_csv,
    export_task_graph,
    export_task_tree,
    export_trace,
    graph_node_count,
    scatter_keep,
    tree_node_count,
)
from octomini.profiler.core import TaskRecord
from octomini.runtime import LanePool, Scheduler


class TestScopes:
    def test_basic_record(self):
        p = Profiler()
        with p.task_scope("work", worker=0):
            pass
        recs = p.flush_records()
        assert len(recs) == 1
        assert recs[0].task_type == "work"
        assert recs[0].stop >= recs[0].start

    def test_nested_chain_extends(self):
        p = Profiler()
        with p.task_scope("parent", worker=0):
            with p.timer_scope("child"):
                pass
        recs = {r.task_type: r for r in p.flush_records()}
        assert p.chain_path(recs["child"].chain) == ("parent", "child")
        assert p.chain_path(recs["parent"].chain) == ("parent",)

    def test_unbalanced_close_dropped(self):
        p = Profiler()
        p.timer_end_unbalanced()
        assert p.dropped_records == 1
        assert p.flush_records() == []

    def test_record_count_matches_scheduler(self):
        p = Profiler()
        s = Scheduler(workers=2, profiler=p)
        futs = [s.spawn(lambda: None, name="job") for _ in range(50)]
        s.wait(s.when_all(futs), timeout=10)
        s.shutdown()
        recs = [r for r in p.flush_records() if r.task_type == "job"]
        assert len(recs) == 50
        assert s.tasks_executed == 50

    def test_disabled_overhead_under_budget(self):
        p = Profiler(timers=False)
        n = 20000
        t0 = time.perf_counter_ns()
        for _ in range(n):
            with p.task_scope("x"):
                pass
        per = (time.perf_counter_ns() - t0) / n
        assert per < 1000.0  # one microsecond

    def test_chain_propagates_through_spawned_tasks(self):
        p = Profiler()
        s = Scheduler(workers=1, profiler=p)

        def outer():
            return s.spawn(lambda: None, name="inner")

        f = s.spawn(outer, name="outer")
        s.wait(f, timeout=5)
        s.quiesce()
        s.shutdown()
        recs = {r.task_type: r for r in p.flush_records()}
        assert p.chain_path(recs["inner"].chain) == ("outer", "inner")


class TestCounters:
    def test_constant_counter_samples(self):
        p = Profiler()
        for _ in range(10):
            p.sample_counter("const", 3.5)
        samples = [s for s in p.counter_samples() if s.name == "const"]
        assert len(samples) == 10
        assert all(s.value == 3.5 for s in samples)

    def test_builtin_sampler_produces_cpu_and_rss(self):
        p = Profiler(counter_period=0.01)
        p.sample_builtins()
        sum(range(200000))
        p.sample_builtins()
        names = {s.name for s in p.counter_samples()}
        assert "resident_set_bytes" in names
        assert "cpu_utilization_percent" in names

    def test_gauge_polled(self):
        p = Profiler()
        p.register_gauge("answer", lambda: 42.0)
        p.sample_builtins()
        assert any(s.name == "answer" and s.value == 42.0 for s in p.counter_samples())


def synth_records(chains):
    """Build records from (type, chain-path) pairs via a profiler."""
    p = Profiler()

    def emit(path):
        if not path:
            return
        with p.task_scope(path[0], worker=0):
            emit(path[1:])

    for path in chains:
        emit(list(path))
    return p, p.flush_records()


class TestTreeGraphExports:
    def test_linear_chain(self):
        p, recs = synth_records([("A", "B", "C")])
        tree = export_task_tree(recs, p)
        graph = export_task_graph(recs, p)
        assert tree_node_count(recs) == 3
        assert graph.count("->") == 2
        assert "digraph task_tree" in tree

    def test_recursion_tree_larger_than_graph(self):
        p, recs = synth_records([("A", "A", "A")])
        assert tree_node_count(recs) == 3
        assert graph_node_count(recs) == 1
        graph = export_task_graph(recs, p)
        # single node with a self edge
        assert "n0 -> n0" in graph

    def test_graph_edges_are_truncated_tree_edges(self):
        p, recs = synth_records([("A", "B"), ("C", "B"), ("A", "B", "C")])
        # collect tree edges as (parent type, type); graph edges must be a subset image
        tree_edges = set()
        for r in recs:
            parent = p._chains[r.chain][0]
            if parent is not None and parent != 0:
                tree_edges.add((p._chains[parent][1], r.task_type))
        graph = export_task_graph(recs, p)
        for a, b in tree_edges:
            assert f"{a}" in graph and f"{b}" in graph

    def test_octree_traversal_depth(self):
        from octomini.mesh import build_uniform_tree

        p = Profiler()

        def walk(node):
            with p.task_scope("visit", worker=0):
                if not node.is_leaf:
                    for c in node.children:
                        walk(c)

        tree = build_uniform_tree(2, 8)
        walk(tree.root)
        recs = p.flush_records()
        depth = max(len(p.chain_path(r.chain)) for r in recs)
        assert depth == 3  # root + two refined levels


class TestTraceExport:
    def test_empty_trace_valid(self):
        p = Profiler()
        doc = json.loads(export_trace([], p))
        assert doc["traceEvents"] == []

    def test_schema_keys(self):
        p, recs = synth_records([("A", "B")])
        doc = json.loads(export_trace(recs, p))
        evs = [e for e in doc["traceEvents"] if e["ph"] == "X"]
        assert evs
        for e in evs:
            for key in ("name", "ph", "ts", "dur", "pid", "tid"):
                assert key in e

    def test_lane_kernels_non_overlapping_same_tid(self):
        p = Profiler()
        s = Scheduler(workers=2, profiler=p)
        pool = LanePool(s, lanes=1)
        futs = [pool.submit("kern", lambda: time.sleep(0.002)) for _ in range(2)]
        s.wait(s.when_all(futs), timeout=10)
        s.shutdown()
        recs = [r for r in p.flush_records() if r.kind == "lane"]
        assert len(recs) == 2
        doc = json.loads(export_trace(recs, p))
        evs = sorted(
            (e for e in doc["traceEvents"] if e["ph"] == "X"), key=lambda e: e["ts"]
        )
        assert evs[0]["tid"] == evs[1]["tid"]
        assert evs[0]["ts"] + evs[0]["dur"] <= evs[1]["ts"] + 1e-6

    def test_three_virtual_threads_per_lane(self):
        p = Profiler()
        now = time.monotonic_ns()
        recs = [
            TaskRecord("kern", 1, now, now + 10, 0, lane=5, kind="lane"),
            TaskRecord("stage", 1, now + 10, now + 20, 0, lane=5, kind="memory"),
            TaskRecord("wait", 1, now + 20, now + 30, 0, lane=5, kind="sync"),
        ]
        doc = json.loads(export_trace(recs, p))
        tids = {e["tid"] for e in doc["traceEvents"] if e["ph"] == "X"}
        assert len(tids) == 3
        names = {
            e["args"]["name"] for e in doc["traceEvents"] if e["ph"] == "M"
        }
        assert names == {"lane5/kernel", "lane5/memory", "lane5/sync"}


class TestScatter:
    def test_fraction_one_keeps_all(self):
        assert all(scatter_keep(i, 1.0) for i in range(1000))

    def test_binomial_window(self):
        kept = sum(1 for i in range(1_000_000) if scatter_keep(i, 0.01, seed=12345))
        assert 9000 <= kept <= 11000

    def test_deterministic(self):
        a = [scatter_keep(i, 0.25, seed=7) for i in range(500)]
        b = [scatter_keep(i, 0.25, seed=7) for i in range(500)]
        assert a == b

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            scatter_keep(0, 0.0)

    def test_counters_never_subsampled(self):
        p = Profiler()
        for i in range(1000):
            p.sample_counter("c", float(i))
        csv = export_counters_csv(p.counter_samples(), p)
        assert csv.count("\nc,") == 0  # header first, then rows start with t
        assert len(csv.strip().splitlines()) == 1001

    def test_scatter_csv_shape(self):
        p, recs = synth_records([("A",)] * 100)
        csv = export_scatter_csv(recs, p, fraction=1.0)
        assert len(csv.strip().splitlines()) == 101
