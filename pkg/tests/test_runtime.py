import threading
import time

import numpy as np
import pytest

from octomini.errors import PoolError, ShutdownError
from octomini.runtime import BufferManager, LanePool, PoolExecutor, Scheduler


@pytest.fixture
def sched():
    s = Scheduler(workers=2)
    yield s
    s.shutdown()


class TestFutures:
    def test_then_applies_function(self, sched):
        f = sched.ready(21)
        g = sched.then(f, lambda x: x * 2)
        assert sched.wait(g, timeout=5) == 42

    def test_when_all_empty_immediately_ready(self, sched):
        f = sched.when_all([])
        assert f.done()
        assert f.result_nowait() == []

    def test_when_all_collects_values(self, sched):
        futs = [sched.spawn(lambda i=i: i * i) for i in range(8)]
        assert sched.wait(sched.when_all(futs), timeout=5) == [i * i for i in range(8)]

    def test_failure_propagates(self, sched):
        def boom():
            raise ValueError("boom")

        f = sched.spawn(boom)
        g = sched.then(f, lambda x: x + 1)
        with pytest.raises(ValueError, match="boom"):
            sched.wait(g, timeout=5)

    def test_future_resolves_once(self, sched):
        f = sched.ready(1)
        with pytest.raises(RuntimeError):
            f.set_result(2)

    def test_deps_must_be_futures(self, sched):
        with pytest.raises(TypeError):
            sched.spawn(lambda: None, deps=(42,))

    def test_diamond_stress(self):
        # A -> (B, C) -> D: D sees both exactly once, every iteration
        s = Scheduler(workers=4)
        try:
            for _ in range(10_000):
                hits = []
                a = s.spawn(lambda: 1)
                b = s.then(a, lambda x: ("b", x + 1))
                c = s.then(a, lambda x: ("c", x + 2))
                d = s.spawn(
                    lambda: hits.extend([b.result_nowait(), c.result_nowait()]),
                    deps=(b, c),
                )
                s.wait(d, timeout=10)
                assert sorted(hits) == [("b", 2), ("c", 3)]
        finally:
            s.shutdown()

    def test_no_task_before_deps(self, sched):
        # happens-before: a task never starts before its deps are ready
        starts = {}

        def mk(name, delay):
            def fn():
                starts[name] = time.monotonic_ns()
                time.sleep(delay)
                return name

            return fn

        a = sched.spawn(mk("a", 0.01))
        b = sched.spawn(mk("b", 0.01))
        c = sched.spawn(mk("c", 0.0), deps=(a, b))
        sched.wait(c, timeout=5)
        assert starts["c"] >= a.ready_ns
        assert starts["c"] >= b.ready_ns


class TestLanePool:
    def test_single_kernel_side_effect(self, sched):
        pool = LanePool(sched, lanes=4)
        box = []
        f = pool.submit("k", lambda: box.append(1) or "ok")
        assert sched.wait(f, timeout=5) == "ok"
        assert box == [1]

    def test_single_lane_serializes_in_order(self, sched):
        pool = LanePool(sched, lanes=1)
        order = []
        futs = [pool.submit("k", lambda i=i: order.append(i)) for i in range(20)]
        sched.wait(sched.when_all(futs), timeout=10)
        assert order == list(range(20))

    def test_max_concurrent_bounded_by_lanes(self):
        s = Scheduler(workers=4)
        try:
            pool = LanePool(s, lanes=128)
            futs = [pool.submit("noop", lambda: None) for _ in range(512)]
            s.wait(s.when_all(futs), timeout=30)
            c = pool.counters()
            assert c["submitted"] == 512
            assert c["max_executing"] <= 128
        finally:
            s.shutdown()

    def test_poll_idle_returns_zero(self, sched):
        pool = LanePool(sched, lanes=2)
        before = pool.counters()["poll_calls"]
        assert pool.poll_events() == 0
        assert pool.counters()["poll_calls"] == before + 1

    def test_poll_counter_monotone(self, sched):
        pool = LanePool(sched, lanes=2)
        counts = []
        for _ in range(5):
            pool.poll_events()
            counts.append(pool.counters()["poll_calls"])
        assert counts == sorted(counts)
        futs = [pool.submit("k", lambda: 1) for _ in range(10)]
        sched.wait(sched.when_all(futs), timeout=10)
        assert pool.counters()["events_polled"] == 10

    def test_artificial_latency_delays_readiness(self, sched):
        pool = LanePool(sched, lanes=1, latency_us=30_000)
        t0 = time.monotonic()
        f = pool.submit("k", lambda: 7)
        assert sched.wait(f, timeout=5) == 7
        assert time.monotonic() - t0 >= 0.03

    def test_submitted_equals_completed_at_shutdown(self):
        s = Scheduler(workers=2)
        pool = LanePool(s, lanes=8)
        futs = [pool.submit("k", lambda: None) for _ in range(100)]
        s.wait(s.when_all(futs), timeout=10)
        s.shutdown()
        c = pool.counters()
        assert c["submitted"] == c["completed"] == 100

    def test_submit_after_shutdown_errors(self, sched):
        pool = LanePool(sched, lanes=2)
        pool.shutdown()
        with pytest.raises(ShutdownError):
            pool.submit("k", lambda: 1)

    def test_kernel_failure_propagates_via_polling(self, sched):
        pool = LanePool(sched, lanes=2)

        def bad():
            raise RuntimeError("kernel died")

        f = pool.submit("k", bad)
        with pytest.raises(RuntimeError, match="kernel died"):
            sched.wait(f, timeout=5)


class TestBufferManager:
    def test_reuse_no_new_allocation(self):
        bm = BufferManager()
        b1 = bm.acquire(1000)
        bm.release(b1)
        b2 = bm.acquire(900)  # same size class
        assert bm.counters()["allocations"] == 1
        assert bm.counters()["reuses"] == 1
        bm.release(b2)

    def test_disjoint_live_acquisitions(self):
        bm = BufferManager()
        bufs = [bm.acquire(512) for _ in range(10)]
        assert bm.counters()["allocations"] == 10
        for b in bufs:
            bm.release(b)

    def test_reuse_never_smaller(self):
        bm = BufferManager()
        b = bm.acquire(100)
        bm.release(b)
        b2 = bm.acquire(120)  # next class up: fresh allocation
        assert b2.nbytes >= 120

    def test_double_release_errors(self):
        bm = BufferManager()
        b = bm.acquire(64)
        bm.release(b)
        with pytest.raises(PoolError):
            bm.release(b)

    def test_outstanding_accounting(self):
        bm = BufferManager()
        b1 = bm.acquire(1024)
        b2 = bm.acquire(1024)
        assert bm.counters()["bytes_outstanding"] == b1.nbytes + b2.nbytes
        bm.release(b1)
        assert bm.counters()["bytes_outstanding"] == b2.nbytes
        bm.release(b2)
        assert bm.counters()["bytes_outstanding"] == 0


class TestDeterminism:
    def test_results_identical_across_worker_counts(self):
        from octomini.geometry import RHO
        from octomini.hydro import EosConfig, HydroMode, HydroStepper, conserved_from_primitive
        from octomini.mesh import build_uniform_tree

        def run(workers):
            tree = build_uniform_tree(1, 8, boundary="periodic")
            rng = np.random.default_rng(4)
            for leaf in tree.leaves():
                rho = rng.uniform(0.5, 2.0, (8, 8, 8))
                p = rng.uniform(0.5, 2.0, (8, 8, 8))
                leaf.subgrid.interior[:] = conserved_from_primitive(rho, (0, 0, 0), p, EosConfig(1.4))
            s = Scheduler(workers=workers)
            pool = LanePool(s, lanes=16)
            stepper = HydroStepper(tree, EosConfig(1.4), HydroMode("new"),
                                   executor=PoolExecutor(s, pool))
            dt = stepper.cfl_dt(0.4)
            for _ in range(3):
                stepper.rk3_step(dt)
            s.shutdown()
            return [leaf.subgrid.interior.copy() for leaf in tree.sorted_leaves()]

        ref = run(1)
        for workers in (2, 4):
            got = run(workers)
            for a, b in zip(ref, got):
                assert np.array_equal(a, b)
