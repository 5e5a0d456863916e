"""Task timing with dependency chains, plus counter sampling.

Records accumulate in per-worker append-only buffers (no locking on the
hot path) and are merged at flush.  A task's identity for aggregation is
its (type, full dependency chain), not its call stack: chains are
interned as ids, each holding (parent_chain_id, task_type).
"""

import os
import threading
import time
from collections import namedtuple

TaskRecord = namedtuple(
    "TaskRecord", ["task_type", "chain", "start", "stop", "worker", "lane", "kind"]
)
CounterSample = namedtuple("CounterSample", ["name", "t_ns", "value"])

ROOT_CHAIN = 0


class _NullScope:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


_NULL_SCOPE = _NullScope()


class _TaskScope:
    __slots__ = ("prof", "task_type", "chain_in", "worker", "lane", "kind",
                 "cid", "prev", "start")

    def __init__(self, prof, task_type, chain, worker, lane, kind):
        self.prof = prof
        self.task_type = task_type
        self.chain_in = chain
        self.worker = worker
        self.lane = lane
        self.kind = kind

    def __enter__(self):
        prof = self.prof
        parent = self.chain_in if self.chain_in is not None else prof.current_chain()
        self.cid = prof.intern_chain(parent, self.task_type)
        self.prev = getattr(prof._local, "chain", None)
        prof._local.chain = self.cid
        self.start = time.monotonic_ns()
        return self

    def __exit__(self, *exc):
        stop = time.monotonic_ns()
        prof = self.prof
        prof._local.chain = self.prev
        prof._buffer().append(
            TaskRecord(self.task_type, self.cid, self.start, stop,
                       self.worker, self.lane, self.kind)
        )
        return False


class Profiler:
    def __init__(self, timers=True, counters=True, trace=True, scatter_fraction=0.01,
                 counter_period=1.0, seed=12345):
        self.timers = timers
        self.counters_on = counters
        self.trace = trace
        self.scatter_fraction = scatter_fraction
        self.counter_period = counter_period
        self.seed = seed
        self.start_ns = time.monotonic_ns()
        self._chains = [(None, "<root>")]  # chain id -> (parent id, type)
        self._chain_ids = {}
        self._chain_lock = threading.Lock()
        self._buffers = []
        self._buffer_lock = threading.Lock()
        self._local = threading.local()
        self._counters = []
        self._counter_lock = threading.Lock()
        self._gauges = []
        self._sampler = None
        self._sampler_stop = threading.Event()
        self.dropped_records = 0
        self._last_cpu = None

    # -- chains -----------------------------------------------------------------

    def intern_chain(self, parent, task_type):
        parent = ROOT_CHAIN if parent is None else parent
        key = (parent, task_type)
        cid = self._chain_ids.get(key)
        if cid is not None:
            return cid
        with self._chain_lock:
            cid = self._chain_ids.get(key)
            if cid is None:
                self._chains.append(key)
                cid = len(self._chains) - 1
                self._chain_ids[key] = cid
        return cid

    def chain_path(self, cid):
        """Task-type path from the chain root to `cid`."""
        path = []
        while cid is not None and cid != ROOT_CHAIN:
            parent, name = self._chains[cid]
            path.append(name)
            cid = parent
        return tuple(reversed(path))

    def current_chain(self):
        return getattr(self._local, "chain", None)

    # -- recording ----------------------------------------------------------------

    def _buffer(self):
        buf = getattr(self._local, "buf", None)
        if buf is None:
            buf = []
            self._local.buf = buf
            with self._buffer_lock:
                self._buffers.append(buf)
        return buf

    def task_scope(self, task_type, chain=None, worker=None, lane=None, kind="task"):
        """Scope wrapping one task execution; appends a record on close."""
        if not self.timers:
            return _NULL_SCOPE
        return _TaskScope(self, task_type, chain, worker, lane, kind)

    def timer_scope(self, task_type, parent_chain=None):
        """Synchronous instrumentation entry point for code inside a task."""
        return self.task_scope(task_type, chain=parent_chain, worker=None, lane=None)

    def timer_end_unbalanced(self):
        """An end without a begin: drop with a diagnostic count."""
        self.dropped_records += 1

    def record_event(self, task_type, start, stop, worker=None, lane=None, kind="task",
                     chain=None):
        if not self.timers:
            return
        cid = self.intern_chain(chain if chain is not None else self.current_chain(), task_type)
        self._buffer().append(TaskRecord(task_type, cid, start, stop, worker, lane, kind))

    def flush_records(self):
        with self._buffer_lock:
            allrec = [r for buf in self._buffers for r in buf]
        allrec.sort(key=lambda r: (r.start, r.stop))
        return allrec

    # -- counters -------------------------------------------------------------------

    def sample_counter(self, name, value, t_ns=None):
        if not self.counters_on:
            return
        t = t_ns if t_ns is not None else time.monotonic_ns()
        with self._counter_lock:
            self._counters.append(CounterSample(name, t, float(value)))

    def counter_samples(self):
        with self._counter_lock:
            return list(self._counters)

    def register_gauge(self, name, fn):
        """Callable polled by the periodic sampler (and sample_builtins)."""
        self._gauges.append((name, fn))

    def sample_builtins(self):
        t = time.monotonic_ns()
        times = os.times()
        cpu = times.user + times.system
        wall = time.monotonic()
        if self._last_cpu is not None:
            dc = cpu - self._last_cpu[0]
            dw = wall - self._last_cpu[1]
            if dw > 0:
                self.sample_counter("cpu_utilization_percent", 100.0 * dc / dw, t)
        self._last_cpu = (cpu, wall)
        try:
            with open("/proc/self/statm") as fh:
                rss_pages = int(fh.read().split()[1])
            self.sample_counter("resident_set_bytes", rss_pages * os.sysconf("SC_PAGE_SIZE"), t)
        except (OSError, ValueError, IndexError):
            pass
        for name, fn in self._gauges:
            try:
                self.sample_counter(name, fn(), t)
            except Exception:
                pass

    def start_sampler(self):
        if not self.counters_on or self._sampler is not None:
            return

        def loop():
            while not self._sampler_stop.wait(self.counter_period):
                self.sample_builtins()

        self._sampler = threading.Thread(target=loop, daemon=True, name="counter-sampler")
        self._sampler.start()

    def stop_sampler(self):
        if self._sampler is not None:
            self._sampler_stop.set()
            self._sampler.join(timeout=2.0)
            self._sampler = None
            self._sampler_stop = threading.Event()


class NullProfiler:
    """Disabled profiler: every scope is a shared no-op (sub-microsecond)."""

    timers = False
    counters_on = False
    trace = False

    def current_chain(self):
        return None

    def task_scope(self, *a, **k):
        return _NULL_SCOPE

    def timer_scope(self, *a, **k):
        return _NULL_SCOPE

    def sample_counter(self, *a, **k):
        pass

    def register_gauge(self, *a, **k):
        pass
