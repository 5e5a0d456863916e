"""Simulated accelerator: a fixed pool of ordered kernel lanes.

Submitting a kernel enqueues it on the least-loaded lane and returns a
future.  Kernels execute on scheduler workers (one at a time per lane, in
submission order), but completion is signalled through a lane event that
only `poll_events` consumes -- the future becomes ready when a poll
observes the event, never directly from the kernel.  An artificial
latency (microseconds) can delay event visibility to mimic device
round-trips.
"""

import threading
import time
from collections import deque

from ..errors import ShutdownError
from .futures import TaskFuture


class _Lane:
    __slots__ = ("index", "queue", "busy", "events")

    def __init__(self, index):
        self.index = index
        self.queue = deque()
        self.busy = False
        self.events = deque()  # (fire_ns, future, value, error)

    def in_flight(self):
        return len(self.queue) + (1 if self.busy else 0)


class LanePool:
    def __init__(self, scheduler, lanes=128, latency_us=0.0, profiler=None):
        if lanes < 1:
            raise ValueError("need at least one lane")
        self.scheduler = scheduler
        self.lanes = [_Lane(i) for i in range(lanes)]
        self.latency_ns = int(latency_us * 1000.0)
        self.profiler = profiler
        self._local = threading.local()
        self._lock = threading.Lock()
        self._shutdown = False
        self.submitted = 0
        self.completed = 0
        self.poll_calls = 0
        self.events_polled = 0
        self.launches = 0
        self.executing = 0
        self.max_executing = 0
        scheduler.register_pool(self)

    # -- submission -----------------------------------------------------------

    def submit(self, name, fn, cells=0):
        """Enqueue `fn` as a kernel; the future resolves only via polling."""
        with self._lock:
            if self._shutdown:
                raise ShutdownError("lane pool is shut down")
            lane = min(self.lanes, key=lambda l: (l.in_flight(), l.index))
            fut = TaskFuture(name=name)
            fut.lane = lane.index  # type: ignore[attr-defined]
            lane.queue.append((name, fn, fut))
            self.submitted += 1
            self.launches += 1
            start = not lane.busy
            if start:
                lane.busy = True
        if start:
            self._spawn_runner(lane)
        return fut

    def _spawn_runner(self, lane):
        self.scheduler.spawn(
            lambda: self._run_next(lane), name="lane_kernel", kind="lane", lane=lane.index
        )

    def current_lane(self):
        """Lane index of the kernel running on this thread, if any."""
        return getattr(self._local, "lane", None)

    def _run_next(self, lane):
        with self._lock:
            name, fn, fut = lane.queue.popleft()
            self.executing += 1
            self.max_executing = max(self.max_executing, self.executing)
        value = None
        error = None
        self._local.lane = lane.index
        try:
            value = fn()
        except BaseException as exc:  # propagate through the event path
            error = exc
        finally:
            self._local.lane = None
        done = time.monotonic_ns()
        fire = done + self.latency_ns
        with self._lock:
            self.executing -= 1
            lane.events.append((fire, fut, value, error, done))
            more = bool(lane.queue)
            lane.busy = more
        if more:
            self._spawn_runner(lane)

    # -- polling --------------------------------------------------------------

    def poll_events(self):
        """Resolve futures of every fired completion event; returns count."""
        now = time.monotonic_ns()
        done = []
        with self._lock:
            self.poll_calls += 1
            for lane in self.lanes:
                while lane.events and lane.events[0][0] <= now:
                    done.append((lane.index, lane.events.popleft()))
            self.events_polled += len(done)
            self.completed += len(done)
        prof = self.profiler
        for lane_idx, (_, fut, value, error, fin) in done:
            if prof is not None and getattr(prof, "timers", False):
                prof.record_event("event_wait", fin, now, lane=lane_idx, kind="sync")
            if error is not None:
                fut.set_exception(error, now_ns=now)
            else:
                fut.set_result(value, now_ns=now)
        return len(done)

    def pending_events(self):
        with self._lock:
            return any(lane.events for lane in self.lanes) or any(
                lane.busy or lane.queue for lane in self.lanes
            )

    def shutdown(self):
        with self._lock:
            self._shutdown = True

    def counters(self):
        with self._lock:
            return {
                "submitted": self.submitted,
                "completed": self.completed,
                "launches": self.launches,
                "poll_calls": self.poll_calls,
                "events_polled": self.events_polled,
                "max_executing": self.max_executing,
                "in_flight": sum(l.in_flight() for l in self.lanes),
            }
