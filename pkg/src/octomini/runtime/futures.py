"""Task futures: single-assignment result slots with continuations."""

import threading

PENDING = "pending"
READY = "ready"
FAILED = "failed"


class TaskFuture:
    """Write-once result of a task.

    Transitions pending -> ready or pending -> failed exactly once; each
    registered continuation fires exactly once.  `deps` records the futures
    this one was declared to depend on (used by the happens-before checks).
    """

    __slots__ = ("_lock", "_state", "_value", "_error", "_callbacks", "deps",
                 "name", "ready_ns", "lane")

    def __init__(self, name="", deps=()):
        self._lock = threading.Lock()
        self._state = PENDING
        self._value = None
        self._error = None
        self._callbacks = []
        self.deps = tuple(deps)
        self.name = name
        self.ready_ns = None
        self.lane = None

    @property
    def state(self):
        return self._state

    def done(self):
        return self._state != PENDING

    def set_result(self, value, now_ns=None):
        self._finish(READY, value, None, now_ns)

    def set_exception(self, exc, now_ns=None):
        self._finish(FAILED, None, exc, now_ns)

    def _finish(self, state, value, error, now_ns):
        import time

        with self._lock:
            if self._state != PENDING:
                raise RuntimeError(f"future {self.name!r} resolved twice")
            self._state = state
            self._value = value
            self._error = error
            self.ready_ns = now_ns if now_ns is not None else time.monotonic_ns()
            callbacks, self._callbacks = self._callbacks, []
        for cb in callbacks:
            cb(self)

    def add_done_callback(self, cb):
        with self._lock:
            if self._state == PENDING:
                self._callbacks.append(cb)
                return
        cb(self)

    def result_nowait(self):
        if self._state == FAILED:
            raise self._error
        if self._state == PENDING:
            raise RuntimeError("future is not ready")
        return self._value

    def exception(self):
        return self._error
