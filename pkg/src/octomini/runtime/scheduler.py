"""Work-stealing task scheduler with lane-pool polling.

Workers run tasks from their own deque (LIFO), then the shared inbox,
then steal from siblings (FIFO).  Idle workers poll the registered lane
pools so simulated-accelerator completions always make progress, even
when every CPU task has drained.
"""

import threading
import time
from collections import deque

from ..errors import ShutdownError
from .futures import FAILED, PENDING, TaskFuture


class _Task:
    __slots__ = ("fn", "future", "name", "kind", "lane", "chain")

    def __init__(self, fn, future, name, kind, lane, chain):
        self.fn = fn
        self.future = future
        self.name = name
        self.kind = kind
        self.lane = lane
        self.chain = chain


class Scheduler:
    def __init__(self, workers=4, profiler=None):
        if workers < 1:
            raise ValueError("need at least one worker")
        self.profiler = profiler
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._inbox = deque()
        self._deques = [deque() for _ in range(workers)]
        self._pools = []
        self._running = True
        self._outstanding = 0
        self.tasks_executed = 0
        self._local = threading.local()
        self._threads = []
        for w in range(workers):
            t = threading.Thread(target=self._worker, args=(w,), daemon=True, name=f"worker-{w}")
            self._threads.append(t)
            t.start()

    # -- registration -----------------------------------------------------------

    def register_pool(self, pool):
        with self._lock:
            self._pools.append(pool)

    @property
    def workers(self):
        return len(self._deques)

    def current_worker(self):
        return getattr(self._local, "worker", None)

    # -- task creation ------------------------------------------------------------

    def spawn(self, fn, name="task", deps=(), kind="task", lane=None):
        """Run `fn` after all `deps` are ready; returns its future."""
        for d in deps:
            if not isinstance(d, TaskFuture):
                raise TypeError("deps must be TaskFuture instances")
        with self._lock:
            if not self._running:
                raise ShutdownError("scheduler is shut down")
            self._outstanding += 1
        chain = None
        if self.profiler is not None:
            chain = self.profiler.current_chain()
        fut = TaskFuture(name=name, deps=deps)
        task = _Task(fn, fut, name, kind, lane, chain)
        if not deps:
            self._enqueue(task)
            return fut
        remaining = [len(deps)]
        lock = threading.Lock()

        def on_dep(dep):
            with lock:
                remaining[0] -= 1
                last = remaining[0] == 0
            if dep.state == FAILED and not fut.done():
                try:
                    fut.set_exception(dep.exception())
                except RuntimeError:
                    pass
                if last:
                    self._task_done()
                return
            if last:
                if fut.done():  # a failed dep already resolved it
                    self._task_done()
                else:
                    self._enqueue(task)

        for d in deps:
            d.add_done_callback(on_dep)
        return fut

    def then(self, future, fn, name="continuation"):
        """f(value) after `future` is ready; a returned future is adopted."""
        return self.spawn(lambda: fn(future.result_nowait()), name=name, deps=(future,))

    def when_all(self, futures, name="when_all"):
        futures = list(futures)
        out = TaskFuture(name=name, deps=tuple(futures))
        if not futures:
            out.set_result([])
            return out
        remaining = [len(futures)]
        lock = threading.Lock()

        def on_done(_dep):
            with lock:
                remaining[0] -= 1
                if remaining[0] > 0:
                    return
            err = next((f.exception() for f in futures if f.state == FAILED), None)
            if err is not None:
                out.set_exception(err)
            else:
                out.set_result([f.result_nowait() for f in futures])

        for f in futures:
            f.add_done_callback(on_done)
        return out

    def ready(self, value=None, name="ready"):
        fut = TaskFuture(name=name)
        fut.set_result(value)
        return fut

    # -- execution ------------------------------------------------------------------

    def _enqueue(self, task):
        w = self.current_worker()
        with self._cond:
            if w is not None:
                self._deques[w].append(task)
            else:
                self._inbox.append(task)
            self._cond.notify()

    def _next_task(self, w):
        with self._lock:
            own = self._deques[w]
            if own:
                return own.pop()
            if self._inbox:
                return self._inbox.popleft()
            for i in range(len(self._deques)):
                other = self._deques[(w + 1 + i) % len(self._deques)]
                if other:
                    return other.popleft()
        return None

    def _run_task(self, task, worker):
        self._local.worker = worker
        prof = self.profiler
        try:
            if prof is not None:
                with prof.task_scope(task.name, chain=task.chain, worker=worker,
                                     lane=task.lane, kind=task.kind):
                    value = task.fn()
            else:
                value = task.fn()
        except BaseException as exc:
            task.future.set_exception(exc)
        else:
            if isinstance(value, TaskFuture):
                value.add_done_callback(
                    lambda inner: task.future.set_exception(inner.exception())
                    if inner.state == FAILED
                    else task.future.set_result(inner.result_nowait())
                )
            else:
                task.future.set_result(value)
        finally:
            with self._lock:
                self.tasks_executed += 1
            self._task_done()

    def _task_done(self):
        with self._cond:
            self._outstanding -= 1
            self._cond.notify_all()

    def _poll_pools(self):
        n = 0
        with self._lock:
            pools = list(self._pools)
        for p in pools:
            n += p.poll_events()
        return n

    def _worker(self, w):
        self._local.worker = w
        while True:
            with self._lock:
                if not self._running and self._outstanding == 0:
                    return
            task = self._next_task(w)
            if task is not None:
                self._run_task(task, w)
                continue
            if self._poll_pools():
                continue
            with self._cond:
                if self._inbox or self._deques[w]:
                    continue
                if not self._running and self._outstanding == 0:
                    return
                self._cond.wait(timeout=0.0005)

    # -- waiting / teardown ------------------------------------------------------------

    def wait(self, future, timeout=None):
        """Block until `future` resolves; workers keep helping meanwhile."""
        if self.current_worker() is not None:
            deadline = None if timeout is None else time.monotonic() + timeout
            w = self.current_worker()
            while not future.done():
                task = self._next_task(w)
                if task is not None:
                    self._run_task(task, w)
                elif not self._poll_pools():
                    time.sleep(1e-5)
                if deadline is not None and time.monotonic() > deadline:
                    raise TimeoutError(future.name)
            return future.result_nowait()
        ev = threading.Event()
        future.add_done_callback(lambda _f: ev.set())
        if not ev.wait(timeout):
            raise TimeoutError(future.name)
        return future.result_nowait()

    def run_all(self, fns, name="batch"):
        futs = [self.spawn(fn, name=name) for fn in fns]
        return self.wait(self.when_all(futs))

    def quiesce(self, timeout=30.0):
        """Wait until no task is outstanding and no lane event is pending."""
        deadline = time.monotonic() + timeout
        while True:
            self._poll_pools()
            with self._lock:
                idle = self._outstanding == 0 and not any(
                    p.pending_events() for p in self._pools
                )
            if idle:
                return
            if time.monotonic() > deadline:
                raise TimeoutError("scheduler failed to quiesce")
            time.sleep(1e-4)

    def shutdown(self, wait=True):
        if wait:
            self.quiesce()
        with self._cond:
            self._running = False
            self._cond.notify_all()
        for t in self._threads:
            t.join(timeout=10.0)
