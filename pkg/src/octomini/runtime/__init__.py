from .buffers import Buffer, BufferManager
from .futures import TaskFuture
from .lanes import LanePool
from .scheduler import Scheduler


class PoolExecutor:
    """Adapter running hydro phases on the scheduler: plain tasks for CPU
    phases, lane submissions for the compute kernels."""

    def __init__(self, scheduler, lane_pool=None):
        self.scheduler = scheduler
        self.lane_pool = lane_pool

    def run_tasks(self, name, fns):
        futs = [self.scheduler.spawn(fn, name=name) for fn in fns]
        self.scheduler.wait(self.scheduler.when_all(futs))

    def run_kernels(self, name, fns, cells_each=0):
        if self.lane_pool is None:
            return self.run_tasks(name, fns)
        futs = [self.lane_pool.submit(name, fn, cells=cells_each) for fn in fns]
        self.scheduler.wait(self.scheduler.when_all(futs))


__all__ = ["Buffer", "BufferManager", "TaskFuture", "LanePool", "Scheduler", "PoolExecutor"]
