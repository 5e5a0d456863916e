"""Reusing buffer manager: free lists per power-of-two size class.

Acquire hands out a free buffer of sufficient class when one exists and
allocates otherwise; release returns buffers to the free list without
deallocating.  Every buffer is on exactly one of {free list, loaned set}.
"""

import threading

import numpy as np

from ..errors import PoolError


class Buffer:
    __slots__ = ("nbytes", "_mem", "manager", "live")

    def __init__(self, nbytes, manager):
        self.nbytes = nbytes
        self._mem = np.empty(nbytes, dtype=np.uint8)
        self.manager = manager
        self.live = False

    def array(self, shape, dtype=np.float64):
        """View of the buffer's first bytes as an ndarray."""
        need = int(np.prod(shape)) * np.dtype(dtype).itemsize
        if need > self.nbytes:
            raise PoolError(f"buffer of {self.nbytes} B viewed as {need} B")
        return self._mem[:need].view(dtype).reshape(shape)


class BufferManager:
    def __init__(self):
        self._lock = threading.Lock()
        self._free = {}  # size class exponent -> list of Buffer
        self.allocations = 0
        self.reuses = 0
        self.bytes_outstanding = 0
        self.high_water = 0

    @staticmethod
    def _size_class(nbytes):
        return max(int(nbytes) - 1, 0).bit_length()

    def acquire(self, nbytes):
        if nbytes <= 0:
            raise PoolError("acquire needs a positive size")
        cls = self._size_class(nbytes)
        with self._lock:
            free = self._free.get(cls)
            if free:
                buf = free.pop()
                self.reuses += 1
            else:
                buf = Buffer(2**cls, self)
                self.allocations += 1
            buf.live = True
            self.bytes_outstanding += buf.nbytes
            self.high_water = max(self.high_water, self.bytes_outstanding)
        return buf

    def acquire_array(self, shape, dtype=np.float64):
        nbytes = int(np.prod(shape)) * np.dtype(dtype).itemsize
        buf = self.acquire(nbytes)
        return buf, buf.array(shape, dtype)

    def release(self, buf):
        with self._lock:
            if not buf.live:
                raise PoolError("buffer released twice")
            buf.live = False
            self.bytes_outstanding -= buf.nbytes
            self._free.setdefault(self._size_class(buf.nbytes), []).append(buf)

    def counters(self):
        with self._lock:
            return {
                "allocations": self.allocations,
                "reuses": self.reuses,
                "bytes_outstanding": self.bytes_outstanding,
                "high_water": self.high_water,
            }
