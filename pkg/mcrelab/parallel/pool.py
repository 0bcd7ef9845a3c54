__all__ = ["ReplicationPool", "serial_pool", "default_threads"]

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from mcrelab.interface import ValidationException
from mcrelab.parallel.streams import as_stream


def default_threads():
    return os.cpu_count() or 1


class ReplicationPool:
    """
    Worker pool for Monte-Carlo replications with a reproducible reduction.

    Replications are cut into chunks of CHUNK_SIZE. Chunk k always draws from
    stream.child(k) and results are concatenated in chunk order, so the output
    depends on the master seed only, never on the number of threads.

    The lifetime of the worker threads is the lifetime of the instance.
    Use as a context manager, or call shutdown when you are done:
      with ReplicationPool(threads=4) as pool:
          samples = pool.map_chunks(simulate, 10000, stream)
    """
    logger = logging.getLogger("mcrelab.ReplicationPool")

    CHUNK_SIZE = 2048

    def __init__(self, threads=1, chunk_size=None):
        """
        :param threads: Number of worker threads, 1 runs every chunk inline
        :type threads: int
        :param chunk_size: Replications per chunk, defaults to CHUNK_SIZE
        :type chunk_size: int | None
        """
        if threads is None or threads < 1:
            raise ValidationException("threads must be >= 1, got " + str(threads))

        self._threads = int(threads)
        self._chunk_size = int(chunk_size or self.CHUNK_SIZE)
        self._executor = None
        """:type: ThreadPoolExecutor | None"""

        if self._threads > 1:
            self._executor = ThreadPoolExecutor(max_workers=self._threads, thread_name_prefix="mcrelab")
        self._running = True

    @classmethod
    def enable_debug_log(cls):
        cls.logger.setLevel(logging.DEBUG)

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("ReplicationPool: %s", msg)

    @property
    def threads(self):
        return self._threads

    @property
    def chunk_size(self):
        return self._chunk_size

    def is_running(self):
        return self._running

    def chunks(self, reps):
        """
        :type reps: int
        :return: Replication count of every chunk, in order
        :rtype: list[int]
        """
        sizes = []
        remaining = int(reps)
        while remaining > 0:
            sizes.append(min(self._chunk_size, remaining))
            remaining -= sizes[-1]
        return sizes

    def map_chunks(self, fn, reps, rng):
        """
        Run fn(count, generator) on every chunk and concatenate along axis 0.

        :param fn: Vectorized replication body returning an array or a tuple of arrays
                   whose leading axis has length count
        :type fn: (int, numpy.random.Generator) -> numpy.ndarray | tuple[numpy.ndarray]
        :type reps: int
        :param rng: Master stream of the experiment
        :type rng: RandomStream | int
        :rtype: numpy.ndarray | tuple[numpy.ndarray]
        """
        if not self._running:
            raise ValidationException("ReplicationPool has been shut down")

        stream = as_stream(rng)
        sizes = self.chunks(reps)
        self._log("{} replications in {} chunks on {} thread(s)".format(reps, len(sizes), self._threads))

        def _run(index):
            return fn(sizes[index], stream.child(index).generator())

        if self._executor is None or len(sizes) == 1:
            results = [_run(i) for i in range(len(sizes))]
        else:
            # map preserves submission order, which fixes the reduction order
            results = list(self._executor.map(_run, range(len(sizes))))

        if not results:
            return np.empty((0,))
        if isinstance(results[0], tuple):
            return tuple(np.concatenate(parts, axis=0) for parts in zip(*results))
        return np.concatenate(results, axis=0)

    def shutdown(self):
        """
        :return: True if the call stopped the workers, False if already stopped.
        :rtype: bool
        """
        if not getattr(self, "_running", False):
            return False
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        self._running = False
        return True

    def __del__(self):
        self.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.shutdown()


_serial_pool = None


def serial_pool():
    """
    Shared single-threaded pool used when a caller does not provide one.

    :rtype: ReplicationPool
    """
    global _serial_pool
    if _serial_pool is None or not _serial_pool.is_running():
        _serial_pool = ReplicationPool(threads=1)
    return _serial_pool
