__all__ = ["simulate_states", "ergodic_averages", "long_run_average"]

import numpy as np

from mcrelab.interface import ValidationException, NumericException
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import StreamPurpose, as_stream


def _times(times):
    grid = [int(t) for t in times]
    if not grid or grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationException("times must be non-negative and strictly increasing, got {}".format(times))
    return grid


def simulate_states(kernel, env, x0, times, reps, rng, pool=None):
    """
    X_t at the requested times for reps independent (environment, noise) replications.

    :type kernel: mcrelab.mcre.kernel.RandomKernel
    :type env: mcrelab.env.process.EnvProcess
    :param x0: Deterministic start
    :param times: Strictly increasing times, 0 allowed
    :type reps: int
    :return: States, shape (reps, len(times)) + state shape
    :rtype: numpy.ndarray
    """
    grid = _times(times)
    pool = pool or serial_pool()

    def _body(count, gen):
        cursor = env.cursor(count, gen)
        x = kernel.state_space.batch(x0, count)
        out = np.empty((count, len(grid)) + kernel.state_space.state_shape, dtype=x.dtype)
        j = 0
        for t in range(grid[-1] + 1):
            if t == grid[j]:
                out[:, j] = x
                j += 1
                if j == len(grid):
                    break
            x = kernel.step(kernel.draw_env(cursor), x, gen)
        return out

    return pool.map_chunks(_body, reps, as_stream(rng, StreamPurpose.GENERIC))


def ergodic_averages(kernel, env, x0, phi, n_grid, reps, rng, pool=None):
    """
    (1/N) sum_{t=0..N-1} phi(X_t) for every N of the grid, along the same runs.

    :param phi: Functional on batches of states
    :return: Averages, shape (reps, len(n_grid))
    :rtype: numpy.ndarray
    """
    grid = _times(n_grid)
    if grid[0] < 1:
        raise ValidationException("ergodic averages need N >= 1")
    pool = pool or serial_pool()

    def _body(count, gen):
        cursor = env.cursor(count, gen)
        x = kernel.state_space.batch(x0, count)
        total = np.zeros(count)
        out = np.empty((count, len(grid)))
        j = 0
        for t in range(grid[-1]):
            total += phi(x)
            if t + 1 == grid[j]:
                out[:, j] = total / (t + 1)
                j += 1
                if j == len(grid):
                    break
            x = kernel.step(kernel.draw_env(cursor), x, gen)
        return out

    return pool.map_chunks(_body, reps, as_stream(rng, StreamPurpose.LLN))


def long_run_average(kernel, env, x0, phi, steps, rng, chains=1, burn_in_fraction=0.1, pool=None):
    """
    Surrogate of the stationary mean of phi: average over long trajectories with
    the first burn_in_fraction of the steps discarded.

    :param steps: Total step budget, split evenly across chains
    :type chains: int
    :return: The average and the number of steps it is taken over
    :rtype: (float, int)
    """
    if chains < 1 or steps < chains:
        raise ValidationException("need at least one step per chain")
    per_chain = steps // chains
    burn_in = int(per_chain * burn_in_fraction)
    pool = pool or serial_pool()

    def _body(count, gen):
        cursor = env.cursor(count, gen)
        x = kernel.state_space.batch(x0, count)
        total = np.zeros(count)
        for t in range(per_chain):
            x = kernel.step(kernel.draw_env(cursor), x, gen)
            if t >= burn_in:
                total += phi(x)
        return total

    sums = pool.map_chunks(_body, chains, as_stream(rng, StreamPurpose.LLN))
    kept = (per_chain - burn_in) * chains
    average = float(sums.sum() / kept)
    if not np.isfinite(average):
        raise NumericException("long-run average is not finite")
    return average, kept
