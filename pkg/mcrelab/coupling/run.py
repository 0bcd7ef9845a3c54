__all__ = [
    "CouplingTime", "CouplingRun", "CouplingCurve", "CouplingPoint", "run_coupling", "visit_times",
    "CouplingRunner", "coupling_prob_curve", "mean_visits",
]

import logging
from enum import Enum

import numpy as np
from scipy.stats import binomtest

from mcrelab.interface import ValidationException, WindowRangeException
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import StreamPurpose, as_stream, as_generator


class CouplingTime(Enum):
    """
    Tag of a run that never coalesced within its horizon.
    """
    NEVER = "never"


class CouplingRun:
    """
    Paired trajectories over times 0..N with the coupling time and, once
    computed, the joint small-set visit times.
    """
    def __init__(self, x1, x2, coalesced, visits=None):
        """
        :param x1: Trajectory of coordinate 1, shape (N+1,) + state shape
        :param x2: Trajectory of coordinate 2
        :param coalesced: Coalescence flags, shape (N+1,)
        """
        self._x1 = x1
        self._x2 = x2
        self._coalesced = coalesced
        hits = np.flatnonzero(coalesced)
        self._coupling_time = int(hits[0]) if hits.size else CouplingTime.NEVER
        self.visits = visits

    @property
    def x1(self):
        return self._x1

    @property
    def x2(self):
        return self._x2

    @property
    def coalesced(self):
        return self._coalesced

    @property
    def horizon(self):
        return self._coalesced.size - 1

    @property
    def coupling_time(self):
        """
        :rtype: int | CouplingTime
        """
        return self._coupling_time

    @property
    def coupled(self):
        return self._coupling_time is not CouplingTime.NEVER


def _env_inputs(kernel, path, horizon):
    p = kernel.block_length
    if path.t0 > 0 or path.t1 < p * horizon - 1:
        raise WindowRangeException("environment window [{}, {}] does not cover the {} steps of a horizon {} run"
                                   .format(path.t0, path.t1, p * horizon, horizon))
    values = path.window(0, p * horizon - 1) if horizon > 0 else np.empty(0)
    return values if p == 1 else values.reshape(horizon, p)


def run_coupling(kernel, strategy, x1, x2, path, horizon, rng):
    """
    Run one coupled pair for horizon steps along a fixed environment path.

    :type kernel: mcrelab.mcre.kernel.RandomKernel
    :type strategy: mcrelab.coupling.strategy.CouplingStrategy
    :param path: Environment path covering times 0..horizon-1 (blocks for multistep kernels)
    :type path: mcrelab.env.process.EnvPath
    :type horizon: int
    :rtype: CouplingRun
    """
    strategy.check_kernel(kernel)
    inputs = _env_inputs(kernel, path, horizon)
    gen = as_generator(rng)
    space = kernel.state_space

    a = space.batch(x1, 1)
    b = space.batch(x2, 1)
    joined = np.array([np.array_equal(a, b)])
    xs1, xs2, flags = [a[0]], [b[0]], [joined[0]]
    for t in range(horizon):
        a, b, joined = strategy.step(kernel, inputs[t], a, b, joined, gen)
        xs1.append(a[0])
        xs2.append(b[0])
        flags.append(joined[0])
    return CouplingRun(np.array(xs1), np.array(xs2), np.array(flags, dtype=bool))


def visit_times(run, minor, drift, path):
    """
    Times t with V(x1_t) + V(x2_t) <= R(y_t), over the times the path covers.

    :type run: CouplingRun
    :type minor: mcrelab.mcre.spec.MinorSpec
    :type drift: mcrelab.mcre.spec.DriftSpec
    :type path: mcrelab.env.process.EnvPath
    :rtype: list[int]
    :raises: WindowRangeException if the path does not cover time 0
    """
    if path.t0 > 0 or path.t1 < 0:
        raise WindowRangeException("environment window [{}, {}] does not cover time 0".format(path.t0, path.t1))
    last = min(run.horizon, path.t1)
    total = drift.V(run.x1[:last + 1]) + drift.V(run.x2[:last + 1])
    radius = minor.radius(drift, path.window(0, last))
    times = [int(t) for t in np.flatnonzero(total <= radius)]
    run.visits = times
    return times


class CouplingPoint:
    def __init__(self, n, not_coupled, ci_low, ci_high):
        self.n = int(n)
        self.not_coupled = float(not_coupled)
        self.ci_low = float(ci_low)
        self.ci_high = float(ci_high)

    @property
    def tv_bound(self):
        return 2.0 * self.not_coupled

    def csv_row(self):
        return self.n, self.not_coupled, self.ci_low, self.ci_high, self.tv_bound


class CouplingCurve:
    """
    Estimated P(not coalesced by n) on nested horizons of the same runs, with
    exact binomial CIs; 2 P(X_n^{x1} != X_n^{x2}) bounds the total variation distance.
    """
    CSV_HEADER = ("n", "not_coupled_estimate", "ci_low", "ci_high", "tv_bound")

    def __init__(self, points, reps):
        """
        :type points: list[CouplingPoint]
        """
        self.points = points
        self.reps = reps

    @property
    def horizons(self):
        return np.array([p.n for p in self.points])

    @property
    def tv_bounds(self):
        return np.array([p.tv_bound for p in self.points])

    def rows(self):
        return [p.csv_row() for p in self.points]


class CouplingRunner:
    """
    Vectorized batches of coupled pairs under independent stationary environments.
    """
    logger = logging.getLogger("mcrelab.CouplingRunner")

    MIN_REPS = 1000

    def __init__(self, pool=None, confidence=0.95):
        self._pool = pool or serial_pool()
        self._confidence = confidence

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("CouplingRunner: %s", msg)

    def _run_batches(self, kernel, strategy, x1, x2, env, horizon, reps, rng, record):
        """
        :param record: Recorder class, instantiated per chunk with the chunk size; start() sees
                       time 0 and update(t, y, a, b, joined) every later step
        """
        strategy.check_kernel(kernel)
        space = kernel.state_space

        def _body(count, gen):
            cursor = env.cursor(count, gen)
            a = space.batch(x1, count)
            b = space.batch(x2, count)
            joined = np.full(count, np.array_equal(a[:1], b[:1]))
            out = record(count)
            out.start(a, b, joined)
            for t in range(1, horizon + 1):
                y = kernel.draw_env(cursor)
                a, b, joined = strategy.step(kernel, y, a, b, joined, gen)
                out.update(t, y, a, b, joined)
            return out.result()

        return self._pool.map_chunks(_body, reps, as_stream(rng, StreamPurpose.COUPLE))

    def coupling_prob_curve(self, kernel, strategy, x1, x2, env, n_grid, reps, rng):
        if reps < self.MIN_REPS:
            raise ValidationException("at least {} replications required, got {}".format(self.MIN_REPS, reps))
        grid = [int(n) for n in n_grid]
        if not grid or grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationException("horizons must be non-negative and strictly increasing")

        class _Record:
            def __init__(self, count):
                self.out = np.zeros((count, len(grid)), dtype=bool)
                self.j = 0

            def _mark(self, t, joined):
                while self.j < len(grid) and grid[self.j] == t:
                    self.out[:, self.j] = ~joined
                    self.j += 1

            def start(self, a, b, joined):
                self._mark(0, joined)

            def update(self, t, y, a, b, joined):
                self._mark(t, joined)

            def result(self):
                return self.out

        apart = self._run_batches(kernel, strategy, x1, x2, env, grid[-1], reps, rng, _Record)
        counts = apart.sum(axis=0)
        points = []
        for n, k in zip(grid, counts):
            ci = binomtest(int(k), reps).proportion_ci(confidence_level=self._confidence, method="exact")
            points.append(CouplingPoint(n, k / reps, ci.low, ci.high))
        self._log("P(not coupled by {}) = {:.6g}".format(grid[-1], points[-1].not_coupled))
        return CouplingCurve(points, reps)

    def mean_visits(self, kernel, strategy, x1, x2, env, drift, minor, window, reps, rng):
        """
        Mean number of joint small-set visits V(x1_t) + V(x2_t) <= R(y_t) for t in [0, window).
        """
        class _Record:
            def __init__(self, count):
                self.visits = np.zeros(count)
                self.a = self.b = None

            def start(self, a, b, joined):
                self.a, self.b = a, b

            def update(self, t, y, a, b, joined):
                # y drives the step from time t-1
                total = drift.V(self.a) + drift.V(self.b)
                self.visits += total <= minor.radius(drift, y)
                self.a, self.b = a, b

            def result(self):
                return self.visits

        visits = self._run_batches(kernel, strategy, x1, x2, env, int(window), reps, rng, _Record)
        return float(visits.mean())


def coupling_prob_curve(kernel, strategy, x1, x2, env, n_grid, reps, rng, pool=None):
    """
    :type kernel: mcrelab.mcre.kernel.RandomKernel
    :type strategy: mcrelab.coupling.strategy.CouplingStrategy
    :type env: mcrelab.env.process.EnvProcess
    :rtype: CouplingCurve
    """
    return CouplingRunner(pool).coupling_prob_curve(kernel, strategy, x1, x2, env, n_grid, reps, rng)


def mean_visits(kernel, strategy, x1, x2, env, drift, minor, window, reps, rng, pool=None):
    return CouplingRunner(pool).mean_visits(kernel, strategy, x1, x2, env, drift, minor, window, reps, rng)
