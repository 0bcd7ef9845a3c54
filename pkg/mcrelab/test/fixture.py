import os
import shutil
import tempfile
import unittest

import numpy as np

from mcrelab import RandomStream, StreamPurpose, ReplicationPool, IidEnv, FiniteMarkovEnv, DiscreteOracle, \
    Exponential, QueueBuilder, QuadraticGradient, SgldBuilder, MatrixTable, Innovation, LinearBuilder

SEED = 20240601

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, os.pardir, "samples", "configs")

ORACLE_MATRICES = [[[0.9, 0.1], [0.5, 0.5]], [[0.2, 0.8], [0.3, 0.7]]]
ORACLE_ENV = [[0.7, 0.3], [0.4, 0.6]]

QUEUE_SERVICE = [[0.8, 0.2], [0.3, 0.7]]
QUEUE_VALUES = [0.1, 0.25]
QUEUE_M = 0.25
QUEUE_RATE = 2.0
QUEUE_ALPHA_GRID = [0.25, 0.5, 1.0, 1.5, 2.0]

SGLD_STEP = 0.01
SGLD_VALUES = [0.4, 0.6]

SWITCH_A = [[0.0, -0.4], [1.5, 0.0]]


def config_path(name):
    return os.path.join(CONFIG_DIR, name)


def coupled_states(kernel, strategy, x1, x2, env, times, reps, rng, pool):
    """
    Both coordinates of coupled runs at the requested times.

    :return: (first, second), each of shape (reps, len(times)) + state shape
    """
    times = list(times)
    space = kernel.state_space

    def _body(count, gen):
        cursor = env.cursor(count, gen)
        a = space.batch(x1, count)
        b = space.batch(x2, count)
        joined = np.zeros(count, dtype=bool)
        first = np.empty((count, len(times)) + space.state_shape)
        second = np.empty_like(first)
        j = 0
        for t in range(times[-1] + 1):
            if t == times[j]:
                first[:, j] = a
                second[:, j] = b
                j += 1
                if j == len(times):
                    break
            a, b, joined = strategy.step(kernel, kernel.draw_env(cursor), a, b, joined, gen)
        return first, second

    return pool.map_chunks(_body, reps, rng)


class SeededTestCase(unittest.TestCase):
    """
    Streams keyed by the test seed, and a single-threaded pool per test class.
    """
    THREADS = 1

    @classmethod
    def setUpClass(cls):
        cls.pool = ReplicationPool(cls.THREADS)

    @classmethod
    def tearDownClass(cls):
        cls.pool.shutdown()

    def stream(self, *path, purpose=StreamPurpose.GENERIC):
        return RandomStream(SEED, purpose, path)

    def generator(self, *path):
        return self.stream(*path).generator()

    def assertAllClose(self, actual, expected, rtol=1e-12, atol=0.0):
        np.testing.assert_allclose(np.asarray(actual, dtype=float), np.asarray(expected, dtype=float),
                                   rtol=rtol, atol=atol)

    def assertWithin(self, value, expected, delta):
        self.assertLessEqual(abs(float(value) - float(expected)), delta,
                             "{} is not within {} of {}".format(value, delta, expected))


class OracleTestCase(SeededTestCase):
    @classmethod
    def setUpClass(cls):
        super(OracleTestCase, cls).setUpClass()
        cls.oracle = DiscreteOracle(ORACLE_MATRICES, ORACLE_ENV)


class QueueDeskTestCase(SeededTestCase):
    """
    Lindley queue with the two-state Markov service chain and exponential(2) arrivals.
    """
    @classmethod
    def setUpClass(cls):
        super(QueueDeskTestCase, cls).setUpClass()
        cls.env = FiniteMarkovEnv(QUEUE_SERVICE, QUEUE_VALUES)
        cls.law = Exponential(QUEUE_RATE)
        cls.model = QueueBuilder(cls.pool).build(cls.env, cls.law, QUEUE_M, QUEUE_ALPHA_GRID, 20, 2000,
                                                 RandomStream(SEED, StreamPurpose.BUILD), [10, 50, 100])


class SgldDeskTestCase(SeededTestCase):
    """
    One-dimensional quadratic SGLD with curvature Delta(y) = y, y uniform on {0.4, 0.6}.
    """
    @classmethod
    def setUpClass(cls):
        super(SgldDeskTestCase, cls).setUpClass()
        cls.env = IidEnv.discrete(SGLD_VALUES, [0.5, 0.5])
        cls.gradient = QuadraticGradient(lambda y: np.asarray(y, dtype=float))
        cls.model = cls.build_sgld(SGLD_STEP)

    @classmethod
    def build_sgld(cls, lam, growth=None):
        return SgldBuilder(cls.pool).build(lam, cls.gradient, cls.env, [[-3.0], [0.0], [3.0]], SGLD_VALUES,
                                           [10, 50, 100], 2000, RandomStream(SEED, StreamPurpose.BUILD),
                                           growth=growth)


class LinearDeskTestCase(SeededTestCase):
    """
    X' = A(Y) X + eps with A(1) = -A(0), so every product of two steps is +-0.6 I.
    """
    @classmethod
    def setUpClass(cls):
        super(LinearDeskTestCase, cls).setUpClass()
        cls.A0 = np.array(SWITCH_A)
        cls.env = IidEnv.discrete([0.0, 1.0], [0.5, 0.5])
        cls.model = LinearBuilder(cls.pool).build(MatrixTable([cls.A0, -cls.A0]), MatrixTable.constant(np.eye(2)),
                                                  Innovation.gaussian(2), cls.env, 2, [0.0, 1.0], 2000,
                                                  RandomStream(SEED, StreamPurpose.BUILD))


class OutputDirTestCase(unittest.TestCase):
    def setUp(self):
        self.output = tempfile.mkdtemp(prefix="mcrelab-")

    def tearDown(self):
        shutil.rmtree(self.output, ignore_errors=True)
