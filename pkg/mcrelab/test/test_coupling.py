import numpy as np

from mcrelab import CoupledState, SynchronousNoise, SplitMinorization, MaximalGaussian, coupled_step, \
    maximal_gaussian_coupling, doeblin_split, CouplingRunner, CouplingCurve, CouplingTime, run_coupling, \
    visit_times, DiscreteKernel, GaussianKernel, IidEnv, EnvPath, sample_path, DriftSpec, MinorSpec, \
    ValidationException, WindowRangeException
from mcrelab.test.fixture import SeededTestCase, OracleTestCase, ORACLE_MATRICES


class States(SeededTestCase):
    def test_coalesced_needs_equal_states(self):
        self.assertTrue(CoupledState(1, 1, True).coalesced)
        with self.assertRaises(ValidationException):
            CoupledState(0, 1, True)

    def test_coalesced_states_stay_coalesced(self):
        kernel = DiscreteKernel(ORACLE_MATRICES)
        gen = self.generator(0)
        for strategy in (SynchronousNoise(), doeblin_split(kernel)):
            state = CoupledState(1, 1, True)
            for t in range(50):
                state = coupled_step(strategy, kernel, t % 2, state, gen)
                self.assertTrue(state.coalesced)
                self.assertEqual(int(state.x1), int(state.x2))


class Strategies(SeededTestCase):
    def test_doeblin_masses(self):
        split = doeblin_split(DiscreteKernel(ORACLE_MATRICES))
        self.assertAllClose(split.alpha(np.array([0, 1])), [0.4, 0.1])
        with self.assertRaises(ValidationException):
            doeblin_split(DiscreteKernel([[[1.0, 0.0], [0.0, 1.0]]]))
        with self.assertRaises(ValidationException):
            doeblin_split(GaussianKernel(lambda y, x: x, 1.0, 1))

    def test_split_preserves_marginals(self):
        kernel = DiscreteKernel(ORACLE_MATRICES)
        split = doeblin_split(kernel)
        count = 40000
        a, b, joined = split.step(kernel, 0, np.zeros(count, dtype=int), np.ones(count, dtype=int),
                                  np.zeros(count, dtype=bool), self.generator(1))
        self.assertWithin(np.mean(a == 1), 0.1, 0.01)
        self.assertWithin(np.mean(b == 1), 0.5, 0.01)
        # the residual rows of Q(0) have disjoint supports, so only the common draw coalesces
        self.assertWithin(np.mean(joined), 0.6, 0.015)
        self.assertTrue(np.array_equal(a[joined], b[joined]))

    def test_split_without_mass_outside_small_set(self):
        kernel = DiscreteKernel(ORACLE_MATRICES)
        strategy = SplitMinorization(0.5, lambda y, rng, count: np.zeros(count, dtype=int),
                                     lambda y, x, u: x, small_set=lambda y, x1, x2: np.zeros(np.shape(x1), bool))
        a, b, joined = strategy.step(kernel, 0, np.zeros(100, dtype=int), np.ones(100, dtype=int),
                                     np.zeros(100, dtype=bool), self.generator(2))
        self.assertEqual(a.shape, (100,))
        self.assertTrue(np.all(np.isin(b, [0, 1])))

    def test_maximal_gaussian(self):
        z1, z2, same = maximal_gaussian_coupling([0.3, 0.1], [0.3, 0.1], 2.0, self.generator(3))
        self.assertTrue(same)
        self.assertTrue(np.array_equal(z1, z2))
        with self.assertRaises(ValidationException):
            maximal_gaussian_coupling([0.0], [1.0], 0.0, self.generator(3))
        with self.assertRaises(ValidationException):
            maximal_gaussian_coupling([0.0], [1.0, 2.0], 1.0, self.generator(3))

    def test_maximal_gaussian_meeting_probability(self):
        # P(z1 = z2) = 2 Phi(-|m1 - m2| / (2 sigma))
        kernel = GaussianKernel(lambda y, x: x, 1.0, 1)
        strategy = MaximalGaussian()
        count = 20000
        a = kernel.state_space.batch([0.0], count)
        b = kernel.state_space.batch([1.0], count)
        z1, z2, joined = strategy.step(kernel, 0.0, a, b, np.zeros(count, dtype=bool), self.generator(4))
        self.assertWithin(np.mean(joined), 0.617075, 0.015)
        self.assertWithin(z2.mean(), 1.0, 0.03)
        self.assertWithin(z2.var(), 1.0, 0.05)
        self.assertWithin(z1.mean(), 0.0, 0.03)

        wide = kernel.state_space.batch([2.0], 100000)
        _, _, joined = strategy.step(kernel, 0.0, np.zeros_like(wide), wide, np.zeros(100000, dtype=bool),
                                     self.generator(5))
        self.assertWithin(np.mean(joined), 0.317311, 0.005)
        with self.assertRaises(ValidationException):
            strategy.check_kernel(DiscreteKernel(ORACLE_MATRICES))

    def test_synchronous_predicate(self):
        # shared noise halves the gap every step; 10 / 2^5 < 0.5 <= 10 / 2^4
        kernel = GaussianKernel(lambda y, x: 0.5 * x, 1.0, 1)
        strategy = SynchronousNoise(lambda a, b: np.abs(a - b)[:, 0] < 0.5)
        curve = CouplingRunner(self.pool).coupling_prob_curve(kernel, strategy, [0.0], [10.0], IidEnv.constant(0.0),
                                                              [4, 5], 1000, self.stream(5))
        self.assertEqual([p.not_coupled for p in curve.points], [1.0, 0.0])


class Runs(OracleTestCase):
    def test_identical_starts(self):
        curve = CouplingRunner(self.pool).coupling_prob_curve(self.oracle.kernel, SynchronousNoise(), 0, 0,
                                                              self.oracle.env, [0, 5, 10], 1000, self.stream(0))
        self.assertTrue(np.all(curve.tv_bounds == 0.0))
        self.assertEqual(len(curve.rows()[0]), len(CouplingCurve.CSV_HEADER))

    def test_bound_dominates_exact_tv(self):
        grid = list(range(11))
        curve = CouplingRunner(self.pool).coupling_prob_curve(self.oracle.kernel, doeblin_split(self.oracle.kernel),
                                                              0, 1, self.oracle.env, grid, 4000, self.stream(1))
        exact = np.abs(self.oracle.laws(0, grid) - self.oracle.laws(1, grid)).sum(axis=1)
        for point, tv in zip(curve.points, exact):
            self.assertGreaterEqual(2.0 * point.ci_high, tv - 1e-12)
        self.assertEqual(curve.points[0].not_coupled, 1.0)
        self.assertTrue(np.all(np.diff(curve.tv_bounds) <= 0))

    def test_runner_validation(self):
        runner = CouplingRunner(self.pool)
        with self.assertRaises(ValidationException):
            runner.coupling_prob_curve(self.oracle.kernel, SynchronousNoise(), 0, 1, self.oracle.env, [0, 5], 999,
                                       self.stream(2))
        with self.assertRaises(ValidationException):
            runner.coupling_prob_curve(self.oracle.kernel, SynchronousNoise(), 0, 1, self.oracle.env, [5, 5], 1000,
                                       self.stream(2))

    def test_single_run_along_a_path(self):
        path = sample_path(self.oracle.env, (0, 59), self.stream(3))
        run = run_coupling(self.oracle.kernel, doeblin_split(self.oracle.kernel), 0, 1, path, 60, self.generator(4))
        self.assertEqual(run.horizon, 60)
        self.assertEqual(run.x1.shape, (61,))
        self.assertFalse(run.coalesced[0])
        if run.coupled:
            tau = run.coupling_time
            self.assertTrue(np.array_equal(run.x1[tau:], run.x2[tau:]))
            self.assertTrue(np.all(run.coalesced[tau:]))
        else:
            self.assertIs(run.coupling_time, CouplingTime.NEVER)

        with self.assertRaises(WindowRangeException):
            run_coupling(self.oracle.kernel, SynchronousNoise(), 0, 1, EnvPath(0, [0.0] * 10), 20, self.generator(4))

    def test_exchange_symmetry(self):
        path = sample_path(self.oracle.env, (0, 29), self.stream(8))
        for strategy in (SynchronousNoise(), doeblin_split(self.oracle.kernel)):
            a = run_coupling(self.oracle.kernel, strategy, 0, 1, path, 30, self.generator(9))
            b = run_coupling(self.oracle.kernel, strategy, 1, 0, path, 30, self.generator(9))
            self.assertTrue(np.array_equal(a.x1, b.x2))
            self.assertTrue(np.array_equal(a.x2, b.x1))
            self.assertTrue(np.array_equal(a.coalesced, b.coalesced))

    def test_visits(self):
        drift = DriftSpec(lambda x: np.zeros(np.shape(x)), 0.5, 1.0)
        minor = MinorSpec(0.1, 0.5)
        path = sample_path(self.oracle.env, (0, 19), self.stream(5))
        run = run_coupling(self.oracle.kernel, SynchronousNoise(), 0, 1, path, 20, self.generator(6))
        self.assertEqual(visit_times(run, minor, drift, path), list(range(20)))
        self.assertEqual(run.visits, list(range(20)))
        with self.assertRaises(WindowRangeException):
            visit_times(run, minor, drift, EnvPath(1, [0.0] * 20))
        with self.assertRaises(WindowRangeException):
            visit_times(run, minor, drift, EnvPath(-5, [0.0] * 3))

        visits = CouplingRunner(self.pool).mean_visits(self.oracle.kernel, SynchronousNoise(), 0, 1, self.oracle.env,
                                                       drift, minor, 10, 200, self.stream(7))
        self.assertEqual(visits, 10.0)
