import numpy as np
from scipy import integrate, stats

from mcrelab import lindley_step, QueueKernel, QueueBuilder, queue_build, queue_gamma, choose_epsilon, InterArrival, \
    Exponential, ShiftedUniform, Deterministic, interarrival_law, FiniteMarkovEnv, IidEnv, CouplingRunner, \
    simulate_states, RandomStream, StreamPurpose, Assumption, ValidationException, ModelInfeasibleException
from mcrelab.test.fixture import SeededTestCase, QueueDeskTestCase, coupled_states, SEED, QUEUE_SERVICE, QUEUE_M, \
    QUEUE_ALPHA_GRID


class Lindley(SeededTestCase):
    def test_step(self):
        self.assertEqual(lindley_step(1.0, 0.5, 0.25), 1.25)
        self.assertEqual(lindley_step(1.0, 0.5, 2.0), 0.0)
        self.assertEqual(lindley_step([0.0, 2.0], 0.5, [1.0, 1.0]).tolist(), [0.0, 1.5])
        with self.assertRaises(ValidationException):
            lindley_step(-1.0, 0.5, 0.25)
        with self.assertRaises(ValidationException):
            lindley_step(1.0, 0.5, -0.25)

    def test_kernel_is_the_lindley_map(self):
        kernel = QueueKernel(Exponential(2.0))
        gen = self.generator(0)
        w = gen.uniform(0.0, 5.0, 100)
        y = gen.uniform(0.0, 0.25, 100)
        e = kernel.sample_noise(gen, 100)
        self.assertAllClose(kernel.apply(y, w, e), lindley_step(w, y, e))

    def test_one_step_law(self):
        # atom P(epsilon >= w + y) plus a density on (0, w + y] carrying the rest
        kernel = QueueKernel(Exponential(2.0))
        w, y = 0.5, 0.25
        self.assertAllClose(kernel.atom(y, w), np.exp(-1.5))
        mass, _ = integrate.quad(lambda v: float(kernel.continuous_density(y, w, v)), 0.0, w + y)
        self.assertAllClose(mass, 1.0 - np.exp(-1.5), rtol=1e-8)
        self.assertEqual(float(kernel.continuous_density(y, w, 0.0)), 0.0)


class Arrivals(SeededTestCase):
    def test_exponential(self):
        law = Exponential(2.0)
        self.assertEqual(law.mean, 0.5)
        self.assertAllClose(law.log_mgf(-1.0), np.log(2.0 / 3.0))
        self.assertIsNone(law.log_mgf(2.0))
        self.assertAllClose(law.log_tail(3.0), -6.0)
        with self.assertRaises(ValidationException):
            Exponential(0.0)

    def test_shifted_uniform(self):
        law = ShiftedUniform(0.2, 0.6)
        self.assertAllClose(law.mean, 0.5)
        self.assertAllClose(law.log_mgf(-1.0), np.log(np.exp(-0.2) * -np.expm1(-0.6) / 0.6))
        self.assertAllClose(law.log_mgf(1.0), np.log(np.exp(0.2) * np.expm1(0.6) / 0.6))
        self.assertEqual(law.log_mgf(0.0), 0.0)

    def test_deterministic(self):
        law = Deterministic(0.5)
        self.assertEqual(law.log_mgf(-2.0), -1.0)
        self.assertEqual(law.sample(self.generator(0), 3).tolist(), [0.5, 0.5, 0.5])
        self.assertEqual(float(law.tail(0.5)), 1.0)
        self.assertEqual(float(law.log_tail(0.75)), -np.inf)
        with self.assertRaises(ValidationException):
            law.pdf(0.5)

    def test_factory(self):
        self.assertIsInstance(interarrival_law("exponential", rate=2.0), Exponential)
        self.assertEqual(interarrival_law("shifted_uniform", shift=0.1, width=0.2).width, 0.2)
        with self.assertRaises(ValidationException):
            interarrival_law("pareto", shape=2.0)

    def test_gamma_without_closed_form(self):
        # E e^{-epsilon} = (1 + 0.25)^-2 for a Gamma(2, 0.25) inter-arrival
        law = InterArrival(stats.gamma(2.0, scale=0.25))
        with self.assertLogs("mcrelab.QueueBuilder", level="WARNING"):
            value = queue_gamma(law, 1.0, 0.0, reps=100000, rng=self.stream(1))
        self.assertWithin(value, 0.64, 0.01)


class Feasibility(SeededTestCase):
    def test_service_above_bound(self):
        env = FiniteMarkovEnv(QUEUE_SERVICE, [0.1, 0.3])
        with self.assertRaises(ModelInfeasibleException) as ctx:
            QueueBuilder(self.pool).build(env, Exponential(2.0), QUEUE_M, QUEUE_ALPHA_GRID, 20, 1000, self.stream(0))
        self.assertEqual(ctx.exception.assumption, Assumption.SERVICE_BOUND)

    def test_unstable_queue(self):
        env = FiniteMarkovEnv(QUEUE_SERVICE, [0.6, 0.7])
        with self.assertRaises(ModelInfeasibleException) as ctx:
            QueueBuilder(self.pool).build(env, Exponential(2.0), 1.0, QUEUE_ALPHA_GRID, 20, 1000, self.stream(1))
        self.assertEqual(ctx.exception.assumption, Assumption.LONG_TIME_CONTRACTIVITY)

    def test_invalid_alpha_grid(self):
        with self.assertRaises(ValidationException):
            QueueBuilder(self.pool).find_alpha_bar(IidEnv.constant(0.1), Exponential(2.0), [-1.0, 1.0], 20, 1000,
                                                   self.stream(2))


class QueueDesk(QueueDeskTestCase):
    def test_alpha_bar(self):
        # the largest passing exponent 2 is halved
        self.assertEqual(self.model.alpha_bar, 1.0)
        alphas = [row[0] for row in self.model.alpha_table]
        self.assertEqual(alphas, sorted(QUEUE_ALPHA_GRID))
        self.assertTrue(self.model.gamma_curve.passed)
        self.assertLess(self.model.gamma_bar, 1.0)

    def test_closed_forms(self):
        gen = self.generator(0)
        y = gen.uniform(0.0, QUEUE_M, 100)
        w = gen.exponential(2.0, 100)
        self.assertAllClose(self.model.gamma(y), np.exp(y) * 2.0 / 3.0)
        self.assertAllClose(self.model.drift.gamma(y), np.exp(y) * 2.0 / 3.0)
        self.assertAllClose(self.model.V(w), np.expm1(w))
        self.assertAllClose(self.model.K, np.exp(0.25))

    def test_derived_constants(self):
        model = self.model
        self.assertAllClose(model.epsilon, choose_epsilon(model.gamma_bar))
        self.assertAllClose(model.tau, QUEUE_M + 4.0 / (1.0 / np.sqrt(model.gamma_bar) - 1.0))
        self.assertAllClose(model.log_one_minus_alpha, -2.0 * model.tau)
        self.assertAllClose(model.minor.log_mass(np.array([0.1, 0.25])), [-2.0 * model.tau] * 2)

        constants = model.constants([0.1, 0.25])
        self.assertLessEqual(constants["R_min"], constants["R_max"])
        self.assertLess(0.0, constants["split_alpha_min"])
        self.assertLess(constants["split_alpha_max"], 1.0)

    def test_small_set_level(self):
        level = self.model.small_set_level(np.array([0.1, 0.25]))
        self.assertAllClose(self.model.V(level), self.model.radius(np.array([0.1, 0.25])))

    def test_synchronous_coupling(self):
        curve = CouplingRunner(self.pool).coupling_prob_curve(self.model.kernel, self.model.synchronous_strategy(),
                                                              0.0, 10.0, self.env, [0, 50, 200], 2000, self.stream(1))
        self.assertEqual(curve.tv_bounds[0], 2.0)
        self.assertLess(curve.tv_bounds[-1], 0.05)

    def test_split_coupling_keeps_marginals(self):
        times = [10, 100]
        first, second = coupled_states(self.model.kernel, self.model.split_strategy(), 0.0, 10.0, self.env, times,
                                       4000, self.stream(2), self.pool)
        alone_low = simulate_states(self.model.kernel, self.env, 0.0, times, 4000, self.stream(3), self.pool)
        alone_high = simulate_states(self.model.kernel, self.env, 10.0, times, 4000, self.stream(4), self.pool)
        for j in range(len(times)):
            self.assertGreater(stats.ks_2samp(first[:, j], alone_low[:, j]).pvalue, 0.001)
            self.assertGreater(stats.ks_2samp(second[:, j], alone_high[:, j]).pvalue, 0.001)

    def test_shared_noise_keeps_the_order(self):
        first, second = coupled_states(self.model.kernel, self.model.synchronous_strategy(), 0.0, 10.0, self.env,
                                       [1, 5, 20, 100], 1000, self.stream(5), self.pool)
        self.assertTrue(np.all(first <= second))

    def test_build_function(self):
        model = queue_build(self.env, self.law, QUEUE_M, QUEUE_ALPHA_GRID, 20, 2000,
                            RandomStream(SEED, StreamPurpose.BUILD), [10, 50, 100])
        self.assertEqual(model.alpha_bar, self.model.alpha_bar)
        self.assertEqual(model.gamma_bar, self.model.gamma_bar)
