import numpy as np
from scipy import stats

from mcrelab import LlnReference, lln_experiment, rate_fit, CouplingRunner, MaximalGaussian, simulate_states, \
    small_set_radius, difference_decay, MatrixTable, Innovation, LinearModel, IidEnv
from mcrelab.cli import main
from mcrelab.test.fixture import OracleTestCase, QueueDeskTestCase, SgldDeskTestCase, LinearDeskTestCase, \
    OutputDirTestCase, coupled_states, config_path, QUEUE_M, QUEUE_RATE, SGLD_VALUES

REPS = 10000


def _first_state(x):
    return (np.asarray(x) == 0).astype(float)


def _stationary_variance(lam, values):
    # theta' = (1 - lam Delta) theta + sqrt(lam) xi with Delta uniform on values
    values = np.asarray(values, dtype=float)
    return lam / (1.0 - np.mean((1.0 - lam * values) ** 2))


class OracleConvergence(OracleTestCase):
    def test_both_starts_reach_the_invariant_law(self):
        for start in (0, 1):
            self.assertLess(self.oracle.tv(start, 200), 1e-8)
        self.assertAllClose(self.oracle.law(0, 200), self.oracle.law(1, 200), rtol=0.0, atol=1e-10)


class QueueCouplingSoundness(QueueDeskTestCase):
    def check_first_coordinate(self, strategy, path):
        times = [10, 100]
        first, _ = coupled_states(self.model.kernel, strategy, 0.0, 10.0, self.env, times, REPS,
                                  self.stream(path, 0), self.pool)
        alone = simulate_states(self.model.kernel, self.env, 0.0, times, REPS, self.stream(path, 1), self.pool)
        for j in range(len(times)):
            self.assertGreater(stats.ks_2samp(first[:, j], alone[:, j]).pvalue, 0.01)

    def test_split(self):
        self.check_first_coordinate(self.model.split_strategy(), 0)

    def test_synchronous(self):
        self.check_first_coordinate(self.model.synchronous_strategy(), 1)


class SgldCouplingSoundness(SgldDeskTestCase):
    def test_maximal_gaussian(self):
        times = [10, 100]
        first, _ = coupled_states(self.model.kernel, MaximalGaussian(), [-3.0], [3.0], self.env, times, REPS,
                                  self.stream(0), self.pool)
        alone = simulate_states(self.model.kernel, self.env, [-3.0], times, REPS, self.stream(1), self.pool)
        for j in range(len(times)):
            self.assertGreater(stats.ks_2samp(first[:, j, 0], alone[:, j, 0]).pvalue, 0.01)


class QueueConvergence(QueueDeskTestCase):
    def test_coupling_bound_and_rate(self):
        curve = CouplingRunner(self.pool).coupling_prob_curve(self.model.kernel, self.model.synchronous_strategy(),
                                                              0.0, 10.0, self.env, list(range(0, 201, 5)), REPS,
                                                              self.stream(0))
        self.assertLess(curve.tv_bounds[-1], 0.05)
        self.assertTrue(np.all(np.diff(curve.tv_bounds) <= 0))
        fit = rate_fit(curve, saturation=2.0)
        self.assertTrue((fit.c2 > 0 and fit.r2 >= 0.9) or (fit.alt_c2 > 0 and fit.alt_r2 >= 0.9),
                        "neither rate model fits: {}".format(fit.rows()))


class Certification(OutputDirTestCase):
    def verify(self, name):
        return main.run(["verify", "--config", config_path(name), "--out", self.output, "--threads", "2"])

    def test_desks_pass(self):
        for name in ("queue_desk.yaml", "sgld_desk.yaml", "linear_switching.yaml"):
            with self.subTest(config=name):
                self.assertEqual(self.verify(name), main.EXIT_PASS)

    def test_counterexamples_fail(self):
        for name in ("counter_queue_unstable.yaml", "counter_sgld_large_step.yaml", "counter_linear_identity.yaml"):
            with self.subTest(config=name):
                self.assertEqual(self.verify(name), main.EXIT_FAIL)


class SgldTarget(SgldDeskTestCase):
    def check_moments(self, model, path):
        states = simulate_states(model.kernel, self.env, [0.0], [10000], REPS, self.stream(path), self.pool)
        theta = states[:, 0, 0]
        self.assertWithin(theta.mean(), 0.0, 0.05)
        self.assertWithin(theta.var(), 1.0, 0.1)

    def test_moments(self):
        self.check_moments(self.model, 0)
        self.check_moments(self.build_sgld(0.0025), 1)

    def test_bias_shrinks_with_the_step(self):
        large = _stationary_variance(0.01, SGLD_VALUES)
        small = _stationary_variance(0.0025, SGLD_VALUES)
        self.assertAllClose(large, 1.0026, rtol=1e-4)
        self.assertAllClose(small, 1.00065, rtol=1e-5)
        self.assertLessEqual(abs(small - 1.0), abs(large - 1.0))


class Lln(OracleTestCase):
    def test_error_rate(self):
        grid = [1000, 4000, 16000]
        reference = LlnReference.from_oracle(self.oracle, _first_state)
        result = lln_experiment(self.oracle.kernel, self.oracle.env, 0, _first_state, grid, 400, [2], reference,
                                self.stream(0), bound=1.0, probes=[0, 1], pool=self.pool)
        for n, four_n in zip(grid, grid[1:]):
            self.assertLessEqual(result.error(2, four_n), 0.75 * result.error(2, n))
        self.assertLess(result.error(2, grid[-1]), 0.01)


class LinearContraction(LinearDeskTestCase):
    def test_difference_follows_the_products(self):
        decay = difference_decay(self.model, [1.0, 0.0], [0.0, 0.0], 40, 200, self.stream(0), self.pool)
        for k in range(21):
            self.assertAllClose(decay.norms[:, 2 * k], np.full(200, 0.6 ** k), rtol=0.0, atol=1e-10)
        self.assertLess(self.model.stability.ci_high, 0.0)


class QueueFormulas(QueueDeskTestCase):
    def test_closed_forms(self):
        model = self.model
        y = self.generator(0).uniform(0.0, QUEUE_M, 100)
        alpha = model.alpha_bar
        gamma = np.exp(alpha * y) * QUEUE_RATE / (QUEUE_RATE + alpha)
        K = np.exp(alpha * QUEUE_M)
        epsilon = (1.0 / np.sqrt(model.gamma_bar) - 1.0) / 2.0
        self.assertAllClose(model.gamma(y), gamma)
        self.assertAllClose(model.K, K)
        self.assertAllClose(model.epsilon, epsilon)
        self.assertAllClose(model.tau, QUEUE_M + 4.0 / (1.0 / np.sqrt(model.gamma_bar) - 1.0))
        self.assertAllClose(model.radius(y), 2.0 * K / (epsilon * gamma))


class SgldFormulas(SgldDeskTestCase):
    def test_closed_forms(self):
        model = self.model
        y = self.generator(0).uniform(-1.0, 1.0, 100)
        lam = model.lam
        gamma = 1.0 + 3.0 * lam ** 2 * model.K1 ** 2 - 2.0 * lam * y
        raw = lam * (model.d + 2.0 * model.b) + 3.0 * lam ** 2 * model.K3 ** 2 + 3.0 * lam ** 2 * model.K2 ** 2 * y * y
        self.assertAllClose(model.gamma(y), gamma)
        self.assertAllClose(model.K(y), np.maximum(raw, 1.0))
        self.assertAllClose(small_set_radius(model.drift, model.epsilon, y),
                            2.0 * np.maximum(raw, 1.0) / (model.epsilon * gamma))


class LinearFormulas(LinearDeskTestCase):
    def test_closed_forms(self):
        gen = self.generator(0)
        A0, A1 = gen.standard_normal((2, 3, 3))
        model = LinearModel(MatrixTable([A0, A1]), MatrixTable.constant(np.eye(3)), Innovation.gaussian(3, 0.5),
                            IidEnv.discrete([0.0, 1.0], [0.5, 0.5]), 3, M=2.0)
        self.assertAllClose(model.K, 3 * 2.0 ** 3 * model.innovation.mean_norm)
        blocks = gen.integers(0, 2, (100, 3)).astype(float)
        tables = (A0, A1)
        expected = [np.linalg.norm(tables[int(c)] @ tables[int(b)] @ tables[int(a)], 2) for a, b, c in blocks]
        self.assertAllClose(model.block_gamma(blocks), expected, rtol=1e-12)
        self.assertAllClose(self.model.block_gamma(gen.integers(0, 2, (100, 2)).astype(float)), np.full(100, 0.6))
