import numpy as np

from mcrelab import DiscreteOracle, oracle_exact, EmpiricalLaw, shared_edges, tv_hist, empirical_law, tv_curve, \
    rate_fit, RateFit, LlnReference, surrogate_reference, check_functional_bound, lln_experiment, GaussianKernel, \
    IidEnv, Assumption, AssumptionFailure, ValidationException, UnsupportedException, InsufficientDataException, \
    FunctionalBoundException
from mcrelab.test.fixture import SeededTestCase, OracleTestCase, ORACLE_MATRICES, ORACLE_ENV


def _first_state(x):
    return (np.asarray(x) == 0).astype(float)


class Oracle(OracleTestCase):
    def test_invariant(self):
        oracle = self.oracle
        self.assertAllClose(oracle.env.invariant, [4.0 / 7.0, 3.0 / 7.0], rtol=0.0, atol=1e-10)
        self.assertAllClose(oracle.joint_invariant @ oracle.joint, oracle.joint_invariant, rtol=0.0, atol=1e-12)
        self.assertAllClose(oracle.mu_star.sum(), 1.0)
        self.assertAllClose(oracle.expectation(_first_state), oracle.mu_star[0])

    def test_laws(self):
        oracle = self.oracle
        self.assertEqual(oracle.law(0, 0).tolist(), [1.0, 0.0])
        self.assertEqual(oracle.laws(1, [0, 1, 5]).shape, (3, 2))
        self.assertLess(oracle.tv(0, 200), 1e-8)
        self.assertAllClose(oracle.law(0, 200), oracle.law(1, 200), rtol=0.0, atol=1e-10)
        self.assertLess(oracle_exact(oracle, 1, 200).tv, 1e-8)
        with self.assertRaises(ValidationException):
            oracle.start(2)

    def test_homogeneous_invariant(self):
        q0 = ORACLE_MATRICES[0]
        oracle = DiscreteOracle([q0, q0], ORACLE_ENV)
        self.assertAllClose(oracle.homogeneous_invariant(), [5.0 / 6.0, 1.0 / 6.0], rtol=0.0, atol=1e-10)
        self.assertAllClose(oracle.mu_star, [5.0 / 6.0, 1.0 / 6.0], rtol=0.0, atol=1e-10)
        with self.assertRaises(ValidationException):
            self.oracle.homogeneous_invariant()

    def test_invalid_chains(self):
        flip = [[0.0, 1.0], [1.0, 0.0]]
        with self.assertRaises(ValidationException):
            DiscreteOracle([flip, flip], ORACLE_ENV)
        with self.assertRaises(ValidationException):
            DiscreteOracle([ORACLE_MATRICES[0]], ORACLE_ENV)


class Laws(SeededTestCase):
    def test_construction(self):
        with self.assertRaises(ValidationException):
            EmpiricalLaw()
        with self.assertRaises(ValidationException):
            EmpiricalLaw(samples=[1.0], weights=[1.0])
        with self.assertRaises(ValidationException):
            EmpiricalLaw(weights=[0.5, 0.6])
        with self.assertRaises(UnsupportedException):
            EmpiricalLaw(samples=np.zeros((10, 2)))
        self.assertEqual(EmpiricalLaw(samples=np.zeros((10, 1))).samples.shape, (10,))
        self.assertEqual(EmpiricalLaw.from_states([0, 0, 1, 1], 2).weights.tolist(), [0.5, 0.5])

    def test_exact_tv(self):
        self.assertEqual(tv_hist(EmpiricalLaw(weights=[1.0, 0.0]), EmpiricalLaw(weights=[0.0, 1.0])), 2.0)
        with self.assertRaises(ValidationException):
            tv_hist(EmpiricalLaw(weights=[1.0, 0.0]), EmpiricalLaw(samples=[0.0, 1.0]))
        with self.assertRaises(ValidationException):
            tv_hist(EmpiricalLaw(weights=[1.0, 0.0]), EmpiricalLaw(weights=[1.0, 0.0, 0.0]))

    def test_binned_tv(self):
        gen = self.generator(0)
        low = EmpiricalLaw(samples=gen.uniform(0.0, 1.0, 1000))
        high = EmpiricalLaw(samples=gen.uniform(5.0, 6.0, 1000))
        self.assertAllClose(tv_hist(low, high), 2.0)
        self.assertEqual(tv_hist(low, low), 0.0)
        self.assertEqual(shared_edges(EmpiricalLaw(samples=[1.0]), EmpiricalLaw(samples=[1.0])).tolist(), [0.5, 1.5])

    def test_metric(self):
        gen = self.generator(2)
        for _ in range(50):
            p, q, r = (EmpiricalLaw(weights=w) for w in gen.dirichlet(np.ones(4), 3))
            self.assertEqual(tv_hist(p, q), tv_hist(q, p))
            self.assertTrue(0.0 <= tv_hist(p, q) <= 2.0)
            self.assertLessEqual(tv_hist(p, r), tv_hist(p, q) + tv_hist(q, r) + 1e-12)

    def test_fixed_edges(self):
        samples = self.generator(1).uniform(0.0, 10.0, 500)
        law = EmpiricalLaw(samples=samples, edges=np.arange(11.0))
        self.assertEqual(law.rebin(2).edges.tolist(), [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
        self.assertEqual(law.rebin(3).edges.tolist(), [0.0, 3.0, 6.0, 9.0, 10.0])
        self.assertAllClose(law.histogram(law.edges).sum(), 1.0)
        with self.assertRaises(ValidationException):
            EmpiricalLaw(samples=samples).rebin(2)
        with self.assertRaises(ValidationException):
            shared_edges(law, law.rebin(2))


class Curves(OracleTestCase):
    def test_empirical_law(self):
        exact = empirical_law(self.oracle.kernel, self.oracle.env, 0, 3, 1000, self.stream(0), oracle=self.oracle)
        self.assertAllClose(exact.weights, self.oracle.law(0, 3))
        sampled = empirical_law(self.oracle.kernel, self.oracle.env, 0, 3, 20000, self.stream(0), self.pool)
        self.assertLess(tv_hist(exact, sampled), 0.03)

        gaussian = GaussianKernel(lambda y, x: 0.5 * x, 1.0, 1)
        with self.assertRaises(ValidationException):
            empirical_law(gaussian, IidEnv.constant(0.0), [0.0], 3, 999, self.stream(1))
        with self.assertRaises(UnsupportedException):
            empirical_law(GaussianKernel(lambda y, x: 0.5 * x, 1.0, 2), IidEnv.constant(0.0), [0.0, 0.0], 3, 1000,
                          self.stream(1))

    def test_discrete_curve_against_oracle(self):
        curve = tv_curve(self.oracle.kernel, self.oracle.env, 0, 1, [1, 2, 5, 10], 20000, self.stream(2),
                         oracle=self.oracle, n_boot=100, pool=self.pool)
        for point in curve.points:
            self.assertWithin(point.estimate, point.exact, 0.03)
            self.assertLessEqual(point.ci_low, point.estimate)
            self.assertLessEqual(point.estimate, point.ci_high)
        self.assertEqual(curve.bin_widths, [None] * 4)
        self.assertEqual(len(curve.rows()[0]), 5)

    def test_curve_against_target_law(self):
        target = EmpiricalLaw(weights=self.oracle.mu_star)
        with self.assertLogs("mcrelab.TvCurve", level="DEBUG") as logs:
            curve = tv_curve(self.oracle.kernel, self.oracle.env, 0, target, [1, 5], 5000, self.stream(3),
                             oracle=self.oracle, n_boot=50, pool=self.pool)
        self.assertIn("TvCurve: n=5", logs.output[-1])
        self.assertAllClose([p.exact for p in curve.points], [self.oracle.tv(0, 1), self.oracle.tv(0, 5)])

    def test_continuous_curve(self):
        # shared noise: the two starts differ by 10 * 0.5^n
        kernel = GaussianKernel(lambda y, x: 0.5 * x, 1.0, 1)
        curve = tv_curve(kernel, IidEnv.constant(0.0), [0.0], [10.0], [1, 20], 2000, self.stream(4), n_boot=50,
                         pool=self.pool)
        self.assertGreater(curve.estimates[0], 1.5)
        self.assertLess(curve.estimates[1], 0.05)
        self.assertTrue(all(w > 0 for w in curve.bin_widths))

        with self.assertRaises(UnsupportedException):
            tv_curve(GaussianKernel(lambda y, x: x, 1.0, 2), IidEnv.constant(0.0), [0.0, 0.0], [1.0, 1.0], [1],
                     1000, self.stream(5))


class Rates(SeededTestCase):
    def test_geometric(self):
        fit = rate_fit([(n, 2.0 * np.exp(-0.1 * n)) for n in range(1, 11)])
        self.assertAllClose((fit.alt_c1, fit.alt_c2, fit.alt_r2), (2.0, 0.1, 1.0), rtol=1e-9)
        self.assertEqual(fit.better_model, RateFit.GEOMETRIC)
        self.assertTrue(fit.converging)

    def test_cube_root(self):
        fit = rate_fit([(k ** 3, 3.0 * np.exp(-0.5 * k)) for k in range(1, 7)])
        self.assertAllClose((fit.c1, fit.c2, fit.r2), (3.0, 0.5, 1.0), rtol=1e-9)
        self.assertEqual(fit.better_model, RateFit.CUBE_ROOT)
        self.assertEqual(fit.points, 6)
        self.assertEqual(len(fit.rows()), 2)

    def test_saturation_and_zeros(self):
        pairs = [(0, 2.0), (1, 2.0)] + [(n, np.exp(-0.2 * n)) for n in range(2, 7)] + [(7, 0.0)]
        fit = rate_fit(pairs, saturation=2.0)
        self.assertEqual(fit.points, 5)
        self.assertAllClose(fit.alt_c2, 0.2, rtol=1e-9)
        with self.assertRaises(InsufficientDataException):
            rate_fit(pairs[:6], saturation=2.0)

    def test_flat_curve_is_not_converging(self):
        self.assertFalse(rate_fit([(n, 0.5) for n in range(1, 8)]).converging)


class Lln(OracleTestCase):
    def test_errors_shrink(self):
        reference = LlnReference.from_oracle(self.oracle, _first_state)
        self.assertTrue(reference.exact)
        with self.assertLogs("mcrelab.LlnResult", level="DEBUG") as logs:
            result = lln_experiment(self.oracle.kernel, self.oracle.env, 0, _first_state, [100, 400, 1600], 400,
                                    [1, 2], reference, self.stream(0), bound=1.0, probes=[0, 1], pool=self.pool)
        self.assertIn("N=1600", logs.output[-1])
        self.assertEqual(result.errors.shape, (2, 3))
        self.assertTrue(result.decreasing())
        self.assertLess(result.error(2, 1600), 0.5 * result.error(2, 100))
        self.assertLessEqual(result.error(1, 400), result.error(2, 400))
        self.assertEqual(len(result.rows()), 6)

    def test_surrogate(self):
        with self.assertLogs("mcrelab.LlnReference", level="DEBUG"):
            reference = surrogate_reference(self.oracle.kernel, self.oracle.env, 0, _first_state, 200000,
                                            self.stream(1), chains=4, pool=self.pool)
        self.assertFalse(reference.exact)
        self.assertWithin(reference.value, self.oracle.mu_star[0], 0.01)
        self.assertEqual(reference.as_dict()["surrogate"], "long-run average")

    def test_functional_bound(self):
        with self.assertRaises(FunctionalBoundException) as ctx:
            check_functional_bound(_first_state, 0.5, [0, 1])
        self.assertIsInstance(ctx.exception, AssumptionFailure)
        self.assertIsInstance(ctx.exception, ValidationException)
        self.assertEqual(ctx.exception.assumption, Assumption.LLN_BOUND)
        with self.assertRaises(ValidationException):
            check_functional_bound(_first_state, None, [0, 1])
        check_functional_bound(_first_state, 1.0, [0, 1])

    def test_orders(self):
        reference = LlnReference(0.5, True)
        with self.assertRaises(ValidationException):
            lln_experiment(self.oracle.kernel, self.oracle.env, 0, _first_state, [10], 10, [0.5], reference,
                           self.stream(2))
