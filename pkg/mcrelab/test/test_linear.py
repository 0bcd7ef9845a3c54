import numpy as np

from mcrelab import MatrixTable, Innovation, LinearModel, LinearBuilder, AssumptionVerifier, IidEnv, op_norm, \
    linear_build, linear_step, difference_decay, RandomStream, StreamPurpose, Assumption, ValidationException, \
    ModelInfeasibleException, InconclusiveStabilityException
from mcrelab.test.fixture import SeededTestCase, LinearDeskTestCase, SEED


class Matrices(SeededTestCase):
    def test_op_norm(self):
        self.assertAllClose(op_norm([[0.0, -0.4], [1.5, 0.0]]), 1.5)
        self.assertAllClose(op_norm(2.0), 2.0)
        with self.assertRaises(ValidationException):
            op_norm([[np.inf, 0.0], [0.0, 1.0]])

    def test_table_lookup(self):
        table = MatrixTable([np.eye(2), 2.0 * np.eye(2)], values=[0.1, 0.25])
        self.assertAllClose(table(0.25), 2.0 * np.eye(2))
        self.assertEqual(table(np.array([0.1, 0.25, 0.1])).shape, (3, 2, 2))
        with self.assertRaises(ValidationException):
            table(0.2)
        self.assertAllClose(MatrixTable.constant(np.eye(3))(np.zeros(4)), np.broadcast_to(np.eye(3), (4, 3, 3)))
        with self.assertRaises(ValidationException):
            MatrixTable([[[1.0, 0.0]]])
        with self.assertRaises(ValidationException):
            MatrixTable([np.eye(2)], values=[0.0, 1.0])

    def test_gaussian_innovation(self):
        innovation = Innovation.gaussian(2, 0.5)
        self.assertAllClose(innovation.mean_norm, 0.5 * np.sqrt(np.pi / 2.0))
        self.assertEqual(innovation.sample(self.generator(0), 10).shape, (10, 2))
        with self.assertRaises(ValidationException):
            Innovation.gaussian(2, 0.0)


class Builder(SeededTestCase):
    def test_identity_is_inconclusive(self):
        identity = MatrixTable.constant(np.eye(2))
        with self.assertRaises(InconclusiveStabilityException) as ctx:
            LinearBuilder(self.pool).build(identity, identity, Innovation.gaussian(2), IidEnv.constant(0.0), 1,
                                           [0.0], 1000, self.stream(0))
        self.assertEqual(ctx.exception.assumption, Assumption.STABILITY)
        self.assertEqual(ctx.exception.ci, (0.0, 0.0))

    def test_expanding_is_infeasible(self):
        with self.assertRaises(ModelInfeasibleException) as ctx:
            LinearBuilder(self.pool).build(MatrixTable.constant(2.0 * np.eye(2)), MatrixTable.constant(np.eye(2)),
                                           Innovation.gaussian(2), IidEnv.constant(0.0), 1, [0.0], 1000,
                                           self.stream(1))
        self.assertEqual(ctx.exception.assumption, Assumption.STABILITY)

    def test_probe_checks(self):
        builder = LinearBuilder(self.pool)
        with self.assertRaises(ValidationException):
            builder.check_probes(MatrixTable.constant(np.zeros((2, 2))), MatrixTable.constant(np.eye(2)), [0.0])
        with self.assertRaises(ValidationException):
            builder.check_probes(MatrixTable.constant(np.eye(2)), MatrixTable.constant(np.eye(2)), [])
        self.assertAllClose(builder.check_probes(MatrixTable.constant(np.eye(2)),
                                                 MatrixTable.constant(3.0 * np.eye(2)), [0.0]), 3.0)

    def test_block_length(self):
        with self.assertRaises(ValidationException):
            LinearModel(MatrixTable.constant(np.eye(2)), MatrixTable.constant(np.eye(2)), Innovation.gaussian(2),
                        IidEnv.constant(0.0), 0)


class LinearDesk(LinearDeskTestCase):
    def test_constants(self):
        model = self.model
        mean_norm = np.sqrt(np.pi / 2.0)
        self.assertAllClose(model.M, 1.5)
        self.assertAllClose(model.K, 2.0 * 2.25 * mean_norm)
        self.assertAllClose(model.one_step_K, 1.5 * mean_norm)
        self.assertEqual(model.kernel.block_length, 2)
        self.assertEqual(model.constants()["p"], 2)

    def test_stability(self):
        # every two-step product is +-0.6 I
        self.assertAllClose(self.model.stability.mean, np.log(0.6))
        self.assertAllClose(self.model.stability.stderr, 0.0, atol=1e-15)
        self.assertTrue(self.model.stability.passed)
        self.assertAllClose(self.model.block_gamma(np.array([[0.0, 1.0], [1.0, 1.0]])), [0.6, 0.6])
        self.assertAllClose(self.model.block_product([0.0, 1.0]), 0.6 * np.eye(2), atol=1e-15)

    def test_single_step(self):
        self.assertAllClose(linear_step([1.0, 0.0], 0.0, [0.0, 0.0], self.model), [0.0, 1.5])
        self.assertAllClose(linear_step([1.0, 0.0], 1.0, [1.0, 1.0], self.model), [1.0, -0.5])
        with self.assertRaises(ValidationException):
            linear_step([1.0, 0.0, 0.0], 0.0, [0.0, 0.0], self.model)

    def test_difference_decay(self):
        decay = difference_decay(self.model, [1.0, 0.0], [0.0, 0.0], 20, 200, self.stream(0), self.pool)
        self.assertEqual(decay.norms.shape, (200, 21))
        for k in range(11):
            self.assertAllClose(decay.norms[:, 2 * k], np.full(200, 0.6 ** k), rtol=1e-10)
        self.assertLessEqual(decay.max_deviation, 1e-8)
        self.assertEqual(len(decay.rows()), 21)

    def test_block_drift(self):
        probes = [([0.0, 1.0], [3.0, 0.0]), ([1.0, 1.0], [0.0, -2.0]), ([0.0, 0.0], [0.0, 0.0])]
        rows = AssumptionVerifier(self.pool).multistep_drift_check(self.model.kernel, probes, 2000, self.stream(1))
        expected = [Assumption.MULTISTEP_DRIFT] * 3 + [Assumption.ONE_STEP_BOUND] * 3
        self.assertEqual([r.assumption for r in rows], expected)
        self.assertTrue(all(r.passed for r in rows))

    def test_build_function(self):
        model = linear_build(MatrixTable([self.A0, -self.A0]), MatrixTable.constant(np.eye(2)), Innovation.gaussian(2),
                             self.env, 2, [0.0, 1.0], 2000, RandomStream(SEED, StreamPurpose.BUILD))
        self.assertEqual(model.stability.mean, self.model.stability.mean)
        self.assertEqual(model.K, self.model.K)
