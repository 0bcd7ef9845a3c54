__all__ = [
    "MatrixTable", "Innovation", "LinearModel", "StabilityEstimate", "DifferenceDecay", "LinearBuilder",
    "op_norm", "linear_step", "linear_build", "difference_decay",
]

import logging

import numpy as np
from scipy import linalg, stats

from mcrelab.interface import Assumption, ValidationException, ModelInfeasibleException, \
    InconclusiveStabilityException
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import StreamPurpose, as_stream
from mcrelab.mcre.estimate import mean_stderr
from mcrelab.mcre.kernel import RandomKernel, StateSpace, multistep_wrap
from mcrelab.mcre.spec import DriftSpec


def op_norm(matrix):
    """
    Largest singular value.

    :raises: ValidationException on non-finite entries
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise ValidationException("matrix has non-finite entries")
    return float(linalg.svdvals(matrix)[0])


def _batched_norm(matrices):
    return np.linalg.norm(matrices, ord=2, axis=(-2, -1))


def _apply(matrix, vectors):
    if matrix.ndim == 2:
        return vectors @ matrix.T
    return np.einsum("nij,nj->ni", matrix, vectors)


class MatrixTable:
    """
    Matrix-valued map of the environment, y -> matrices[index(y)].
    """
    def __init__(self, matrices, values=None):
        """
        :param matrices: Stack of square matrices, shape (m, d, d)
        :param values: Environment value of each matrix; defaults to 0..m-1
        """
        matrices = np.array(matrices, dtype=float)
        if matrices.ndim == 2:
            matrices = matrices[None]
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValidationException("expected square matrices of shape (m, d, d), got {}".format(matrices.shape))
        if not np.all(np.isfinite(matrices)):
            raise ValidationException("matrix table has non-finite entries")
        self._matrices = matrices
        if values is None:
            self._values = None
        else:
            self._values = np.asarray(values, dtype=float)
            if self._values.shape != (matrices.shape[0],):
                raise ValidationException("one environment value per matrix is required")
        self._constant = matrices.shape[0] == 1 and values is None

    @classmethod
    def constant(cls, matrix):
        return cls([matrix])

    @property
    def dimension(self):
        return self._matrices.shape[1]

    @property
    def matrices(self):
        return self._matrices

    def index(self, y):
        y = np.asarray(y, dtype=float)
        if self._constant:
            return np.zeros(y.shape, dtype=int)
        if self._values is None:
            index = np.rint(y).astype(int)
            valid = (index >= 0) & (index < self._matrices.shape[0]) & (index == y)
        else:
            index = np.abs(y[..., None] - self._values).argmin(axis=-1)
            valid = self._values[index] == y
        if not np.all(valid):
            raise ValidationException("environment value without a matrix")
        return index

    def __call__(self, y):
        return self._matrices[self.index(y)]


class Innovation:
    """
    I.i.d. innovations epsilon in R^d with their mean norm E|epsilon|.
    """
    def __init__(self, sampler, mean_norm, dimension):
        """
        :param sampler: (rng, (count, d)) -> draws
        """
        if mean_norm < 0:
            raise ValidationException("mean norm must be non-negative")
        self._sampler = sampler
        self.mean_norm = float(mean_norm)
        self.dimension = int(dimension)

    @classmethod
    def gaussian(cls, dimension, scale=1.0):
        if not scale > 0:
            raise ValidationException("innovation scale must be positive")
        return cls(lambda rng, shape: scale * rng.standard_normal(shape),
                   scale * stats.chi(dimension).mean(), dimension)

    def sample(self, rng, count):
        return self._sampler(rng, (count, self.dimension))


def linear_step(x, y, e, model):
    """
    A(y) x + B(y) e for a single state.

    :raises: ValidationException on mismatched dimensions
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    a = np.asarray(model.A(y), dtype=float)
    b = np.asarray(model.B(y), dtype=float)
    if x.shape != (a.shape[1],) or e.shape != (b.shape[1],) or a.shape[0] != b.shape[0]:
        raise ValidationException("dimensions disagree: A {}, x {}, B {}, e {}"
                                  .format(a.shape, x.shape, b.shape, e.shape))
    return a @ x + b @ e


class LinearModel:
    """
    X_{t+1} = A(Y_t) X_t + B(Y_t) epsilon_{t+1} with V(x) = |x|, block drift
    gamma(y_1..y_p) = |||A(y_p)...A(y_1)||| and K = p M^p E|epsilon|.
    """
    def __init__(self, A, B, innovation, env, p, M=1.0):
        """
        :param A: Environment -> d x d matrix map, batched over y
        :param B: Environment -> d x d matrix map, batched over y
        :type innovation: Innovation
        :param p: Block length
        :param M: Bound of |||A(y)|||, |||B(y)||| (at least 1)
        """
        if p < 1:
            raise ValidationException("block length must be >= 1, got {}".format(p))
        self.A = A
        self.B = B
        self.innovation = innovation
        self.env = env
        self.p = int(p)
        self.M = max(float(M), 1.0)
        self.dimension = innovation.dimension
        self.K = max(self.p * self.M ** self.p * innovation.mean_norm, 1.0)
        self.one_step_K = max(self.M * max(innovation.mean_norm, 1.0), 1.0)
        self.base_kernel = RandomKernel(self._update, innovation.sample, StateSpace(self.dimension, vector=True),
                                        name="linear")
        self.drift = DriftSpec(self.V, self.block_gamma, self.K, block_length=self.p, name="linear")
        self.kernel = multistep_wrap(self.base_kernel, self.p, self.drift, self.one_step_K)
        self.stability = None

    def _update(self, y, x, e):
        return _apply(np.asarray(self.A(y)), x) + _apply(np.asarray(self.B(y)), e)

    @staticmethod
    def V(x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def block_product(self, block):
        """
        A(y_p) ... A(y_1) for blocks on the last axis.
        """
        block = np.asarray(block, dtype=float)
        if block.shape[-1] != self.p:
            raise ValidationException("expected an environment block of length {}".format(self.p))
        product = np.broadcast_to(np.eye(self.dimension), block.shape[:-1] + (self.dimension, self.dimension))
        for j in range(self.p):
            product = np.asarray(self.A(block[..., j])) @ product
        return product

    def block_gamma(self, block):
        return _batched_norm(self.block_product(block))

    def constants(self):
        out = {"p": self.p, "M": self.M, "K": self.K, "one_step_K": self.one_step_K,
               "innovation_mean_norm": self.innovation.mean_norm}
        if self.stability is not None:
            out.update(self.stability.as_dict())
        return out


class StabilityEstimate:
    """
    Monte-Carlo estimate of E[ln |||A(Y_p)...A(Y_1)|||] with a mean +- z SE interval.
    """
    CSV_HEADER = ("mean_log_gamma", "stderr", "ci_low", "ci_high", "block_gamma_mean", "block_gamma_max", "pass")

    def __init__(self, mean, stderr, tolerance, gamma_mean, gamma_max):
        self.mean = float(mean)
        self.stderr = float(stderr)
        self.ci_low = self.mean - tolerance * self.stderr
        self.ci_high = self.mean + tolerance * self.stderr
        self.gamma_mean = float(gamma_mean)
        self.gamma_max = float(gamma_max)

    @property
    def passed(self):
        return self.ci_high < 0

    def csv_row(self):
        return self.mean, self.stderr, self.ci_low, self.ci_high, self.gamma_mean, self.gamma_max, self.passed

    def as_dict(self):
        return {"mean_log_gamma": self.mean, "mean_log_gamma_ci": [self.ci_low, self.ci_high],
                "block_gamma_mean": self.gamma_mean, "block_gamma_max": self.gamma_max}


class DifferenceDecay:
    """
    Shared-noise difference norms |X_t^x - X_t^x'| per replication and the
    largest deviation from the matrix-product action |A(Y_{t-1})...A(Y_0)(x - x')|.
    """
    CSV_HEADER = ("t", "mean_difference", "max_difference", "max_product_deviation")

    def __init__(self, norms, deviations):
        self.norms = norms
        self.deviations = deviations

    @property
    def max_deviation(self):
        return float(self.deviations.max())

    def rows(self):
        return [(t, float(self.norms[:, t].mean()), float(self.norms[:, t].max()), float(self.deviations[:, t].max()))
                for t in range(self.norms.shape[1])]


class LinearBuilder:
    logger = logging.getLogger("mcrelab.LinearBuilder")

    def __init__(self, pool=None, tolerance=3.0):
        self._pool = pool or serial_pool()
        self._tolerance = tolerance

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("LinearBuilder: %s", msg)

    def check_probes(self, A, B, probes):
        """
        Bounds and inverse bounds of A(y), B(y) on the probes.

        :return: The largest operator norm seen
        """
        if len(probes) == 0:
            raise ValidationException("probe list must be non-empty")
        largest = 0.0
        for y in probes:
            for name, matrix in (("A", A(y)), ("B", B(y))):
                singular = linalg.svdvals(np.asarray(matrix, dtype=float)) if np.all(np.isfinite(matrix)) else None
                if singular is None:
                    raise ValidationException("{}({}) has non-finite entries".format(name, y))
                if not singular[-1] > 0:
                    raise ValidationException("{}({}) is not invertible".format(name, y))
                largest = max(largest, float(singular[0]))
        return largest

    def stability_estimate(self, model, reps, rng):
        def _body(count, gen):
            blocks = model.env.sample_values(count, model.p, gen)
            return model.block_gamma(blocks)

        gammas = self._pool.map_chunks(_body, reps, as_stream(rng, StreamPurpose.BUILD))
        with np.errstate(divide="ignore"):
            mean, stderr = mean_stderr(np.log(gammas))
        return StabilityEstimate(mean, stderr, self._tolerance, gammas.mean(), gammas.max())

    def build(self, A, B, innovation, env, p, probes, reps, rng):
        """
        :raises: ModelInfeasibleException when the stability interval lies above 0,
                 InconclusiveStabilityException when it contains 0
        :rtype: LinearModel
        """
        M = self.check_probes(A, B, probes)
        model = LinearModel(A, B, innovation, env, p, M)
        estimate = self.stability_estimate(model, reps, rng)
        model.stability = estimate
        self._log("p={}, E ln gamma = {:.6g} in [{:.6g}, {:.6g}]".format(
            p, estimate.mean, estimate.ci_low, estimate.ci_high))
        if estimate.ci_low > 0:
            raise ModelInfeasibleException(Assumption.STABILITY,
                                           "E ln |||A(Y_p)...A(Y_1)||| is positive: [{:.6g}, {:.6g}]"
                                           .format(estimate.ci_low, estimate.ci_high))
        if not estimate.passed:
            raise InconclusiveStabilityException("stability interval [{:.6g}, {:.6g}] contains 0"
                                                 .format(estimate.ci_low, estimate.ci_high),
                                                 estimate.ci_low, estimate.ci_high)
        return model


def linear_build(A, B, innovation, env, p, probes, reps, rng, tolerance=3.0, pool=None):
    return LinearBuilder(pool, tolerance).build(A, B, innovation, env, p, probes, reps, rng)


def difference_decay(model, x1, x2, steps, reps, rng, pool=None):
    """
    Run both starts with shared environment and innovations for steps one-step
    transitions.

    :type model: LinearModel
    :rtype: DifferenceDecay
    """
    pool = pool or serial_pool()
    kernel = model.base_kernel
    space = kernel.state_space

    def _body(count, gen):
        cursor = model.env.cursor(count, gen)
        a = space.batch(x1, count)
        b = space.batch(x2, count)
        diff = a - b
        norms = np.empty((count, steps + 1))
        deviations = np.zeros((count, steps + 1))
        norms[:, 0] = np.linalg.norm(diff, axis=1)
        for t in range(1, steps + 1):
            y = cursor.advance()
            u = kernel.sample_noise(gen, count)
            a = kernel.apply(y, a, u)
            b = kernel.apply(y, b, u)
            diff = _apply(np.asarray(model.A(y)), diff)
            norms[:, t] = np.linalg.norm(a - b, axis=1)
            deviations[:, t] = np.linalg.norm((a - b) - diff, axis=1)
        return norms, deviations

    norms, deviations = pool.map_chunks(_body, reps, as_stream(rng, StreamPurpose.CONTRACT))
    return DifferenceDecay(norms, deviations)
