__all__ = ["QuadraticGradient", "LogisticGradient", "SgldModel", "SgldBuilder", "sgld_step", "sgld_build"]

import logging

import numpy as np
from scipy.special import expit, gammaln

from mcrelab.interface import Assumption, ValidationException, NumericException, ModelInfeasibleException, \
    LambdaTooLargeException
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import StreamPurpose, as_stream
from mcrelab.mcre.kernel import GaussianKernel
from mcrelab.mcre.spec import DriftSpec, MinorSpec, choose_epsilon, small_set_radius
from mcrelab.mcre.verify import AssumptionVerifier


def _column(y, count):
    y = np.asarray(y, dtype=float)
    return np.broadcast_to(y, (count,))[:, None]


class QuadraticGradient:
    """
    H(theta, y) = Delta(y) theta + g(y) 1, with target the Gaussian of mean
    -E g / E Delta and variance 1 / (2 E Delta) in every coordinate.
    """
    name = "quadratic"

    def __init__(self, delta, g=0.0, dimension=1):
        """
        :param delta: Delta(y) > 0, callable or constant
        :param g: g(y), callable or constant
        :type dimension: int
        """
        self._delta = delta if callable(delta) else (lambda y, c=float(delta): np.full(np.shape(y), c))
        self._g = g if callable(g) else (lambda y, c=float(g): np.full(np.shape(y), c))
        self._zero_g = not callable(g) and float(g) == 0.0
        self.dimension = int(dimension)

    def delta(self, y):
        return np.asarray(self._delta(y), dtype=float)

    def g(self, y):
        return np.asarray(self._g(y), dtype=float)

    def __call__(self, theta, y):
        theta = np.asarray(theta, dtype=float)
        count = theta.shape[0]
        return _column(self.delta(y), count) * theta + _column(self.g(y), count)

    def dissipativity(self, y_values):
        """
        :return: Delta(.) and b with <H(theta, y), theta> >= Delta(y)|theta|^2 - b
        """
        if self._zero_g:
            return self.delta, 0.0
        y_values = np.asarray(y_values, dtype=float)
        b = float(np.max(self.g(y_values) ** 2 * self.dimension / (2.0 * self.delta(y_values))))
        return (lambda y: self.delta(y) / 2.0), b

    def growth(self, y_values):
        """
        :return: (K1, K2, K3) with |H(theta, y)| <= K1|theta| + K2|y| + K3
        """
        y_values = np.asarray(y_values, dtype=float)
        return (float(np.max(np.abs(self.delta(y_values)))), 0.0,
                float(np.max(np.abs(self.g(y_values)))) * np.sqrt(self.dimension))

    def target(self, env_values, weights=None):
        """
        :param weights: Probabilities of the env values, uniform when omitted
        :return: Mean and per-coordinate variance of the target law
        """
        env_values = np.asarray(env_values, dtype=float)
        mean_delta = float(np.average(self.delta(env_values), weights=weights))
        return -float(np.average(self.g(env_values), weights=weights)) / mean_delta, 1.0 / (2.0 * mean_delta)


class LogisticGradient:
    """
    Ridge-regularized logistic loss on a scalar data stream:
    H(theta, y) = rho theta - y sigmoid(-y sum(theta)) 1.
    """
    name = "logistic"

    def __init__(self, rho, dimension=1):
        if not rho > 0:
            raise ValidationException("rho must be positive")
        self.rho = float(rho)
        self.dimension = int(dimension)

    def __call__(self, theta, y):
        theta = np.asarray(theta, dtype=float)
        y = _column(y, theta.shape[0])
        margin = y * theta.sum(axis=1, keepdims=True)
        return self.rho * theta - y * expit(-margin)

    def dissipativity(self, y_values):
        bound = float(np.max(np.abs(np.asarray(y_values, dtype=float))))
        half = self.rho / 2.0
        return (lambda y: np.full(np.shape(y), half)), self.dimension * bound ** 2 / (2.0 * self.rho)

    def growth(self, y_values):
        return self.rho, float(np.sqrt(self.dimension)), 0.0


def sgld_step(theta, y, xi, lam, H):
    """
    theta' = theta - lam H(theta, y) + sqrt(lam) xi

    :param H: Gradient oracle on batches, (theta, y) -> values
    :raises: NumericException when H is not finite
    """
    if not lam > 0:
        raise ValidationException("step size must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    grad = np.asarray(H(theta[None], y), dtype=float)[0]
    if not np.all(np.isfinite(grad)):
        raise NumericException("gradient is not finite", {"theta": theta, "y": y})
    return theta - lam * grad + np.sqrt(lam) * xi


class SgldModel:
    """
    Constant-step SGLD theta' = theta - lam H(theta, Y) + sqrt(lam) xi on stationary data Y,
    with the drift constants V(theta) = |theta|^2,
    gamma(y) = 1 + 3 lam^2 K1^2 - 2 lam Delta(y) and
    K(y) = max(lam (d + 2b) + 3 lam^2 K3^2 + 3 lam^2 K2^2 |y|^2, 1).
    """
    def __init__(self, lam, gradient, env, delta, b, growth, M):
        """
        :param lam: Step size
        :param gradient: Gradient oracle with a dimension attribute
        :param delta: Dissipativity rate Delta(y)
        :param b: Dissipativity offset
        :param growth: (K1, K2, K3)
        :param M: Bound of |Y|
        """
        if not lam > 0:
            raise ValidationException("step size must be positive")
        self.lam = float(lam)
        self.gradient = gradient
        self.env = env
        self.d = gradient.dimension
        self.delta = delta
        self.b = float(b)
        self.K1, self.K2, self.K3 = (float(k) for k in growth)
        self.M = float(M)
        self.kernel = GaussianKernel(self.mean, self.lam, self.d, name="sgld")
        self.drift = DriftSpec(self.V, self.gamma, self.K, name="sgld")
        self.gamma_bar = None
        self.gamma_bar_ci = None
        self.gamma_curve = None
        self.epsilon = None
        self.minor = None

    def mean(self, y, theta):
        grad = self.gradient(theta, y)
        if not np.all(np.isfinite(grad)):
            raise NumericException("gradient is not finite", {"y": y})
        return theta - self.lam * grad

    @staticmethod
    def V(theta):
        theta = np.asarray(theta, dtype=float)
        return np.sum(theta * theta, axis=-1)

    def gamma(self, y):
        return 1.0 + 3.0 * self.lam ** 2 * self.K1 ** 2 - 2.0 * self.lam * np.asarray(self.delta(y), dtype=float)

    def raw_K(self, y):
        y = np.asarray(y, dtype=float)
        lam2 = self.lam ** 2
        return self.lam * (self.d + 2.0 * self.b) + 3.0 * lam2 * self.K3 ** 2 + 3.0 * lam2 * self.K2 ** 2 * y * y

    def K(self, y):
        return np.maximum(self.raw_K(y), 1.0)

    def certify(self, gamma_bar, gamma_bar_ci, env_values, theta=0.5):
        """
        Attach gamma_bar and the minorization constants: the small set is the ball
        of radius sqrt(R(y)), kappa is uniform on the ball of radius sqrt(min R) and
        log(1 - alpha) = log Leb(C) - (d/2) log(2 pi lam) - (2 + lam K1)^2 max R / lam
        - lam (K2 M + K3)^2.
        """
        self.gamma_bar = float(gamma_bar)
        self.gamma_bar_ci = tuple(gamma_bar_ci)
        self.epsilon = choose_epsilon(self.gamma_bar)
        radii = np.atleast_1d(small_set_radius(self.drift, self.epsilon, np.asarray(env_values, dtype=float)))
        self.R_min = float(radii.min())
        self.R_max = float(radii.max())
        d = self.d
        log_leb = 0.5 * d * np.log(np.pi) + 0.5 * d * np.log(self.R_min) - gammaln(0.5 * d + 1.0)
        self.log_one_minus_alpha = float(
            log_leb - 0.5 * d * np.log(2.0 * np.pi * self.lam)
            - (2.0 + self.lam * self.K1) ** 2 * self.R_max / self.lam
            - self.lam * (self.K2 * self.M + self.K3) ** 2)
        # the bound is a probability mass; clip to log 1 on tiny lam-free instances
        self.log_one_minus_alpha = min(self.log_one_minus_alpha, 0.0)
        log_mass = self.log_one_minus_alpha
        self.minor = MinorSpec(self.epsilon, lambda y: np.full(np.shape(y), -np.expm1(log_mass)), self.kappa,
                               self.gamma_bar, theta, log_mass=lambda y: np.full(np.shape(y), log_mass))
        return self

    def kappa(self, y, rng, count):
        """
        Uniform draws on the ball of radius sqrt(R_min).
        """
        direction = rng.standard_normal((count, self.d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = np.sqrt(self.R_min) * rng.random(count) ** (1.0 / self.d)
        return direction * radius[:, None]

    def constants(self):
        return {
            "lambda": self.lam, "d": self.d, "b": self.b, "K1": self.K1, "K2": self.K2, "K3": self.K3,
            "M": self.M, "gamma_bar": self.gamma_bar,
            "gamma_bar_ci": None if self.gamma_bar_ci is None else list(self.gamma_bar_ci),
            "epsilon": self.epsilon, "R_min": getattr(self, "R_min", None), "R_max": getattr(self, "R_max", None),
            "log_one_minus_alpha": getattr(self, "log_one_minus_alpha", None),
        }


class SgldBuilder:
    """
    Checks dissipativity and growth on probe grids, fills the drift constants
    and certifies gamma_bar < 1.
    """
    logger = logging.getLogger("mcrelab.SgldBuilder")

    RELATIVE_TOLERANCE = 1e-12

    def __init__(self, pool=None):
        self._pool = pool or serial_pool()

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("SgldBuilder: %s", msg)

    def check_probes(self, gradient, delta, b, growth, theta_probes, y_probes):
        K1, K2, K3 = growth
        for y in y_probes:
            grad = np.asarray(gradient(theta_probes, y), dtype=float)
            if not np.all(np.isfinite(grad)):
                raise NumericException("gradient is not finite", {"y": y})
            sq = np.sum(theta_probes * theta_probes, axis=1)
            inner = np.sum(grad * theta_probes, axis=1)
            lower = float(delta(np.asarray(y, dtype=float))) * sq - b
            slack = self.RELATIVE_TOLERANCE * (1.0 + np.abs(lower))
            if np.any(inner < lower - slack):
                raise ModelInfeasibleException(Assumption.DISSIPATIVITY,
                                               "<H(theta, y), theta> >= Delta(y)|theta|^2 - b fails at y={}".format(y))
            upper = K1 * np.sqrt(sq) + K2 * abs(float(y)) + K3
            if np.any(np.linalg.norm(grad, axis=1) > upper + self.RELATIVE_TOLERANCE * (1.0 + upper)):
                raise ModelInfeasibleException(Assumption.GROWTH,
                                               "|H(theta, y)| <= K1|theta| + K2|y| + K3 fails at y={}".format(y))

    def build(self, lam, gradient, env, theta_probes, y_probes, n_grid, reps, rng, M=None, growth=None,
              theta=0.5):
        """
        :param theta_probes: Probe parameters, shape (k, d)
        :param y_probes: Probe data values
        :param growth: Optional (K1, K2, K3) overriding the oracle's constants
        :rtype: SgldModel
        """
        theta_probes = np.atleast_2d(np.asarray(theta_probes, dtype=float))
        y_probes = np.atleast_1d(np.asarray(y_probes, dtype=float))
        if theta_probes.size == 0 or y_probes.size == 0:
            raise ValidationException("probe grids must be non-empty")
        if theta_probes.shape[1] != gradient.dimension:
            raise ValidationException("probe dimension {} does not match d={}"
                                      .format(theta_probes.shape[1], gradient.dimension))

        delta, b = gradient.dissipativity(y_probes)
        growth = tuple(growth) if growth is not None else gradient.growth(y_probes)
        self.check_probes(gradient, delta, b, growth, theta_probes, y_probes)
        if M is None:
            M = float(np.max(np.abs(y_probes)))

        model = SgldModel(lam, gradient, env, delta, b, growth, M)
        gammas = model.gamma(y_probes)
        if np.any(gammas <= 0):
            raise LambdaTooLargeException(Assumption.DRIFT,
                                          "gamma(y) <= 0 at y={} for lambda={}"
                                          .format(float(y_probes[np.argmax(gammas <= 0)]), lam))

        stream = as_stream(rng, StreamPurpose.BUILD)
        curve = AssumptionVerifier(self._pool).gamma_bar_curve(env, model.drift, n_grid, reps, stream.child(0))
        model.gamma_curve = curve
        if not curve.passed:
            raise LambdaTooLargeException(Assumption.LONG_TIME_CONTRACTIVITY,
                                          "gamma_bar upper bound {:.6g} is not below 1 for lambda={}"
                                          .format(curve.ci[1], lam))
        env_values = self._pool.map_chunks(lambda count, gen: env.sample_values(count, 1, gen)[:, 0], reps,
                                           stream.child(1))
        model.certify(curve.ci[1], curve.ci, env_values, theta)
        self._log("lambda={}, gamma_bar={:.6g}, log(1-alpha)={:.6g}".format(
            lam, model.gamma_bar, model.log_one_minus_alpha))
        return model


def sgld_build(lam, gradient, env, theta_probes, y_probes, n_grid, reps, rng, M=None, growth=None, theta=0.5,
               pool=None):
    return SgldBuilder(pool).build(lam, gradient, env, theta_probes, y_probes, n_grid, reps, rng, M, growth, theta)
