__all__ = ["lindley_step", "QueueKernel", "QueueModel", "QueueBuilder", "find_alpha_bar", "queue_gamma", "queue_build"]

import logging

import numpy as np

from mcrelab.interface import Assumption, ValidationException, NumericException, ModelInfeasibleException, \
    ContractivityViolation
from mcrelab.parallel.pool import serial_pool
from mcrelab.parallel.streams import RandomStream, StreamPurpose, as_stream, as_generator
from mcrelab.mcre.kernel import RandomKernel, StateSpace
from mcrelab.mcre.spec import DriftSpec, MinorSpec, choose_epsilon, small_set_radius
from mcrelab.mcre.estimate import mean_stderr
from mcrelab.mcre.verify import AssumptionVerifier
from mcrelab.coupling.strategy import SynchronousNoise, SplitMinorization


def lindley_step(w, y, e):
    """
    W' = (W + Y - epsilon)_+

    :raises: ValidationException on negative inputs
    """
    w, y, e = (np.asarray(v, dtype=float) for v in (w, y, e))
    if np.any(w < 0) or np.any(y < 0) or np.any(e < 0):
        raise ValidationException("waiting time, service and inter-arrival must be non-negative")
    result = np.maximum(w + y - e, 0.0)
    return float(result) if result.ndim == 0 else result


class QueueKernel(RandomKernel):
    """
    Lindley kernel: random map w' = (w + y - epsilon)_+ with epsilon the noise.

    The one-step law is an atom at 0 of mass P(epsilon >= w + y) plus, for
    continuous inter-arrivals, the density f(w + y - w') on w' > 0.
    """
    def __init__(self, interarrival):
        """
        :type interarrival: mcrelab.models.interarrival.InterArrival
        """
        self._interarrival = interarrival
        super(QueueKernel, self).__init__(
            lambda y, w, e: np.maximum(w + y - e, 0.0),
            interarrival.sample,
            StateSpace(1),
            name="lindley")

    @property
    def interarrival(self):
        return self._interarrival

    def atom(self, y, w):
        return self._interarrival.tail(np.asarray(w) + np.asarray(y))

    def continuous_density(self, y, w, w_next):
        w_next = np.asarray(w_next, dtype=float)
        return np.where(w_next > 0, self._interarrival.pdf(w + y - w_next), 0.0)


def queue_gamma(interarrival, alpha_bar, y, reps=100000, rng=None):
    """
    gamma(y) = E[e^{alpha_bar (y - epsilon)}] = e^{alpha_bar y} E[e^{-alpha_bar epsilon}].

    Closed form when the inter-arrival law provides its moment generating
    function at -alpha_bar, Monte Carlo otherwise (logged).
    """
    log_mgf = interarrival.log_mgf(-alpha_bar)
    if log_mgf is None:
        gen = as_generator(rng if rng is not None else RandomStream(0, StreamPurpose.BUILD))
        samples = np.exp(-alpha_bar * interarrival.sample(gen, reps))
        log_mgf = float(np.log(samples.mean()))
        QueueBuilder.logger.warning("no closed-form MGF for %r at %.6g, using Monte Carlo over %d draws",
                                    interarrival, -alpha_bar, reps)
    return np.exp(alpha_bar * np.asarray(y, dtype=float) + log_mgf)


class QueueModel:
    """
    Lindley queue with a bounded stationary service process and i.i.d. inter-arrivals,
    with the drift and minorization constants derived from the Lyapunov exponent alpha_bar.
    """
    def __init__(self, env, interarrival, M, alpha_bar, gamma_bar, gamma_bar_ci, theta=0.5):
        """
        :type env: mcrelab.env.process.EnvProcess
        :type interarrival: mcrelab.models.interarrival.InterArrival
        :param M: Bound of the service times
        :param alpha_bar: Lyapunov exponent
        :param gamma_bar: Certified long-time contractivity constant, < 1
        :param gamma_bar_ci: Its confidence interval
        """
        if not alpha_bar > 0:
            raise ValidationException("alpha_bar must be positive")
        self.env = env
        self.interarrival = interarrival
        self.M = float(M)
        self.alpha_bar = float(alpha_bar)
        self.gamma_bar = float(gamma_bar)
        self.gamma_bar_ci = tuple(gamma_bar_ci)
        self.kernel = QueueKernel(interarrival)
        self.alpha_table = None
        self.gamma_curve = None

        self._log_mgf = float(np.log(queue_gamma(interarrival, self.alpha_bar, 0.0)))
        self.drift = DriftSpec(self.V, self.gamma, np.exp(self.alpha_bar * self.M), name="queue")
        self.epsilon = choose_epsilon(self.gamma_bar)
        self.tau = self.M + 4.0 / (1.0 / np.sqrt(self.gamma_bar) - 1.0)
        self.log_one_minus_alpha = float(interarrival.log_tail(self.tau))
        if not np.isfinite(self.log_one_minus_alpha):
            raise ModelInfeasibleException(Assumption.MINORIZATION,
                                           "P(epsilon >= tau) = 0 for tau={:.6g}".format(self.tau))
        self.minor = MinorSpec(self.epsilon, self._constant_alpha, self.kappa, self.gamma_bar, theta,
                               log_mass=lambda y: np.full(np.shape(y), self.log_one_minus_alpha))

    def V(self, w):
        return np.expm1(self.alpha_bar * np.asarray(w, dtype=float))

    def gamma(self, y):
        return np.exp(self.alpha_bar * np.asarray(y, dtype=float) + self._log_mgf)

    @property
    def K(self):
        return float(np.exp(self.alpha_bar * self.M))

    def _constant_alpha(self, y):
        return np.full(np.shape(y), -np.expm1(self.log_one_minus_alpha))

    @staticmethod
    def kappa(y, rng, count):
        return np.zeros(count)

    def radius(self, y):
        return small_set_radius(self.drift, self.epsilon, y)

    def small_set_level(self, y):
        """
        Largest waiting time of the small set: V^-1(R(y)).
        """
        return np.log1p(self.radius(y)) / self.alpha_bar

    def split_alpha(self, y):
        """
        Tight split constant on the small set: alpha(y) = P(epsilon < w_R(y) + y).
        """
        return -np.expm1(self.interarrival.log_tail(self.small_set_level(y) + np.asarray(y, dtype=float)))

    def _residual(self, y, w, u):
        alpha = self.split_alpha(y)
        atom = self.interarrival.tail(w + y)
        if np.any(atom < 1.0 - alpha - 1e-12):
            raise NumericException("the atom at 0 is lighter than the minorizing mass", w)
        reduced = np.clip((atom - (1.0 - alpha)) / alpha, 0.0, 1.0)
        # continuous part: epsilon = F^-1((u - reduced) alpha) on {epsilon < w + y}
        e = self.interarrival.ppf(np.clip((u - reduced) * alpha, 0.0, None))
        return np.where(u < reduced, 0.0, np.maximum(w + y - e, 0.0))

    def synchronous_strategy(self):
        return SynchronousNoise()

    def split_strategy(self):
        """
        SplitMinorization on the small set with kappa = delta_0 and the tight alpha(y).
        """
        def _small_set(y, w1, w2):
            level = self.small_set_level(y)
            return (w1 <= level) & (w2 <= level)

        return SplitMinorization(self.split_alpha, self.kappa, self._residual, _small_set)

    def constants(self, env_values=None):
        """
        Closed-form constants echoed into run reports.

        :rtype: dict
        """
        out = {
            "alpha_bar": self.alpha_bar,
            "gamma_bar": self.gamma_bar,
            "gamma_bar_ci": list(self.gamma_bar_ci),
            "epsilon": self.epsilon,
            "K": self.K,
            "M": self.M,
            "tau": self.tau,
            "log_one_minus_alpha": self.log_one_minus_alpha,
            "alpha": float(-np.expm1(self.log_one_minus_alpha)),
        }
        if env_values is not None:
            radii = self.radius(np.asarray(env_values, dtype=float))
            split = self.split_alpha(np.asarray(env_values, dtype=float))
            out.update(R_min=float(np.min(radii)), R_max=float(np.max(radii)),
                       split_alpha_min=float(np.min(split)), split_alpha_max=float(np.max(split)))
        return out


class QueueBuilder:
    """
    Derives the queue constants: service bound and stability pre-checks, the
    Lyapunov exponent alpha_bar, then gamma_bar, epsilon and tau.
    """
    logger = logging.getLogger("mcrelab.QueueBuilder")

    def __init__(self, pool=None, tolerance=3.0):
        self._pool = pool or serial_pool()
        self._tolerance = float(tolerance)

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("QueueBuilder: %s", msg)

    def check_service(self, env, interarrival, M, horizon, reps, rng):
        """
        0 <= Y <= M on sampled paths and E[Y] < E[epsilon] with tolerance standard errors.

        :return: Per-replication path means of the service process
        """
        values = self._pool.map_chunks(lambda count, gen: env.sample_values(count, horizon, gen), reps,
                                       as_stream(rng, StreamPurpose.BUILD))
        if np.any(values < 0) or np.any(values > M):
            raise ModelInfeasibleException(Assumption.SERVICE_BOUND,
                                           "service values leave [0, {}]: min {:.6g}, max {:.6g}"
                                           .format(M, float(values.min()), float(values.max())))
        mean, stderr = mean_stderr(values.mean(axis=1))
        if not mean + self._tolerance * stderr < interarrival.mean:
            raise ModelInfeasibleException(Assumption.LONG_TIME_CONTRACTIVITY,
                                           "mean service {:.6g} (+{}SE) is not below mean inter-arrival {:.6g}"
                                           .format(float(mean), self._tolerance, interarrival.mean))
        return values

    def find_alpha_bar(self, env, interarrival, alpha_grid, horizon, reps, rng):
        """
        Largest grid alpha with an upper bound of
        lambda_n(alpha) = (1/n) ln E[e^{alpha sum_j (Y_{j-1} - epsilon_j)}] below 0, halved once.

        :return: alpha_bar and the (alpha, lambda_n estimate, upper bound) table
        :rtype: (float, list[tuple])
        """
        stream = as_stream(rng, StreamPurpose.BUILD)
        values = self.check_service(env, interarrival, np.inf, horizon, reps, stream.child(0))
        sums = values.sum(axis=1)

        table = []
        passing = []
        for i, alpha in enumerate(sorted(float(a) for a in alpha_grid)):
            if not alpha > 0:
                raise ValidationException("alpha grid must be positive")
            log_mgf = interarrival.log_mgf(-alpha)
            if log_mgf is None:
                gen = stream.child(1).child(i).generator()
                terms = alpha * (sums - interarrival.sample(gen, (reps, horizon)).sum(axis=1))
                arrivals = 0.0
            else:
                terms = alpha * sums
                arrivals = log_mgf
            shift = terms.max()
            m, s = mean_stderr(np.exp(terms - shift))
            estimate = (shift + np.log(m)) / horizon + arrivals
            upper = (shift + np.log(m + self._tolerance * s)) / horizon + arrivals
            table.append((alpha, float(estimate), float(upper)))
            if upper < 0:
                passing.append(alpha)
            self._log("lambda_{}({:.4g}) = {:.6g} (upper {:.6g})".format(horizon, alpha, estimate, upper))

        if not passing:
            raise ModelInfeasibleException(Assumption.LONG_TIME_CONTRACTIVITY,
                                           "no grid exponent gives a negative growth rate")
        return max(passing) / 2.0, table

    def build(self, env, interarrival, M, alpha_grid, horizon, reps, rng, gamma_grid=None, theta=0.5):
        """
        :rtype: QueueModel
        """
        stream = as_stream(rng, StreamPurpose.BUILD)
        self.check_service(env, interarrival, M, horizon, reps, stream.child(0))
        alpha_bar, table = self.find_alpha_bar(env, interarrival, alpha_grid, horizon, reps, stream.child(1))

        log_mgf = float(np.log(queue_gamma(interarrival, alpha_bar, 0.0)))
        drift = DriftSpec(lambda w: np.expm1(alpha_bar * w), lambda y: np.exp(alpha_bar * y + log_mgf),
                          np.exp(alpha_bar * M))
        curve = AssumptionVerifier(self._pool).gamma_bar_curve(env, drift, gamma_grid or [horizon], reps,
                                                               stream.child(2))
        if not curve.passed:
            raise ContractivityViolation("gamma_bar upper bound {:.6g} is not below 1 at alpha_bar={:.6g}"
                                         .format(curve.ci[1], alpha_bar))
        model = QueueModel(env, interarrival, M, alpha_bar, curve.ci[1], curve.ci, theta)
        model.alpha_table = table
        model.gamma_curve = curve
        self._log("alpha_bar={:.6g}, gamma_bar={:.6g}, tau={:.6g}".format(alpha_bar, model.gamma_bar, model.tau))
        return model


def find_alpha_bar(env, interarrival, alpha_grid, horizon, reps, rng, pool=None):
    return QueueBuilder(pool).find_alpha_bar(env, interarrival, alpha_grid, horizon, reps, rng)[0]


def queue_build(env, interarrival, M, alpha_grid, horizon, reps, rng, gamma_grid=None, theta=0.5, pool=None):
    return QueueBuilder(pool).build(env, interarrival, M, alpha_grid, horizon, reps, rng, gamma_grid, theta)
