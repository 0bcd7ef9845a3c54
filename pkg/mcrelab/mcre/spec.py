__all__ = ["DriftSpec", "MinorSpec", "small_set_radius", "choose_epsilon"]

import numpy as np

from mcrelab.interface import ValidationException, ContractivityViolation


def _as_map(value):
    if callable(value):
        return value
    constant = float(value)
    return lambda y: np.full(np.shape(y), constant)


class DriftSpec:
    """
    Certified drift data [Q(y)V](x) <= gamma(y) V(x) + K(y).

    For a block drift (block_length p > 1) gamma and K take blocks (y_1, ..., y_p)
    on the last axis instead of single values.
    """
    def __init__(self, V, gamma, K, block_length=1, name="drift"):
        """
        :param V: Lyapunov function on batches of states, values >= 0
        :type V: (numpy.ndarray) -> numpy.ndarray
        :param gamma: Contraction factor, positive; a callable of y or a constant
        :param K: Additive constant, >= 1; a callable of y or a constant
        :type block_length: int
        :type name: str
        """
        if block_length < 1:
            raise ValidationException("block length must be >= 1")
        self._V = V
        self._block_length = int(block_length)
        if self._block_length == 1:
            self._gamma = _as_map(gamma)
            self._K = _as_map(K)
        else:
            # block maps reduce the last axis
            self._gamma = gamma if callable(gamma) else (lambda y, c=float(gamma): np.full(np.shape(y)[:-1], c))
            self._K = K if callable(K) else (lambda y, c=float(K): np.full(np.shape(y)[:-1], c))
        self._name = name

    @property
    def block_length(self):
        return self._block_length

    @property
    def name(self):
        return self._name

    def V(self, x):
        values = np.asarray(self._V(x), dtype=float)
        if np.any(values < 0):
            raise ValidationException("Lyapunov function must be non-negative")
        return values

    def gamma(self, y):
        values = np.asarray(self._gamma(y), dtype=float)
        if np.any(values <= 0):
            raise ValidationException("gamma(y) must be positive")
        return values

    def K(self, y):
        return np.asarray(self._K(y), dtype=float)

    def check_K(self, y):
        """
        :raises: ValidationException unless K(y) >= 1 at every given y
        """
        values = self.K(y)
        if np.any(values < 1):
            raise ValidationException("K(y) must be >= 1, got {}".format(float(np.min(values))))
        return values

    def bound(self, y, x, state_space):
        """
        gamma(y) V(x) + K(y) at a single (y, x).
        """
        v = self.V(state_space.batch(x, 1))[0]
        y = np.asarray(y, dtype=float)[None, ...]
        return float(self.gamma(y)[0] * v + self.K(y)[0])


class MinorSpec:
    """
    Minorization data: Q(y, x, .) >= (1 - alpha(y)) kappa(y, .) on the small set
    V^-1([0, R(y)]) with R(y) = 2 K(y) / (epsilon gamma(y)).
    """
    def __init__(self, epsilon, alpha, kappa=None, gamma_bar=None, theta=0.5, log_mass=None):
        """
        :param epsilon: Small-set scale, 0 < epsilon < 1/sqrt(gamma_bar) - 1
        :param alpha: alpha(y) in [0, 1); a callable or a constant
        :param kappa: Sampler of the minorizing law, (y, rng, count) -> states
        :param gamma_bar: Certified long-time contractivity estimate
        :param theta: Smallness exponent in (0, 1)
        :param log_mass: Optional log(1 - alpha(y)), for masses below double precision
        """
        if not epsilon > 0:
            raise ValidationException("epsilon must be positive, got {}".format(epsilon))
        if not 0 < theta < 1:
            raise ValidationException("theta must lie in (0, 1), got {}".format(theta))
        if gamma_bar is not None:
            if not 0 < gamma_bar < 1:
                raise ValidationException("gamma_bar must lie in (0, 1), got {}".format(gamma_bar))
            if not epsilon < 1.0 / np.sqrt(gamma_bar) - 1.0:
                raise ValidationException("epsilon={} violates epsilon < 1/sqrt(gamma_bar) - 1".format(epsilon))
        self._epsilon = float(epsilon)
        self._alpha = _as_map(alpha)
        self._constant_alpha = None if callable(alpha) else float(alpha)
        self._kappa = kappa
        self._gamma_bar = gamma_bar
        self._theta = float(theta)
        self._log_mass = log_mass

    @property
    def epsilon(self):
        return self._epsilon

    @property
    def theta(self):
        return self._theta

    @property
    def gamma_bar(self):
        return self._gamma_bar

    @property
    def kappa(self):
        return self._kappa

    @property
    def constant_alpha(self):
        """
        :return: The alpha value when alpha was declared constant, else None
        :rtype: float | None
        """
        return self._constant_alpha

    def alpha(self, y):
        values = np.asarray(self._alpha(y), dtype=float)
        if np.any(values < 0) or np.any(values >= 1) or not np.all(np.isfinite(values)):
            raise ValidationException("alpha(y) must lie in [0, 1)")
        return values

    def log_mass(self, y):
        """
        :return: log(1 - alpha(y))
        """
        if self._log_mass is not None:
            return np.asarray(self._log_mass(y), dtype=float)
        return np.log1p(-self.alpha(y))

    def radius(self, drift, y):
        return small_set_radius(drift, self._epsilon, y)


def small_set_radius(drift, epsilon, y):
    """
    R(y) = 2 K(y) / (epsilon gamma(y)).

    :type drift: DriftSpec
    :type epsilon: float
    :param y: Environment value or array of values
    """
    if not epsilon > 0:
        raise ValidationException("epsilon must be positive, got {}".format(epsilon))
    y = np.asarray(y, dtype=float)
    radius = 2.0 * drift.K(y) / (epsilon * drift.gamma(y))
    return float(radius) if radius.ndim == 0 else radius


def choose_epsilon(gamma_bar):
    """
    Midpoint choice epsilon = (1/sqrt(gamma_bar) - 1) / 2.

    :type gamma_bar: float
    :rtype: float
    :raises: ContractivityViolation if gamma_bar >= 1
    """
    if not gamma_bar < 1:
        raise ContractivityViolation("gamma_bar={} is not below 1".format(gamma_bar))
    if not gamma_bar > 0:
        raise ValidationException("gamma_bar must be positive, got {}".format(gamma_bar))
    return (1.0 / np.sqrt(gamma_bar) - 1.0) / 2.0
