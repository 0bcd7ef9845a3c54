__all__ = [
    "EnvProcess", "IidEnv", "FiniteMarkovEnv", "MovingAverageEnv", "EnvCursor",
    "EnvPath", "sample_path", "shift", "invariant_law", "is_primitive",
]

import logging

import numpy as np
from scipy.sparse.csgraph import connected_components

from mcrelab.interface import ValidationException, WindowRangeException, NumericException
from mcrelab.parallel.streams import as_generator


class EnvCursor:
    """
    Walks count independent stationary environment paths forward one time step at a time.
    """
    def __init__(self, count, advance):
        """
        :type count: int
        :param advance: Returns the values of the next time step, shape (count,)
        :type advance: () -> numpy.ndarray
        """
        self._count = count
        self._advance = advance
        self._t = 0

    @property
    def count(self):
        return self._count

    @property
    def time(self):
        """
        :return: Number of steps already drawn
        :rtype: int
        """
        return self._t

    def advance(self):
        values = self._advance()
        self._t += 1
        return values

    def take(self, length):
        """
        :return: The next length values of every path, shape (count, length)
        :rtype: numpy.ndarray
        """
        if length <= 0:
            return np.empty((self._count, 0))
        return np.stack([self.advance() for _ in range(length)], axis=1)


class EnvProcess:
    """
    Strictly stationary environment Y_t with real values.

    Subclasses provide cursor(); sampling a window is the same for every variant.
    """
    logger = logging.getLogger("mcrelab.EnvProcess")

    name = "environment"

    def cursor(self, count, rng):
        """
        :type count: int
        :type rng: numpy.random.Generator
        :rtype: EnvCursor
        """
        raise NotImplementedError()

    def sample_values(self, count, length, rng):
        """
        :return: count independent stationary windows of the given length, shape (count, length)
        :rtype: numpy.ndarray
        """
        return self.cursor(count, as_generator(rng)).take(length)

    def value_bounds(self):
        """
        :return: (lower, upper) bounds of the values when known, else None
        :rtype: (float, float) | None
        """
        return None


class IidEnv(EnvProcess):
    name = "iid"

    def __init__(self, sampler, bounds=None, support=None):
        """
        :param sampler: Marginal sampler, (rng, size) -> values
        :type sampler: (numpy.random.Generator, int) -> numpy.ndarray
        :param bounds: Known (lower, upper) bounds of the marginal
        :param support: Finite support with probabilities, when the marginal is discrete
        :type support: (numpy.ndarray, numpy.ndarray) | None
        """
        self._sampler = sampler
        self._bounds = bounds
        self._support = support

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda rng, size: np.full(size, value), bounds=(value, value),
                   support=(np.array([value]), np.array([1.0])))

    @classmethod
    def discrete(cls, values, probabilities):
        values = np.asarray(values, dtype=float)
        probabilities = np.asarray(probabilities, dtype=float)
        if values.shape != probabilities.shape or values.ndim != 1:
            raise ValidationException("values and probabilities must be 1-d of equal length")
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-12:
            raise ValidationException("probabilities must be non-negative and sum to 1")
        return cls(lambda rng, size: rng.choice(values, size=size, p=probabilities),
                   bounds=(float(values.min()), float(values.max())), support=(values, probabilities))

    @classmethod
    def uniform(cls, low, high):
        if not low <= high:
            raise ValidationException("uniform environment requires low <= high")
        return cls(lambda rng, size: rng.uniform(low, high, size=size), bounds=(float(low), float(high)))

    @property
    def support(self):
        return self._support

    def value_bounds(self):
        return self._bounds

    def cursor(self, count, rng):
        return EnvCursor(count, lambda: np.asarray(self._sampler(rng, count), dtype=float))


class FiniteMarkovEnv(EnvProcess):
    """
    Stationary finite-state Markov chain with a value attached to every state.

    Paths start from the invariant law, which makes the process strictly stationary.
    """
    name = "finite_markov"

    ROW_TOLERANCE = 1e-12
    INITIAL_TOLERANCE = 1e-10

    def __init__(self, transition, values=None, initial=None):
        """
        :param transition: Row-stochastic matrix
        :param values: Environment value of every state, defaults to the state indices
        :param initial: Initial law; must equal the invariant law
        """
        self._transition = np.array(transition, dtype=float)
        self._validate_matrix(self._transition)
        n = self._transition.shape[0]

        self._values = np.arange(n, dtype=float) if values is None else np.array(values, dtype=float)
        if self._values.shape != (n,):
            raise ValidationException("expected {} state values, got shape {}".format(n, self._values.shape))

        self._invariant = invariant_law(self._transition)
        if initial is not None:
            initial = np.asarray(initial, dtype=float)
            if initial.shape != (n,) or np.max(np.abs(initial - self._invariant)) > self.INITIAL_TOLERANCE:
                raise ValidationException("initial law is not the invariant law of the transition matrix")

        self._cumulative = np.cumsum(self._transition, axis=1)
        self._initial_cumulative = np.cumsum(self._invariant)

    @classmethod
    def _validate_matrix(cls, matrix):
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise ValidationException("transition matrix must be square and non-empty")
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
            raise ValidationException("transition matrix entries must be finite and non-negative")
        if np.max(np.abs(matrix.sum(axis=1) - 1.0)) > cls.ROW_TOLERANCE:
            raise ValidationException("transition matrix rows must sum to 1")

    @property
    def transition(self):
        return self._transition

    @property
    def values(self):
        return self._values

    @property
    def invariant(self):
        return self._invariant

    @property
    def n_states(self):
        return self._transition.shape[0]

    def value_bounds(self):
        return float(self._values.min()), float(self._values.max())

    def _draw(self, cumulative, u):
        # inverse CDF; the clip absorbs rows whose cumulative sum rounds below 1
        index = (u[:, None] > cumulative).sum(axis=-1)
        return np.minimum(index, self.n_states - 1)

    def state_cursor(self, count, rng):
        """
        Like cursor, but yields state indices instead of values.

        :rtype: EnvCursor
        """
        state = [None]

        def _advance():
            u = rng.random(count)
            if state[0] is None:
                state[0] = self._draw(np.broadcast_to(self._initial_cumulative, (count, self.n_states)), u)
            else:
                state[0] = self._draw(self._cumulative[state[0]], u)
            return state[0]

        return EnvCursor(count, _advance)

    def cursor(self, count, rng):
        states = self.state_cursor(count, rng)
        return EnvCursor(count, lambda: self._values[states.advance()])


class MovingAverageEnv(EnvProcess):
    """
    Y_t = sum_{i=-L..L} a_i zeta_{t-i} with i.i.d. innovations zeta and a_i >= 0.

    The two-sided infinite sum is truncated at lag L; the truncation bias is
    bounded by the dropped coefficient mass times the innovation bound.
    """
    name = "moving_average"

    DEFAULT_LAG = 50

    def __init__(self, coefficients, innovation, innovation_bounds=None):
        """
        :param coefficients: a_{-L}, ..., a_L (odd length 2L+1)
        :param innovation: Innovation sampler, (rng, size) -> values
        :param innovation_bounds: Known (lower, upper) bounds of the innovations
        """
        self._coefficients = np.array(coefficients, dtype=float)
        if self._coefficients.ndim != 1 or self._coefficients.size % 2 != 1:
            raise ValidationException("moving-average coefficients must have odd length 2L+1")
        if np.any(self._coefficients < 0) or not np.all(np.isfinite(self._coefficients)):
            raise ValidationException("moving-average coefficients must be finite and non-negative")
        self._innovation = innovation
        self._innovation_bounds = innovation_bounds

    @classmethod
    def from_function(cls, weight, innovation, lag=DEFAULT_LAG, innovation_bounds=None):
        """
        :param weight: i -> a_i
        :type weight: (int) -> float
        :param lag: Truncation lag L
        """
        return cls([weight(i) for i in range(-lag, lag + 1)], innovation, innovation_bounds)

    @property
    def lag(self):
        return self._coefficients.size // 2

    @property
    def coefficients(self):
        return self._coefficients

    def value_bounds(self):
        if self._innovation_bounds is None:
            return None
        total = float(self._coefficients.sum())
        return total * self._innovation_bounds[0], total * self._innovation_bounds[1]

    def innovations(self, count, length, rng):
        return np.asarray(self._innovation(rng, (count, length)), dtype=float)

    def cursor(self, count, rng):
        width = self._coefficients.size
        reversed_coefficients = self._coefficients[::-1]
        # window holds zeta_{t-L}, ..., zeta_{t+L} for the next time t
        window = [None]

        def _advance():
            if window[0] is None:
                window[0] = self.innovations(count, width, rng)
            else:
                fresh = self.innovations(count, 1, rng)
                window[0] = np.concatenate([window[0][:, 1:], fresh], axis=1)
            return window[0] @ reversed_coefficients

        return EnvCursor(count, _advance)

    def sample_values(self, count, length, rng):
        rng = as_generator(rng)
        zeta = self.innovations(count, length + self._coefficients.size - 1, rng)
        windows = np.lib.stride_tricks.sliding_window_view(zeta, self._coefficients.size, axis=1)
        return windows @ self._coefficients[::-1]


class EnvPath:
    """
    Immutable finite window (t0..t1) of an environment trajectory.
    """
    def __init__(self, t0, values):
        """
        :type t0: int
        :type values: numpy.ndarray
        """
        values = np.array(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationException("an environment path needs at least one value")
        values.flags.writeable = False
        self._t0 = int(t0)
        self._values = values

    @property
    def t0(self):
        return self._t0

    @property
    def t1(self):
        return self._t0 + self._values.size - 1

    @property
    def values(self):
        return self._values

    def __len__(self):
        return self._values.size

    def at(self, t):
        if not self._t0 <= t <= self.t1:
            raise WindowRangeException("time {} outside window [{}, {}]".format(t, self._t0, self.t1))
        return self._values[t - self._t0]

    def covers(self, t0, t1):
        return self._t0 <= t0 and t1 <= self.t1

    def window(self, t0, t1):
        """
        :return: Values at times t0..t1 (inclusive)
        :rtype: numpy.ndarray
        """
        if t0 > t1 or not self.covers(t0, t1):
            raise WindowRangeException("window [{}, {}] not inside [{}, {}]".format(t0, t1, self._t0, self.t1))
        return self._values[t0 - self._t0:t1 - self._t0 + 1]

    def __eq__(self, other):
        return isinstance(other, EnvPath) and self._t0 == other._t0 and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((self._t0, self._values.tobytes()))

    def __repr__(self):
        return "EnvPath(t0={}, len={})".format(self._t0, len(self))


def sample_path(process, window, rng):
    """
    Sample the window [t0, t1] of a stationary environment.

    :type process: EnvProcess
    :param window: (t0, t1), inclusive
    :type window: (int, int)
    :type rng: numpy.random.Generator | RandomStream | int
    :rtype: EnvPath
    """
    t0, t1 = window
    if t0 > t1:
        raise ValidationException("invalid window [{}, {}]".format(t0, t1))
    values = process.sample_values(1, t1 - t0 + 1, as_generator(rng))[0]
    return EnvPath(t0, values)


def shift(path, k):
    """
    Left shift by k: the value at time t of the result is the value at t+k of path.
    The result keeps every time whose image stays inside the sampled window.

    :type path: EnvPath
    :type k: int
    :rtype: EnvPath
    """
    k = int(k)
    if abs(k) >= len(path):
        raise WindowRangeException("shift by {} leaves the window of length {}".format(k, len(path)))
    if k >= 0:
        return EnvPath(path.t0, path.values[k:])
    return EnvPath(path.t0 - k, path.values[:len(path) + k])


def is_primitive(matrix):
    """
    Irreducible and aperiodic: some power of the support pattern is positive,
    which for size s happens by the power (s - 1)^2 + 1 if at all.
    """
    size = matrix.shape[0]
    pattern = (matrix > 0).astype(float)
    n_components, _ = connected_components(pattern, directed=True, connection="strong")
    if n_components != 1:
        return False
    bound = (size - 1) ** 2 + 1
    power = np.eye(size)
    base = pattern
    while bound:
        if bound & 1:
            power = np.minimum(power @ base, 1.0)
        base = np.minimum(base @ base, 1.0)
        bound >>= 1
    return bool(np.all(power > 0))


def invariant_law(process, tolerance=1e-12, max_iterations=1000000):
    """
    Invariant law of a finite Markov chain by power iteration.

    :param process: A FiniteMarkovEnv or a row-stochastic matrix
    :type process: FiniteMarkovEnv | numpy.ndarray
    :type tolerance: float
    :type max_iterations: int
    :rtype: numpy.ndarray
    :raises: ValidationException if the chain is reducible or periodic,
             NumericException if the iteration does not converge
    """
    matrix = process.transition if isinstance(process, FiniteMarkovEnv) else np.asarray(process, dtype=float)
    FiniteMarkovEnv._validate_matrix(matrix)

    n_components, _ = connected_components(matrix > 0, directed=True, connection="strong")
    if n_components > 1:
        raise ValidationException("transition matrix is reducible ({} communicating classes)".format(n_components))
    if not is_primitive(matrix):
        raise ValidationException("transition matrix is periodic")

    pi = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for _ in range(max_iterations):
        updated = pi @ matrix
        updated /= updated.sum()
        if np.abs(updated - pi).sum() < tolerance:
            return updated
        pi = updated

    raise NumericException("power iteration did not converge in {} iterations".format(max_iterations), matrix)
