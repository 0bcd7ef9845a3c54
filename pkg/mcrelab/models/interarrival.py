__all__ = ["InterArrival", "Exponential", "ShiftedUniform", "Deterministic", "interarrival_law"]

import numpy as np
from scipy import stats

from mcrelab.interface import ValidationException


class InterArrival:
    """
    Law of the i.i.d. inter-arrival times epsilon_n >= 0.
    """
    name = "interarrival"

    def __init__(self, law):
        """
        :param law: Frozen scipy.stats distribution
        """
        self._law = law

    @property
    def mean(self):
        return float(self._law.mean())

    def sample(self, rng, size):
        return self._law.rvs(size=size, random_state=rng)

    def cdf(self, x):
        return self._law.cdf(x)

    def tail(self, x):
        """
        :return: P(epsilon >= x)
        """
        return self._law.sf(x)

    def log_tail(self, x):
        return self._law.logsf(x)

    def ppf(self, q):
        return self._law.ppf(q)

    def pdf(self, x):
        return self._law.pdf(x)

    def log_mgf(self, s):
        """
        :return: log E[e^{s epsilon}], or None where the closed form is not provided
        """
        return None

    def __repr__(self):
        return "{}(mean={:.6g})".format(type(self).__name__, self.mean)


class Exponential(InterArrival):
    name = "exponential"

    def __init__(self, rate):
        if not rate > 0:
            raise ValidationException("exponential rate must be positive, got {}".format(rate))
        self.rate = float(rate)
        super(Exponential, self).__init__(stats.expon(scale=1.0 / self.rate))

    def log_mgf(self, s):
        if s >= self.rate:
            return None
        return np.log(self.rate) - np.log(self.rate - s)


class ShiftedUniform(InterArrival):
    """
    Uniform on [shift, shift + width].
    """
    name = "shifted_uniform"

    def __init__(self, shift, width):
        if shift < 0 or not width > 0:
            raise ValidationException("shifted uniform needs shift >= 0 and width > 0")
        self.shift = float(shift)
        self.width = float(width)
        super(ShiftedUniform, self).__init__(stats.uniform(loc=self.shift, scale=self.width))

    def log_mgf(self, s):
        if s == 0:
            return 0.0
        sw = s * self.width
        # log((e^{sw} - 1) / (sw)) computed without cancellation
        if sw > 0:
            log_ratio = sw + np.log(-np.expm1(-sw)) - np.log(sw)
        else:
            log_ratio = np.log(-np.expm1(sw)) - np.log(-sw)
        return s * self.shift + log_ratio


class Deterministic(InterArrival):
    name = "deterministic"

    def __init__(self, value):
        if value < 0:
            raise ValidationException("inter-arrival time must be non-negative")
        self.value = float(value)
        super(Deterministic, self).__init__(None)

    @property
    def mean(self):
        return self.value

    def sample(self, rng, size):
        return np.full(size, self.value)

    def cdf(self, x):
        return (np.asarray(x) >= self.value).astype(float)

    def tail(self, x):
        return (np.asarray(x) <= self.value).astype(float)

    def log_tail(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.tail(x))

    def ppf(self, q):
        return np.full(np.shape(q), self.value)

    def pdf(self, x):
        raise ValidationException("a deterministic inter-arrival law has no density")

    def log_mgf(self, s):
        return s * self.value


def interarrival_law(kind, **params):
    """
    :param kind: exponential | shifted_uniform | deterministic
    :rtype: InterArrival
    """
    laws = {"exponential": Exponential, "shifted_uniform": ShiftedUniform, "deterministic": Deterministic}
    if kind not in laws:
        raise ValidationException("unknown inter-arrival law '{}'".format(kind))
    return laws[kind](**params)
