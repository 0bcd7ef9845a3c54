__all__ = ["mean_stderr", "log_mean_exp", "log1mexp", "bootstrap_indices", "CurvePoint", "log_mean_exp_curve"]

import numpy as np
from scipy.special import logsumexp


def mean_stderr(samples):
    """
    :return: Sample mean and its standard error along axis 0
    """
    samples = np.asarray(samples, dtype=float)
    count = samples.shape[0]
    mean = samples.mean(axis=0)
    if count < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(count)


def log_mean_exp(log_values, axis=0):
    """
    log E[e^Z] from samples of Z, without overflow.
    """
    log_values = np.asarray(log_values, dtype=float)
    with np.errstate(divide="ignore"):
        return logsumexp(log_values, axis=axis) - np.log(log_values.shape[axis])


def bootstrap_indices(count, n_boot, rng):
    """
    :return: Resampling indices, shape (n_boot, count)
    """
    return rng.integers(0, count, size=(n_boot, count))


class CurvePoint:
    """
    One horizon of an estimated curve.
    """
    def __init__(self, n, estimate, stderr, ci_low, ci_high, exact=None):
        self.n = int(n)
        self.estimate = float(estimate)
        self.stderr = float(stderr)
        self.ci_low = float(ci_low)
        self.ci_high = float(ci_high)
        self.exact = None if exact is None else float(exact)

    def __repr__(self):
        return "CurvePoint(n={}, estimate={:.6g}, ci=[{:.6g}, {:.6g}])".format(
            self.n, self.estimate, self.ci_low, self.ci_high)


def log_mean_exp_curve(log_terms, horizons, scales, rng, n_boot=500, confidence=0.95):
    """
    Per column j, exp(log E[e^{Z_j}] / scale_j) with a percentile bootstrap CI.

    :param log_terms: Samples of Z, shape (reps, horizons)
    :param horizons: Horizon n of every column
    :param scales: Root applied to every column, e.g. n or n^theta
    :type rng: numpy.random.Generator
    :rtype: list[CurvePoint]
    """
    log_terms = np.asarray(log_terms, dtype=float)
    reps = log_terms.shape[0]
    idx = bootstrap_indices(reps, n_boot, rng)
    tail = (1.0 - confidence) / 2.0

    points = []
    for j, (n, scale) in enumerate(zip(horizons, scales)):
        column = log_terms[:, j]
        estimate = np.exp(log_mean_exp(column) / scale)
        boot = np.exp(log_mean_exp(column[idx], axis=1) / scale)
        low, high = np.quantile(boot, [tail, 1.0 - tail])
        points.append(CurvePoint(n, estimate, boot.std(ddof=1), min(low, estimate), max(high, estimate)))
    return points


def log1mexp(log_values):
    """
    log(1 - e^z) for z <= 0, accurate at both ends of the range.
    """
    z = np.asarray(log_values, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(z < -np.log(2.0), np.log1p(-np.exp(z)), np.log(-np.expm1(z)))
