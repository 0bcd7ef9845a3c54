__all__ = ["RateFit", "rate_fit"]

import numpy as np
from scipy.stats import linregress

from mcrelab.interface import InsufficientDataException

MIN_POINTS = 5


class RateFit:
    """
    Least-squares fits of ln d(n) against n^{1/3} (ln c1 - c2 n^{1/3}) and
    against n (pure geometric decay).
    """
    CSV_HEADER = ("model", "c1", "c2", "r2", "alt_model_r2")

    CUBE_ROOT = "exp_cube_root"
    GEOMETRIC = "geometric"

    def __init__(self, c1, c2, r2, alt_c1, alt_c2, alt_r2, points):
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.r2 = float(r2)
        self.alt_c1 = float(alt_c1)
        self.alt_c2 = float(alt_c2)
        self.alt_r2 = float(alt_r2)
        self.points = int(points)

    @property
    def converging(self):
        return self.c2 > 1e-12

    @property
    def better_model(self):
        return self.GEOMETRIC if self.alt_r2 > self.r2 else self.CUBE_ROOT

    def rows(self):
        return [(self.CUBE_ROOT, self.c1, self.c2, self.r2, self.alt_r2),
                (self.GEOMETRIC, self.alt_c1, self.alt_c2, self.alt_r2, self.r2)]

    def as_dict(self):
        return {"c1": self.c1, "c2": self.c2, "r2": self.r2, "geometric_c1": self.alt_c1,
                "geometric_c2": self.alt_c2, "geometric_r2": self.alt_r2, "converging": self.converging,
                "better_model": self.better_model, "points": self.points}


def _curve_values(curve):
    if hasattr(curve, "points"):
        pairs = [(p.n, p.tv_bound if hasattr(p, "tv_bound") else p.estimate) for p in curve.points]
    else:
        pairs = [(n, value) for n, value in curve]
    n = np.array([float(a) for a, _ in pairs])
    values = np.array([float(b) for _, b in pairs])
    return n, values


def _fit(x, log_d):
    fit = linregress(x, log_d)
    return np.exp(fit.intercept), -fit.slope, fit.rvalue ** 2


def rate_fit(curve, saturation=None):
    """
    :param curve: CouplingCurve, TvCurve or (n, value) pairs
    :param saturation: Leading points with value >= saturation are dropped
    :rtype: RateFit
    :raises: InsufficientDataException with fewer than 5 positive points
    """
    n, values = _curve_values(curve)
    if saturation is not None:
        start = 0
        while start < values.size and values[start] >= saturation:
            start += 1
        n, values = n[start:], values[start:]
    keep = values > 0
    if keep.sum() < MIN_POINTS:
        raise InsufficientDataException("rate fit needs at least {} positive points, got {}"
                                        .format(MIN_POINTS, int(keep.sum())))
    n, log_d = n[keep], np.log(values[keep])
    c1, c2, r2 = _fit(np.cbrt(n), log_d)
    alt_c1, alt_c2, alt_r2 = _fit(n, log_d)
    return RateFit(c1, c2, r2, alt_c1, alt_c2, alt_r2, n.size)
