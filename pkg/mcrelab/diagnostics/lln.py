__all__ = ["LlnReference", "LlnResult", "check_functional_bound", "surrogate_reference", "lln_experiment"]

import logging

import numpy as np

from mcrelab.interface import ValidationException, FunctionalBoundException
from mcrelab.mcre.chain import ergodic_averages, long_run_average


class LlnReference:
    """
    The integral of phi against mu*: exact (oracle) or a long-run surrogate.
    """
    logger = logging.getLogger("mcrelab.LlnReference")

    def __init__(self, value, exact, steps=None, burn_in_fraction=None):
        self.value = float(value)
        self.exact = bool(exact)
        self.steps = steps
        self.burn_in_fraction = burn_in_fraction

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("LlnReference: %s", msg)

    @classmethod
    def from_oracle(cls, oracle, phi):
        return cls(oracle.expectation(phi), True)

    def as_dict(self):
        out = {"value": self.value, "exact": self.exact}
        if not self.exact:
            out.update(surrogate="long-run average", steps=self.steps, burn_in_fraction=self.burn_in_fraction)
        return out


def surrogate_reference(kernel, env, x0, phi, steps, rng, chains=1, burn_in_fraction=0.1, pool=None):
    """
    Long trajectory average of phi with the first burn_in_fraction of the steps discarded.

    :rtype: LlnReference
    """
    value, kept = long_run_average(kernel, env, x0, phi, steps, rng, chains, burn_in_fraction, pool)
    LlnReference._log("surrogate {:.6g} over {} kept steps".format(value, kept))
    return LlnReference(value, False, kept, burn_in_fraction)


def check_functional_bound(phi, bound, probes):
    """
    :raises: FunctionalBoundException if |phi| exceeds the declared bound on a probe
    """
    if bound is None or not bound > 0:
        raise ValidationException("a positive bound of |phi| must be declared")
    values = np.asarray(phi(np.asarray(probes)), dtype=float)
    if not np.all(np.isfinite(values)) or np.any(np.abs(values) > bound):
        worst = float(np.max(np.abs(values)))
        raise FunctionalBoundException("|phi| reaches {:.6g} on the probes, above the bound {:.6g}"
                                       .format(worst, bound))


class LlnResult:
    """
    L^p errors of ergodic averages against the reference, per N and moment order p.
    """
    CSV_HEADER = ("N", "p", "error")
    logger = logging.getLogger("mcrelab.LlnResult")

    def __init__(self, n_grid, orders, errors, reference):
        """
        :param errors: Shape (len(orders), len(n_grid))
        :type reference: LlnReference
        """
        self.n_grid = list(n_grid)
        self.orders = list(orders)
        self.errors = errors
        self.reference = reference

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("LlnResult: %s", msg)

    def decreasing(self, p=None):
        rows = self.errors if p is None else self.errors[[self.orders.index(p)]]
        return bool(np.all(np.diff(rows, axis=1) <= 0))

    def error(self, p, n):
        return float(self.errors[self.orders.index(p), self.n_grid.index(n)])

    def rows(self):
        return [(n, p, float(self.errors[i, j])) for j, n in enumerate(self.n_grid) for i, p in enumerate(self.orders)]


def lln_experiment(kernel, env, x0, phi, n_grid, reps, orders, reference, rng, bound=None, probes=None,
                   pool=None):
    """
    || (1/N) sum_{t<N} phi(X_t) - reference ||_p across replications, for every N and p.

    :param phi: Bounded functional on batches of states
    :param orders: Moment orders p >= 1
    :type reference: LlnReference
    :param bound: Declared bound of |phi|, checked on the probes when given
    :rtype: LlnResult
    """
    if any(p < 1 for p in orders):
        raise ValidationException("moment orders must be >= 1")
    if probes is not None:
        check_functional_bound(phi, bound, probes)
    averages = ergodic_averages(kernel, env, x0, phi, n_grid, reps, rng, pool)
    deviations = np.abs(averages - reference.value)
    errors = np.array([np.mean(deviations ** p, axis=0) ** (1.0 / p) for p in orders])
    LlnResult._log("L^p errors at N={}: {}".format(n_grid[-1], errors[:, -1]))
    return LlnResult(n_grid, orders, errors, reference)
