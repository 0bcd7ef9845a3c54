__all__ = ["EmpiricalLaw", "TvCurve", "shared_edges", "tv_hist", "empirical_law", "tv_curve"]

import logging

import numpy as np

from mcrelab.interface import ValidationException, UnsupportedException
from mcrelab.parallel.streams import StreamPurpose, as_stream
from mcrelab.mcre.chain import simulate_states
from mcrelab.mcre.estimate import CurvePoint

WEIGHT_TOLERANCE = 1e-12


class EmpiricalLaw:
    """
    Law of a state: exact weights over a finite state set, or samples of a 1-d
    continuous state binned on demand.
    """
    def __init__(self, samples=None, weights=None, edges=None):
        """
        :param samples: 1-d samples of a continuous state
        :param weights: Probability vector over a finite state set
        :param edges: Optional fixed bin edges for the samples
        """
        if (samples is None) == (weights is None):
            raise ValidationException("an empirical law holds either samples or weights")
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
                raise ValidationException("weights must be non-negative and sum to 1")
        if samples is not None:
            samples = np.asarray(samples, dtype=float)
            if samples.ndim == 2 and samples.shape[1] == 1:
                samples = samples[:, 0]
            if samples.ndim != 1:
                raise UnsupportedException("binned laws need a 1-d state, got samples of shape {}"
                                           .format(samples.shape))
        self._samples = samples
        self._weights = weights
        self._edges = None if edges is None else np.asarray(edges, dtype=float)

    @classmethod
    def from_states(cls, states, size=None):
        """
        :param size: Size of the finite state set; None for continuous states
        """
        states = np.asarray(states)
        if size is None:
            return cls(samples=states)
        counts = np.bincount(states.astype(int).ravel(), minlength=size)
        return cls(weights=counts / counts.sum())

    @property
    def is_discrete(self):
        return self._weights is not None

    @property
    def samples(self):
        return self._samples

    @property
    def weights(self):
        return self._weights

    @property
    def edges(self):
        return self._edges

    def histogram(self, edges):
        """
        :return: Probability mass of every bin
        """
        if self.is_discrete:
            raise ValidationException("exact weights are not binned")
        counts, _ = np.histogram(self._samples, bins=edges)
        return counts / self._samples.size

    def rebin(self, factor):
        """
        Merge every factor consecutive bins of the fixed edges.

        :rtype: EmpiricalLaw
        """
        if self._edges is None:
            raise ValidationException("the law has no fixed binning")
        edges = self._edges[::factor]
        if edges[-1] != self._edges[-1]:
            edges = np.append(edges, self._edges[-1])
        return EmpiricalLaw(samples=self._samples, edges=edges)


def shared_edges(law1, law2):
    """
    One partition for both laws: their common fixed edges, or Freedman-Diaconis
    bins on the pooled sample.

    :raises: ValidationException when both laws carry different fixed edges
    """
    if law1.edges is not None or law2.edges is not None:
        if law1.edges is None or law2.edges is None or not np.array_equal(law1.edges, law2.edges):
            raise ValidationException("laws are binned on different partitions")
        return law1.edges
    pooled = np.concatenate([law1.samples, law2.samples])
    if np.ptp(pooled) == 0:
        return np.array([pooled[0] - 0.5, pooled[0] + 0.5])
    return np.histogram_bin_edges(pooled, bins="fd")


def tv_hist(law1, law2):
    """
    Total variation sum |p_i - q_i| in [0, 2] on one partition (binned TV for
    continuous laws).

    :type law1: EmpiricalLaw
    :type law2: EmpiricalLaw
    :rtype: float
    """
    if law1.is_discrete != law2.is_discrete:
        raise ValidationException("cannot compare exact weights with samples")
    if law1.is_discrete:
        if law1.weights.shape != law2.weights.shape:
            raise ValidationException("laws live on different state sets")
        return float(np.abs(law1.weights - law2.weights).sum())
    edges = shared_edges(law1, law2)
    return float(np.abs(law1.histogram(edges) - law2.histogram(edges)).sum())


def _space_size(kernel):
    space = kernel.state_space
    if space.is_discrete:
        return space.size
    if space.is_vector and space.dimension > 1:
        return -1
    return None


def empirical_law(kernel, env, x0, n, reps, rng, pool=None, oracle=None):
    """
    Law of X_n started at x0 over independent environment and noise replications,
    or the exact law when an oracle is given.

    :rtype: EmpiricalLaw
    """
    if oracle is not None:
        return EmpiricalLaw(weights=oracle.law(x0, n))
    size = _space_size(kernel)
    if size is None and reps < 1000:
        raise ValidationException("continuous laws need at least 1000 replications, got {}".format(reps))
    states = simulate_states(kernel, env, x0, [n], reps, rng, pool)[:, 0]
    if size == -1:
        raise UnsupportedException("binned laws of a {}-d state are not supported".format(
            kernel.state_space.dimension))
    return EmpiricalLaw.from_states(states, size)


class TvCurve:
    """
    Estimated TV distance per horizon with bootstrap CIs, exact values when an
    oracle is available, and the bin width used at every horizon (None when exact).
    """
    CSV_HEADER = ("n", "estimate", "ci_low", "ci_high", "exact")
    logger = logging.getLogger("mcrelab.TvCurve")

    def __init__(self, points, bin_widths):
        self.points = points
        self.bin_widths = bin_widths

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("TvCurve: %s", msg)

    @property
    def horizons(self):
        return np.array([p.n for p in self.points])

    @property
    def estimates(self):
        return np.array([p.estimate for p in self.points])

    def rows(self):
        return [(p.n, p.estimate, p.ci_low, p.ci_high, "" if p.exact is None else p.exact) for p in self.points]


def _bootstrap_tv(law1, law2, states1, states2, size, n_boot, gen, confidence):
    estimate = tv_hist(law1, law2)
    if size is None:
        edges = shared_edges(law1, law2)
        width = float(edges[1] - edges[0])
    else:
        edges, width = None, None
    tail = (1.0 - confidence) / 2.0
    boot = np.empty(n_boot)
    for b in range(n_boot):
        # paired resampling: replication i of both starts shares its random numbers
        idx = gen.integers(0, states1.shape[0], states1.shape[0])
        s1 = states1[idx]
        s2 = None if states2 is None else states2[idx]
        b1 = EmpiricalLaw.from_states(s1, size)
        b2 = law2 if s2 is None else EmpiricalLaw.from_states(s2, size)
        if size is None:
            boot[b] = np.abs(b1.histogram(edges) - b2.histogram(edges)).sum()
        else:
            boot[b] = tv_hist(b1, b2)
    low, high = np.quantile(boot, [tail, 1.0 - tail])
    return estimate, float(boot.std(ddof=1)), min(low, estimate), max(high, estimate), width


def tv_curve(kernel, env, x0, reference, n_grid, reps, rng, oracle=None, n_boot=200, confidence=0.95, pool=None):
    """
    TV between the law of X_n^{x0} and a reference, for every n of the grid.

    :param reference: A second start state, or the target law as an EmpiricalLaw
    :param oracle: DiscreteOracle giving exact values alongside the estimates
    :rtype: TvCurve
    :raises: UnsupportedException for multidimensional continuous states
    """
    size = _space_size(kernel)
    if size == -1:
        raise UnsupportedException("TV curves need a 1-d or finite state; use the coupling bound instead")
    grid = [int(n) for n in n_grid]
    stream = as_stream(rng, StreamPurpose.GENERIC)
    target = reference if isinstance(reference, EmpiricalLaw) else None

    # both starts share the replication stream (common random numbers)
    states1 = simulate_states(kernel, env, x0, grid, reps, stream.child(0), pool)
    states2 = None if target is not None else simulate_states(kernel, env, reference, grid, reps, stream.child(0), pool)
    gen = stream.child(1).generator()

    points, widths = [], []
    for j, n in enumerate(grid):
        law1 = EmpiricalLaw.from_states(states1[:, j], size)
        if target is not None:
            law2, s2 = target, None
        else:
            s2 = states2[:, j]
            law2 = EmpiricalLaw.from_states(s2, size)
        estimate, stderr, low, high, width = _bootstrap_tv(law1, law2, states1[:, j], s2, size, n_boot, gen,
                                                           confidence)
        exact = None
        if oracle is not None:
            other = oracle.mu_star if target is not None else oracle.law(reference, n)
            exact = float(np.abs(oracle.law(x0, n) - other).sum())
        points.append(CurvePoint(n, estimate, stderr, low, high, exact))
        widths.append(width)
    TvCurve._log("n={} estimate={:.6g}".format(grid[-1], points[-1].estimate))
    return TvCurve(points, widths)
