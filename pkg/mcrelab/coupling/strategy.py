__all__ = [
    "CoupledState", "CouplingStrategy", "SynchronousNoise", "SplitMinorization", "MaximalGaussian",
    "coupled_step", "maximal_gaussian_coupling", "doeblin_split",
]

import numpy as np

from mcrelab.interface import ValidationException, NumericException
from mcrelab.mcre.kernel import GaussianKernel, DiscreteKernel


class CoupledState:
    """
    Pair of states driven by shared randomness; coalesced implies x1 == x2.
    """
    def __init__(self, x1, x2, coalesced=False):
        self.x1 = np.asarray(x1)
        self.x2 = np.asarray(x2)
        self.coalesced = bool(coalesced)
        if self.coalesced and not np.array_equal(self.x1, self.x2):
            raise ValidationException("a coalesced state needs x1 == x2")

    def __eq__(self, other):
        return (isinstance(other, CoupledState) and self.coalesced == other.coalesced
                and np.array_equal(self.x1, other.x1) and np.array_equal(self.x2, other.x2))

    def __repr__(self):
        return "CoupledState(x1={}, x2={}, coalesced={})".format(self.x1, self.x2, self.coalesced)


def _equal(x1, x2):
    equal = x1 == x2
    return equal if equal.ndim == 1 else np.all(equal.reshape(equal.shape[0], -1), axis=1)


def _rows(mask, y):
    y = np.asarray(y)
    return y if y.ndim == 0 or y.shape[0] != mask.shape[0] else y[mask]


class CouplingStrategy:
    """
    Marginal-preserving coupling of two copies of a kernel.

    Like kernels, a strategy separates its randomness (sample_draws) from the
    deterministic update (apply), so two runs fed the same draws are identical.
    """
    name = "coupling"

    def check_kernel(self, kernel):
        pass

    def sample_draws(self, kernel, y, rng, count):
        raise NotImplementedError()

    def couple(self, kernel, y, x1, x2, draws):
        """
        :return: Successors of both coordinates before absorption
        """
        raise NotImplementedError()

    def apply(self, kernel, y, x1, x2, coalesced, draws):
        """
        One coupled transition of a batch; coalesced entries receive the coordinate-1
        draw on both sides and stay coalesced.

        :rtype: (numpy.ndarray, numpy.ndarray, numpy.ndarray)
        """
        x1_next, x2_next = self.couple(kernel, y, x1, x2, draws)
        x2_next = np.array(x2_next, copy=True)
        x2_next[coalesced] = x1_next[coalesced]
        return x1_next, x2_next, coalesced | _equal(x1_next, x2_next)

    def step(self, kernel, y, x1, x2, coalesced, rng):
        return self.apply(kernel, y, x1, x2, coalesced, self.sample_draws(kernel, y, rng, np.shape(x1)[0]))

    def __repr__(self):
        return "{}()".format(type(self).__name__)


class SynchronousNoise(CouplingStrategy):
    """
    Both copies apply the random map to the same noise.
    """
    name = "synchronous"

    def __init__(self, predicate=None):
        """
        :param predicate: Optional coalescence test (x1, x2) -> bool mask, exact equality by default
        """
        self._predicate = predicate

    def sample_draws(self, kernel, y, rng, count):
        return {"noise": kernel.sample_noise(rng, count)}

    def couple(self, kernel, y, x1, x2, draws):
        return kernel.apply(y, x1, draws["noise"]), kernel.apply(y, x2, draws["noise"])

    def apply(self, kernel, y, x1, x2, coalesced, draws):
        x1_next, x2_next, joined = super(SynchronousNoise, self).apply(kernel, y, x1, x2, coalesced, draws)
        if self._predicate is not None:
            hit = self._predicate(x1_next, x2_next) & ~joined
            x2_next[hit] = x1_next[hit]
            joined = joined | hit
        return x1_next, x2_next, joined


class SplitMinorization(CouplingStrategy):
    """
    Split coupling from Q(y, x, .) >= (1 - alpha(y)) kappa(y, .) on the small set.

    When both coordinates lie in the small set, a shared uniform U decides: on
    U <= 1 - alpha(y) both jump to one common kappa draw, otherwise each moves by
    the residual (Q - (1 - alpha) kappa) / alpha fed the same residual uniform.
    Outside the small set both coordinates follow the synchronous random map.
    """
    name = "split"

    def __init__(self, alpha, kappa, residual, small_set=None):
        """
        :param alpha: alpha(y) in [0, 1), batched, or a constant
        :param kappa: Sampler of the minorizing law, (y, rng, count) -> states
        :param residual: Residual random map, (y, x, u) -> states with u uniform on [0, 1)
        :param small_set: (y, x1, x2) -> mask of pairs inside the joint small set,
                          the whole space by default
        """
        self._alpha = alpha if callable(alpha) else (lambda y, c=float(alpha): np.full(np.shape(y), c))
        self._kappa = kappa
        self._residual = residual
        self._small_set = small_set

    @classmethod
    def from_specs(cls, drift, minor, residual):
        """
        Split on the small set {V(x1) <= R(y)} x {V(x2) <= R(y)}.

        :type drift: mcrelab.mcre.spec.DriftSpec
        :type minor: mcrelab.mcre.spec.MinorSpec
        """
        def _small_set(y, x1, x2):
            radius = minor.radius(drift, y)
            return (drift.V(x1) <= radius) & (drift.V(x2) <= radius)

        return cls(minor.alpha, minor.kappa, residual, _small_set)

    def alpha(self, y):
        return np.asarray(self._alpha(y), dtype=float)

    def sample_draws(self, kernel, y, rng, count):
        return {
            "u": rng.random(count),
            "kappa": self._kappa(y, rng, count),
            "residual": rng.random(count),
            "noise": kernel.sample_noise(rng, count),
        }

    def couple(self, kernel, y, x1, x2, draws):
        x1_next = np.array(kernel.apply(y, x1, draws["noise"]), copy=True)
        x2_next = np.array(kernel.apply(y, x2, draws["noise"]), copy=True)

        inside = np.ones(np.shape(x1)[0], dtype=bool) if self._small_set is None else self._small_set(y, x1, x2)
        if not np.any(inside):
            return x1_next, x2_next

        alpha = np.broadcast_to(self.alpha(y), inside.shape)
        common = inside & (draws["u"] <= 1.0 - alpha)
        split = inside & ~common
        if np.any(common):
            x1_next[common] = draws["kappa"][common]
            x2_next[common] = draws["kappa"][common]
        if np.any(split):
            if np.any(alpha[split] <= 0):
                raise NumericException("residual law requested where alpha(y) = 0", _rows(split, y))
            y_split = _rows(split, y)
            u = draws["residual"][split]
            x1_next[split] = self._residual(y_split, x1[split], u)
            x2_next[split] = self._residual(y_split, x2[split], u)
        return x1_next, x2_next


class MaximalGaussian(CouplingStrategy):
    """
    Reflection-maximal coupling of the Gaussian one-step laws of a GaussianKernel.
    """
    name = "maximal_gaussian"

    def check_kernel(self, kernel):
        if not isinstance(kernel, GaussianKernel):
            raise ValidationException("maximal Gaussian coupling needs a Gaussian kernel, got " + kernel.name)

    def sample_draws(self, kernel, y, rng, count):
        self.check_kernel(kernel)
        return {"xi": rng.standard_normal((count, kernel.state_space.dimension)), "u": rng.random(count)}

    def couple(self, kernel, y, x1, x2, draws):
        self.check_kernel(kernel)
        z1, z2, _ = _reflection(kernel.mean(y, x1), kernel.mean(y, x2), np.sqrt(kernel.variance),
                                draws["xi"], draws["u"])
        return z1, z2


def _reflection(m1, m2, sigma, xi, u):
    """
    Batched reflection-maximal coupling of N(m1, sigma^2 I) and N(m2, sigma^2 I).
    """
    z = (m1 - m2) / sigma
    z1 = m1 + sigma * xi
    shifted = xi + z
    # accept when U phi(xi) <= phi(xi + z)
    with np.errstate(divide="ignore"):
        same = np.log(u) <= 0.5 * (np.sum(xi * xi, axis=1) - np.sum(shifted * shifted, axis=1))
    norm = np.linalg.norm(z, axis=1, keepdims=True)
    e = np.divide(z, norm, out=np.zeros_like(z), where=norm > 0)
    reflected = m2 + sigma * (xi - 2.0 * np.sum(e * xi, axis=1, keepdims=True) * e)
    z2 = np.where(same[:, None], z1, reflected)
    return z1, z2, same


def maximal_gaussian_coupling(m1, m2, variance, rng):
    """
    Draw z1 ~ N(m1, variance I) and z2 ~ N(m2, variance I) with maximal P(z1 = z2).

    :type variance: float
    :type rng: numpy.random.Generator
    :rtype: (numpy.ndarray, numpy.ndarray, bool)
    """
    if not variance > 0:
        raise ValidationException("variance must be positive, got {}".format(variance))
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    if m1.shape != m2.shape or m1.ndim != 1:
        raise ValidationException("means must be vectors of equal dimension")
    xi = rng.standard_normal((1, m1.size))
    z1, z2, same = _reflection(m1[None], m2[None], np.sqrt(variance), xi, rng.random(1))
    return z1[0], z2[0], bool(same[0])


def coupled_step(strategy, kernel, y, state, rng):
    """
    One coupled transition of a single CoupledState.

    :type strategy: CouplingStrategy
    :type kernel: mcrelab.mcre.kernel.RandomKernel
    :type state: CoupledState
    :rtype: CoupledState
    """
    strategy.check_kernel(kernel)
    space = kernel.state_space
    x1, x2, joined = strategy.step(kernel, y, space.batch(state.x1, 1), space.batch(state.x2, 1),
                                   np.array([state.coalesced]), rng)
    return CoupledState(x1[0], x2[0], joined[0])


def doeblin_split(kernel):
    """
    Exact whole-space minorization of a finite kernel from the column minima of each Q(y):
    1 - alpha(y) = sum_j min_i Q(y)[i, j] and kappa(y) proportional to the column minima.

    :type kernel: DiscreteKernel
    :rtype: SplitMinorization
    """
    if not isinstance(kernel, DiscreteKernel):
        raise ValidationException("the Doeblin split needs a finite kernel")
    floor = kernel.matrices.min(axis=1)
    mass = floor.sum(axis=1)
    if np.any(mass <= 0):
        raise ValidationException("some Q(y) has no common column mass, no Doeblin minorization")
    alpha = np.clip(1.0 - mass, 0.0, None)
    kappa_cdf = np.cumsum(floor / mass[:, None], axis=1)

    safe_alpha = np.where(alpha > 0, alpha, 1.0)
    residual_rows = (kernel.matrices - floor[:, None, :]) / safe_alpha[:, None, None]
    residual_cdf = np.cumsum(np.clip(residual_rows, 0.0, None), axis=2)
    last = kernel.size - 1

    def _alpha(y):
        return alpha[kernel.env_index(y)]

    def _kappa(y, rng, count):
        index = np.broadcast_to(kernel.env_index(y), (count,))
        return np.minimum((rng.random(count)[:, None] > kappa_cdf[index]).sum(axis=1), last)

    def _residual(y, x, u):
        index = np.broadcast_to(kernel.env_index(y), np.shape(x))
        rows = residual_cdf[index, np.asarray(x, dtype=int)]
        return np.minimum((u[:, None] > rows).sum(axis=1), last)

    return SplitMinorization(_alpha, _kappa, _residual)
