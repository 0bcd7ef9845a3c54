__all__ = [
    "StateSpace", "RandomKernel", "GaussianKernel", "DiscreteKernel", "MultistepKernel",
    "kernel_step", "multistep_wrap",
]

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from mcrelab.interface import ValidationException, WindowRangeException


class StateSpace:
    """
    Descriptor of the state space of a kernel.

    Scalar states (queue waiting times, finite labels) are batched as shape (n,),
    vector states as shape (n, dimension).
    """
    def __init__(self, dimension=1, vector=False, labels=None):
        """
        :param dimension: Dimension d of a continuous state space
        :type dimension: int
        :param vector: Whether states are vectors, even when d = 1
        :type vector: bool
        :param labels: Labels of a finite state space, None for continuous states
        :type labels: list | None
        """
        if dimension < 1:
            raise ValidationException("state dimension must be >= 1")
        self._dimension = int(dimension)
        self._vector = bool(vector) or self._dimension > 1
        self._labels = None if labels is None else list(labels)

    @classmethod
    def finite(cls, size):
        return cls(labels=list(range(size)))

    @property
    def dimension(self):
        return self._dimension

    @property
    def is_vector(self):
        return self._vector

    @property
    def is_discrete(self):
        return self._labels is not None

    @property
    def labels(self):
        return self._labels

    @property
    def size(self):
        return None if self._labels is None else len(self._labels)

    @property
    def state_shape(self):
        return (self._dimension,) if self._vector else ()

    def batch(self, x, count):
        """
        Broadcast one state to a batch of count identical states.

        :rtype: numpy.ndarray
        """
        x = np.asarray(x, dtype=int if self.is_discrete else float)
        if x.shape != self.state_shape:
            raise ValidationException("state shape {} does not match {}".format(x.shape, self.state_shape))
        if self.is_discrete and not 0 <= int(x) < self.size:
            raise ValidationException("state {} outside the finite state space".format(int(x)))
        return np.repeat(x[None, ...], count, axis=0)


class RandomKernel:
    """
    Parametric kernel Q(y, x, .) given as a random map x' = f(y, x, u).

    The noise u is drawn independently of (y, x), so two chains fed the same u
    share their randomness. Batches are vectorized over the leading axis.
    """
    block_length = 1

    def __init__(self, update, noise, state_space, density=None, name="kernel"):
        """
        :param update: The random map, (y, x, u) -> x'
        :type update: (numpy.ndarray, numpy.ndarray, numpy.ndarray) -> numpy.ndarray
        :param noise: Noise sampler, (rng, count) -> u with leading axis count
        :type noise: (numpy.random.Generator, int) -> numpy.ndarray
        :type state_space: StateSpace
        :param density: Optional transition density, (y, x, x') -> value
        :type name: str
        """
        self._update = update
        self._noise = noise
        self._state_space = state_space
        self._density = density
        self._name = name

    @classmethod
    def deterministic(cls, fn, state_space, name="deterministic"):
        """
        :param fn: (y, x) -> x'
        """
        return cls(lambda y, x, u: fn(y, x), lambda rng, count: np.zeros(count), state_space, name=name)

    @property
    def name(self):
        return self._name

    @property
    def state_space(self):
        return self._state_space

    @property
    def has_density(self):
        return self._density is not None

    def sample_noise(self, rng, count):
        return self._noise(rng, count)

    def apply(self, y, x, u):
        return self._update(y, x, u)

    def step(self, y, x, rng):
        """
        One transition of every state in the batch x.

        :param y: Environment value, scalar or one per batch entry
        :param x: Batch of states
        :type rng: numpy.random.Generator
        :rtype: numpy.ndarray
        """
        return self.apply(y, x, self.sample_noise(rng, np.shape(x)[0]))

    def density(self, y, x, x_next):
        if self._density is None:
            raise ValidationException("kernel '{}' has no transition density".format(self._name))
        return self._density(y, x, x_next)

    def density_mass(self, y, x, grid):
        """
        Numerical mass of the density of a 1-d kernel over a grid of successor states.

        :type grid: numpy.ndarray
        :rtype: float
        """
        grid = np.asarray(grid, dtype=float)
        return float(trapezoid(self.density(y, x, grid), grid))

    def draw_env(self, cursor):
        """
        :return: Environment input of the next step for every path of the cursor
        """
        return cursor.advance()

    def __repr__(self):
        return "{}(name={})".format(type(self).__name__, self._name)


class GaussianKernel(RandomKernel):
    """
    x' = m(y, x) + sqrt(variance) xi with xi standard normal in R^d.
    """
    def __init__(self, mean_map, variance, dimension, name="gaussian"):
        """
        :param mean_map: (y, x) -> mean of the successor, batched
        :param variance: Isotropic variance of the successor
        :type variance: float
        :type dimension: int
        """
        if not variance > 0:
            raise ValidationException("variance must be positive, got {}".format(variance))
        self._mean_map = mean_map
        self._variance = float(variance)
        scale = np.sqrt(self._variance)
        super(GaussianKernel, self).__init__(
            lambda y, x, u: mean_map(y, x) + scale * u,
            lambda rng, count: rng.standard_normal((count, dimension)),
            StateSpace(dimension, vector=True),
            density=self._gaussian_density,
            name=name)

    @property
    def variance(self):
        return self._variance

    def mean(self, y, x):
        return self._mean_map(y, x)

    def _gaussian_density(self, y, x, x_next):
        d = self.state_space.dimension
        m = self._mean_map(y, self.state_space.batch(x, 1))[0]
        x_next = np.asarray(x_next, dtype=float)
        if d == 1 and x_next.shape[-1:] != (1,):
            x_next = x_next[..., None]
        z = (x_next - m) / np.sqrt(self._variance)
        return np.prod(norm.pdf(z), axis=-1) / self._variance ** (d / 2.0)


class DiscreteKernel(RandomKernel):
    """
    Finite kernel with one row-stochastic matrix Q(y) per environment state.

    Environment values are the indices of the matrices. Successors are drawn by
    inverse CDF from one uniform per step, so shared uniforms give the
    monotone (quantile) coupling of two rows.
    """
    ROW_TOLERANCE = 1e-12

    def __init__(self, matrices, name="discrete"):
        """
        :param matrices: Stack of transition matrices, shape (n_env, S, S)
        """
        matrices = np.array(matrices, dtype=float)
        if matrices.ndim == 2:
            matrices = matrices[None]
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValidationException("expected matrices of shape (n_env, S, S), got {}".format(matrices.shape))
        if np.any(matrices < 0) or np.max(np.abs(matrices.sum(axis=2) - 1.0)) > self.ROW_TOLERANCE:
            raise ValidationException("every Q(y) must be row-stochastic")
        self._matrices = matrices
        self._cumulative = np.cumsum(matrices, axis=2)
        size = matrices.shape[1]
        super(DiscreteKernel, self).__init__(
            self._inverse_cdf,
            lambda rng, count: rng.random(count),
            StateSpace.finite(size),
            density=lambda y, x, x_next: self._matrices[self.env_index(y), x, x_next],
            name=name)

    @property
    def matrices(self):
        return self._matrices

    @property
    def size(self):
        return self._matrices.shape[1]

    @property
    def n_env(self):
        return self._matrices.shape[0]

    def env_index(self, y):
        index = np.asarray(y).astype(int)
        if np.any(index < 0) or np.any(index >= self.n_env):
            raise ValidationException("environment value outside the matrix stack")
        return index

    def matrix(self, y):
        return self._matrices[self.env_index(y)]

    def _inverse_cdf(self, y, x, u):
        x = np.asarray(x, dtype=int)
        rows = self._cumulative[self.env_index(y), x]
        return np.minimum((u[:, None] > rows).sum(axis=-1), self.size - 1)


class MultistepKernel(RandomKernel):
    """
    p-fold composition of a base kernel: one step consumes a block of p
    consecutive environment values (y_1, ..., y_p) and applies Q(y_1) first.
    """
    def __init__(self, base, p, drift=None, one_step_bound=None):
        """
        :type base: RandomKernel
        :param p: Block length
        :type p: int
        :param drift: Block drift data (V, gamma(y_1..y_p), constant K)
        :type drift: mcrelab.mcre.spec.DriftSpec | None
        :param one_step_bound: Constant K of [Q(y)V](x) <= K V(x) + K
        :type one_step_bound: float | None
        """
        if p < 1:
            raise ValidationException("block length must be >= 1, got {}".format(p))
        if drift is not None and drift.block_length != p:
            raise ValidationException("block drift length {} does not match p={}".format(drift.block_length, p))
        self._base = base
        self._p = int(p)
        self._drift = drift
        self._one_step_bound = one_step_bound
        super(MultistepKernel, self).__init__(
            self._compose, self._stacked_noise, base.state_space, name="{}^{}".format(base.name, p))

    @property
    def base(self):
        return self._base

    @property
    def block_length(self):
        return self._p

    @property
    def drift(self):
        return self._drift

    @property
    def one_step_bound(self):
        return self._one_step_bound

    def _stacked_noise(self, rng, count):
        return np.stack([self._base.sample_noise(rng, count) for _ in range(self._p)], axis=1)

    def _compose(self, y, x, u):
        y = np.asarray(y)
        if y.shape[-1] != self._p:
            raise ValidationException("expected an environment block of length {}".format(self._p))
        for j in range(self._p):
            x = self._base.apply(y[..., j], x, u[:, j])
        return x

    def draw_env(self, cursor):
        return cursor.take(self._p)

    def block_env(self, values, horizon):
        """
        Cut environment windows into consecutive blocks.

        :param values: Environment values, shape (T,) or (count, T)
        :param horizon: Number of block steps needed
        :return: Blocks, shape (horizon, p) or (count, horizon, p)
        """
        values = np.asarray(values)
        needed = self._p * horizon
        if values.shape[-1] < needed:
            raise WindowRangeException("environment window of length {} is shorter than p*horizon={}"
                                       .format(values.shape[-1], needed))
        return values[..., :needed].reshape(values.shape[:-1] + (horizon, self._p))

    def matrix(self, block):
        """
        Block transition matrix Q(y_1) Q(y_2) ... Q(y_p) of a discrete base kernel.
        """
        if not isinstance(self._base, DiscreteKernel):
            raise ValidationException("block matrices need a discrete base kernel")
        block = np.asarray(block)
        if block.shape != (self._p,):
            raise ValidationException("expected an environment block of length {}".format(self._p))
        product = np.eye(self._base.size)
        for y in block:
            product = product @ self._base.matrix(y)
        return product


def kernel_step(kernel, y, x, rng):
    """
    One draw from Q(y, x, .) for a single state.

    :type kernel: RandomKernel
    :type rng: numpy.random.Generator
    """
    batch = kernel.state_space.batch(x, 1)
    return kernel.step(y, batch, rng)[0]


def multistep_wrap(kernel, p, drift=None, one_step_bound=None):
    """
    :type kernel: RandomKernel
    :type p: int
    :param drift: Block drift spec with block_length p
    :param one_step_bound: Constant of the one-step bound of the base kernel
    :rtype: MultistepKernel
    """
    return MultistepKernel(kernel, p, drift, one_step_bound)
