__all__ = ["StreamPurpose", "RandomStream", "as_stream", "as_generator"]

from enum import Enum

import numpy as np


class StreamPurpose(Enum):
    """
    First word of every spawn key; keeps the streams of different verifiers and
    subcommands disjoint under one master seed.
    """
    GENERIC = 0
    VERIFY = 1
    COUPLE = 2
    LLN = 3
    CONTRACT = 4
    ORACLE = 5
    BUILD = 6
    BOOTSTRAP = 7


class RandomStream:
    """
    Counter-based random stream.

    A stream is the triple (master seed, purpose, path). Generators are Philox
    instances keyed by numpy.random.SeedSequence(entropy=seed, spawn_key=(purpose, *path)),
    so child k of a stream is the same sequence no matter which worker draws it
    or in which order the children are visited.
    """
    SEED_MASK = (1 << 64) - 1

    def __init__(self, seed=0, purpose=StreamPurpose.GENERIC, path=()):
        """
        :param seed: 64-bit unsigned master seed
        :type seed: int
        :type purpose: StreamPurpose
        :type path: tuple[int]
        """
        self._seed = int(seed) & self.SEED_MASK
        self._purpose = purpose
        self._path = tuple(int(p) for p in path)

    @property
    def seed(self):
        return self._seed

    @property
    def purpose(self):
        return self._purpose

    @property
    def path(self):
        return self._path

    def for_purpose(self, purpose):
        """
        :type purpose: StreamPurpose
        :rtype: RandomStream
        """
        return RandomStream(self._seed, purpose, ())

    def child(self, index):
        """
        :type index: int
        :rtype: RandomStream
        """
        return RandomStream(self._seed, self._purpose, self._path + (index,))

    def seed_sequence(self):
        return np.random.SeedSequence(entropy=self._seed, spawn_key=(self._purpose.value,) + self._path)

    def generator(self):
        """
        :return: A fresh generator positioned at the start of this stream
        :rtype: numpy.random.Generator
        """
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def __repr__(self):
        return "RandomStream(seed={}, purpose={}, path={})".format(self._seed, self._purpose.name, self._path)


def as_stream(rng, purpose=StreamPurpose.GENERIC):
    """
    Coerce a seed, stream or generator into a RandomStream.

    A numpy Generator is consumed once to produce a 64-bit seed, so passing the
    same generator twice yields two different streams.

    :type rng: RandomStream | int | numpy.random.Generator | None
    :rtype: RandomStream
    """
    if isinstance(rng, RandomStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return RandomStream(int(rng.integers(0, 2 ** 63)), purpose)
    if rng is None:
        return RandomStream(0, purpose)
    return RandomStream(int(rng), purpose)


def as_generator(rng):
    """
    :type rng: numpy.random.Generator | RandomStream | int | None
    :rtype: numpy.random.Generator
    """
    if isinstance(rng, np.random.Generator):
        return rng
    return as_stream(rng).generator()
