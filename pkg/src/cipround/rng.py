"""Seeded, counter-based random streams.

Every random run is driven by a Philox bit generator whose 128-bit key packs
``(seed, stream)``; stream ``t`` of a Monte Carlo batch or retry loop is
therefore reproducible on its own, independent of how many other streams
ran before it or in which thread.
"""
from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1


def bit_generator(seed: int, stream: int = 0) -> Philox:
    if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
        raise ValueError("seed and stream must be integers in [0, 2**64)")
    return Philox(key=(stream << 64) | seed)


def generator(seed: int, stream: int = 0) -> Generator:
    return Generator(bit_generator(seed, stream))
