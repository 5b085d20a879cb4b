"""Randomness sources.

Every randomized operation in the package takes an explicit ``rng``
argument: any :class:`random.Random` instance. Production callers pass
:func:`system_rng`; reproducible runs pass a :class:`SeededRandom`.
"""

import hashlib
import random

__all__ = ["SeededRandom", "system_rng", "spawn"]


class SeededRandom(random.Random):
    """Deterministic SHA-256 counter-mode generator.

    A drop-in :class:`random.Random` whose whole output stream is fixed by
    the seed. Used for ``--seed`` reproducibility and tests.
    """

    def __init__(self, seed=0):
        super().__init__(seed)

    def seed(self, a=None, version=2):
        if a is None:
            raise TypeError("SeededRandom needs an explicit seed")
        if isinstance(a, int):
            material = b"int:" + a.to_bytes((a.bit_length() + 8) // 8 or 1, "big", signed=True)
        elif isinstance(a, str):
            material = b"str:" + a.encode()
        else:
            material = b"bytes:" + bytes(a)
        self._key = hashlib.sha256(b"anonyabe-drbg" + material).digest()
        self._counter = 0
        self._pool = b""
        self.gauss_next = None

    def _take(self, n):
        while len(self._pool) < n:
            block = hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            self._pool += block
        out, self._pool = self._pool[:n], self._pool[n:]
        return out

    def getrandbits(self, k):
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        if k == 0:
            return 0
        nbytes = (k + 7) // 8
        return int.from_bytes(self._take(nbytes), "big") >> (nbytes * 8 - k)

    def random(self):
        return self.getrandbits(53) * (2.0 ** -53)

    def getstate(self):
        return (self._key, self._counter, self._pool, self.gauss_next)

    def setstate(self, state):
        self._key, self._counter, self._pool, self.gauss_next = state


def system_rng():
    """OS-entropy generator for real key material."""
    return random.SystemRandom()


def spawn(rng, label=""):
    """Derive an independent child generator from ``rng``.

    Children of a seeded parent are themselves seeded (deterministic);
    children of ``SystemRandom`` get fresh OS entropy.
    """
    if isinstance(rng, random.SystemRandom):
        return random.SystemRandom()
    return SeededRandom(rng.getrandbits(256).to_bytes(32, "big") + label.encode())
