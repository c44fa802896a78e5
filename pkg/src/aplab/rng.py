"""Counter-based deterministic random streams.

Every random quantity in a run is a pure function of
(global seed, trial index, stream tag, counter), so trials can be executed
in any order, on any number of workers, in scalar or vectorized form, and
reproduce bit-identically.  The generator is the splitmix64 output function
applied to a keyed counter; keys are derived by chaining the same finalizer
over (seed, trial, tag).

Counters for the environment stream are laid out as (step << DRAW_BITS) | draw
so a step may consume up to 2**DRAW_BITS draws without colliding with its
neighbours.  Integers in [0, n) are taken by modulo reduction; the bias is
at most n / 2**64 per value, far below anything resolvable by the test
tolerances used here.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TAG_SALT = 0xD1B54A32D192ED03

# Stream tags.  ENV feeds the arrival distribution, STRATEGY feeds any
# randomness a strategy asks for, AUX is free for auxiliary sampling
# (state-generation helpers in tests and replacement drivers).
TAG_ENV = 0
TAG_STRATEGY = 1
TAG_AUX = 2

DRAW_BITS = 20  # draws per step before counters would collide

__all__ = [
    "TAG_ENV",
    "TAG_STRATEGY",
    "TAG_AUX",
    "DRAW_BITS",
    "mix64",
    "stream_key",
    "draw_u64",
    "draw_block",
    "env_counter",
    "star_centers_block",
    "CounterRng",
]


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective scrambling of 64-bit integers."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _M1) & _MASK
    x = ((x ^ (x >> 27)) * _M2) & _MASK
    return x ^ (x >> 31)


def stream_key(seed: int, trial: int, tag: int) -> int:
    """Derive the 64-bit key of one (seed, trial, tag) stream."""
    k = mix64(seed & _MASK)
    k = mix64(k ^ (((trial + 1) * _GOLDEN) & _MASK))
    k = mix64(k ^ (((tag + 1) * _TAG_SALT) & _MASK))
    return k


def draw_u64(key: int, counter: int) -> int:
    """The counter-th 64-bit value of the stream with the given key."""
    return mix64((key + ((counter + 1) * _GOLDEN)) & _MASK)


def draw_block(key: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized draw_u64 over an array of counters (returns uint64)."""
    x = np.uint64(key) + (counters.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def env_counter(step: int, draw: int = 0) -> int:
    """Counter of the draw-th environment value consumed at a (1-based) step."""
    return (step << DRAW_BITS) | draw


def star_centers_block(key: int, step_lo: int, step_hi: int, n: int) -> np.ndarray:
    """Star centers (vertices in 1..n) for steps step_lo..step_hi-1, vectorized.

    Center at step t equals draw_u64(key, env_counter(t)) % n + 1, so scalar
    and block execution agree bit for bit.
    """
    steps = np.arange(step_lo, step_hi, dtype=np.uint64) << np.uint64(DRAW_BITS)
    vals = draw_block(key, steps)
    return (vals % np.uint64(n) + np.uint64(1)).astype(np.int64)


class CounterRng:
    """Sequential view of one stream, for consumers that draw as they go.

    Used for strategy randomness (tag TAG_STRATEGY) and auxiliary sampling.
    The environment stream never goes through this class; it addresses
    counters positionally by step.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key
        self.counter = counter

    @classmethod
    def for_stream(cls, seed: int, trial: int, tag: int) -> "CounterRng":
        return cls(stream_key(seed, trial, tag))

    def next_u64(self) -> int:
        v = draw_u64(self.key, self.counter)
        self.counter += 1
        return v

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n).  Modulo reduction; bias ≤ n / 2**64."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53
