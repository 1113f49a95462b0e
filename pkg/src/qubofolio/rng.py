"""Deterministic seeding utilities.

All campaign randomness flows from a single master seed through
:func:`derive_seed`, so any task (solver run, calibration pass, tuning
round) can be replayed in isolation.  The derivation is a splitmix64
chain over the task tag parts:

    h = splitmix64(master)
    for part in parts:  h = splitmix64(h XOR fnv1a64(str(part)))

Sequential solver kernels consume a :class:`SplitMix64` stream directly;
batch samplers feed the derived seed to ``numpy.random.default_rng``.
The same generator is implemented in the compiled kernels so native and
fallback backends draw identical streams.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 step: returns the scrambled successor of ``state``."""
    z = (state + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, *parts) -> int:
    """Derive a 64-bit task seed from the master seed and a tag path."""
    h = splitmix64(master & MASK64)
    for part in parts:
        h = splitmix64(h ^ fnv1a64(str(part)))
    return h


class SplitMix64:
    """Tiny deterministic PRNG shared bit-for-bit with the native kernels."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def randbelow(self, n: int) -> int:
        """Integer in [0, n). Modulo reduction; the tiny bias is irrelevant
        for proposal selection and keeps the native kernels trivial."""
        return self.next_u64() % n
