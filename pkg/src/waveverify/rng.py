"""Deterministic random-stream derivation.

All randomness in the package flows through Philox4x64-10 counter-based
generators (numpy's ``np.random.Philox``). A stream is addressed by a root
seed plus a tuple of integer/string identifiers; the address is folded into
the 128-bit Philox key with SplitMix64. This makes every stream

* seedable: fixed (seed, ids) always yields the same stream,
* splittable: disjoint id tuples give statistically independent streams,
* order-free: streams can be drawn from in any order or in parallel.

The derivation is pure integer arithmetic, so another implementation can
reproduce the exact draws given the same seed, ids and the Philox spec.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One SplitMix64 scramble step (Steele et al. 2014 constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fold(seed: int, ids: tuple) -> int:
    """Fold an id tuple into a 64-bit word, mixing after each element."""
    acc = _splitmix64(seed & _MASK64)
    for part in ids:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                acc = _splitmix64(acc ^ byte)
        else:
            acc = _splitmix64(acc ^ (int(part) & _MASK64))
    return acc


def stream(seed: int, *ids) -> np.random.Generator:
    """Return the Philox generator addressed by ``(seed, *ids)``.

    ``ids`` elements may be ints (e.g. speaker index, epoch) or short strings
    naming the purpose (e.g. ``"profile"``, ``"crop"``).
    """
    key = np.array([seed & _MASK64, _fold(seed, ids)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *ids) -> int:
    """A 63-bit child seed addressed by ``(seed, *ids)``; same folding as stream()."""
    return _fold(seed, ids) >> 1
