"""Seeding helpers.

All randomness flows through :func:`make_rng`, which builds a counter-based
Philox generator from a 64-bit master seed plus an optional tuple of integer
keys (trial index, grid point, column index, ...). Sub-streams derived from
different keys are independent of the order in which they are requested.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_words(keys) -> list[int]:
    words = []
    for key in keys:
        if isinstance(key, str):
            digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
            words.append(int.from_bytes(digest, "little"))
        else:
            words.append(int(key) & _MASK64)
    return words


def make_rng(seed: int, *keys) -> np.random.Generator:
    """Return a Philox generator for ``seed`` mixed with ``keys``.

    ``keys`` may be ints or short strings (hashed). ``make_rng(s, 3)`` and
    ``make_rng(s, 4)`` give independent streams; the same arguments always
    give the same stream.
    """
    ss = np.random.SeedSequence([int(seed) & _MASK64, *_key_words(keys)])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 64-bit sub-seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, *_key_words(keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
